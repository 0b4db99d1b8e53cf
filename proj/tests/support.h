#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "tunekit/capture.h"
#include "tunekit/example.h"

namespace tunekit::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter {0};
        path_ = std::filesystem::temp_directory_path()
            / ("tunekit_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const {
        return path_;
    }

    std::filesystem::path operator/(const std::string& name) const {
        return path_ / name;
    }

  private:
    std::filesystem::path path_;
};

inline std::vector<std::byte> random_bytes(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::vector<std::byte> out(n);
    for (auto& b : out) {
        b = static_cast<std::byte>(gen() & 0xff);
    }
    return out;
}

// Capture of `def` on an nx*ny*nz problem with two small float buffers.
inline Capture small_capture(const KernelDefinition& def, std::int64_t nx, std::int64_t ny, std::int64_t nz) {
    auto n = static_cast<std::size_t>(nx * ny * nz);
    Capture c;
    c.definition = def;
    c.problem = ProblemSize {nx, ny, nz};
    c.args.emplace_back(ScalarArg::integer(nx));
    c.args.emplace_back(ScalarArg::integer(ny));
    c.args.emplace_back(ScalarArg::integer(nz));
    c.args.emplace_back(CapturedBuffer::make(BufferRole::output, ElementType::f32, std::vector<std::byte>(n * 4)));
    c.args.emplace_back(CapturedBuffer::make(BufferRole::input, ElementType::f32, random_bytes(n * 4, 1)));
    c.metadata.timestamp = "2024-01-01T00:00:00Z";
    c.metadata.application = "test";
    return c;
}

}  // namespace tunekit::test
