#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tunekit/kerneldef.h"

namespace tunekit {

enum struct ElementType { f32, f64, i8, i16, i32, i64, u8, u16, u32, u64 };

std::size_t element_size(ElementType t);
const char* type_name(ElementType t);
ElementType parse_element_type(std::string_view name);

enum struct BufferRole { input, output };

const char* role_name(BufferRole r);

// A scalar kernel argument.
struct ScalarArg {
    ElementType type = ElementType::i64;
    std::variant<std::int64_t, std::uint64_t, double> value;

    static ScalarArg integer(std::int64_t v, ElementType type = ElementType::i64);
    static ScalarArg floating(double v, ElementType type = ElementType::f64);

    // Integer view for `argN` bindings; nullopt for floats and
    // unsigned values beyond INT64_MAX.
    std::optional<std::int64_t> as_integer() const;

    friend bool operator==(const ScalarArg&, const ScalarArg&) = default;
};

// A device buffer argument as seen at launch time (not owned).
struct BufferView {
    BufferRole role = BufferRole::input;
    ElementType type = ElementType::f32;
    std::span<const std::byte> data;

    std::uint64_t element_count() const {
        return data.size() / element_size(type);
    }
};

using LaunchArg = std::variant<ScalarArg, BufferView>;
using LaunchArgs = std::vector<LaunchArg>;

ScalarArgs scalar_args_of(const LaunchArgs& args);

// A buffer argument captured into a file (owned).
struct CapturedBuffer {
    BufferRole role = BufferRole::input;
    ElementType type = ElementType::f32;
    std::uint64_t element_count = 0;
    std::vector<std::byte> payload;
    // CRC-32 of `payload`.
    std::uint32_t checksum = 0;
    // Post-launch contents for output verification, if recorded.
    std::optional<std::vector<std::byte>> reference;

    // Computes the checksum; payload size must be element_count * element size.
    static CapturedBuffer make(BufferRole role, ElementType type, std::vector<std::byte> payload);

    friend bool operator==(const CapturedBuffer&, const CapturedBuffer&) = default;
};

using CapturedArg = std::variant<ScalarArg, CapturedBuffer>;

struct CaptureMetadata {
    std::string timestamp;
    std::string application;
    std::uint32_t format_version = 1;

    friend bool operator==(const CaptureMetadata&, const CaptureMetadata&) = default;
};

/**
 * Everything needed to replay one kernel launch offline: the definition,
 * the problem size, and every argument in signature order with full buffer
 * contents.
 */
struct Capture {
    KernelDefinition definition;
    ProblemSize problem;
    std::vector<CapturedArg> args;
    CaptureMetadata metadata;

    ScalarArgs scalar_args() const;

    // Precision label: element type name of the first floating-point buffer
    // (`float`/`double`), or `none`.
    std::string precision() const;

    std::uint64_t payload_bytes() const;

    // Snapshots launch arguments. The problem size is derived from the
    // scalar arguments; the timestamp is set to the current time.
    static Capture from_launch(
        const KernelDefinition& def,
        const LaunchArgs& args,
        std::string application = {});

    friend bool operator==(const Capture&, const Capture&) = default;
};

inline constexpr char capture_magic[6] = {'K', 'L', 'C', 'A', 'P', '1'};
inline constexpr std::uint32_t capture_format_version = 1;
inline constexpr std::size_t capture_alignment = 64;
inline constexpr const char* capture_extension = ".klcap";

// CRC-32 (polynomial 0xEDB88320).
std::uint32_t crc32(std::span<const std::byte> data);

/**
 * File layout: magic `KLCAP1`, u32 LE version, u64 LE metadata length,
 * canonical JSON metadata, then the payloads. Payloads start at the first
 * 64-byte boundary after the metadata; each payload's offset (relative to
 * that boundary) is a multiple of 64 and recorded in the metadata.
 *
 * Writing is atomic. Reading verifies magic, version and checksums and
 * throws FormatError on mismatch.
 */
void write_capture(const Capture& capture, const std::filesystem::path& path);
Capture read_capture(const std::filesystem::path& path);

// Metadata JSON only, without loading payloads.
nlohmann::json read_capture_metadata(const std::filesystem::path& path);

// Which kernel launches to capture and where to write the files.
struct CapturePolicy {
    std::set<std::string> kernels;
    std::filesystem::path directory = ".";

    // Comma-separated kernel names; surrounding whitespace and empty entries
    // are ignored.
    static CapturePolicy parse(std::string_view list, std::filesystem::path directory = ".");

    // Reads KERNEL_LAUNCHER_CAPTURE and KERNEL_LAUNCHER_CAPTURE_DIR.
    static CapturePolicy from_env();

    // Exact, case-sensitive match.
    bool should_capture(std::string_view kernel_name) const {
        return kernels.count(std::string(kernel_name)) > 0;
    }
};

inline constexpr const char* capture_env_var = "KERNEL_LAUNCHER_CAPTURE";
inline constexpr const char* capture_dir_env_var = "KERNEL_LAUNCHER_CAPTURE_DIR";

// `<dir>/<kernel name>_<x>x<y>x<z>.klcap`
std::filesystem::path capture_file_name(
    const std::filesystem::path& dir,
    const KernelDefinition& def,
    const ProblemSize& problem);

}  // namespace tunekit
