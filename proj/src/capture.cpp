#include "tunekit/capture.h"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "tunekit/error.h"
#include "tunekit/fs.h"

namespace tunekit {

namespace {

constexpr std::size_t header_size = sizeof(capture_magic) + 4 + 8;

std::uint64_t align_up(std::uint64_t v) {
    return (v + capture_alignment - 1) / capture_alignment * capture_alignment;
}

bool is_float(ElementType t) {
    return t == ElementType::f32 || t == ElementType::f64;
}

bool is_unsigned(ElementType t) {
    return t == ElementType::u8 || t == ElementType::u16 || t == ElementType::u32
        || t == ElementType::u64;
}

void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; i++) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; i++) {
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

nlohmann::json scalar_to_json(const ScalarArg& s) {
    nlohmann::json j = {{"kind", "scalar"}, {"type", type_name(s.type)}};
    std::visit([&](auto v) { j["value"] = v; }, s.value);
    return j;
}

ScalarArg scalar_from_json(const nlohmann::json& j) {
    ScalarArg s;
    s.type = parse_element_type(j.at("type").get<std::string>());
    const auto& v = j.at("value");
    if (is_float(s.type)) {
        s.value = v.get<double>();
    } else if (is_unsigned(s.type)) {
        s.value = v.get<std::uint64_t>();
    } else {
        s.value = v.get<std::int64_t>();
    }
    return s;
}

struct Segment {
    std::uint64_t offset;
    std::uint64_t length;
    std::uint32_t crc;
};

nlohmann::json segment_json(const Segment& s) {
    return {{"offset", s.offset}, {"length", s.length}, {"crc32", s.crc}};
}

Segment segment_from_json(const nlohmann::json& j) {
    return {
        j.at("offset").get<std::uint64_t>(),
        j.at("length").get<std::uint64_t>(),
        j.at("crc32").get<std::uint32_t>()};
}

// Payload segments in file order, with offsets relative to the payload region.
std::vector<std::span<const std::byte>> layout(
    const Capture& c,
    nlohmann::json& metadata) {
    std::vector<std::span<const std::byte>> payloads;
    std::uint64_t cursor = 0;

    auto place = [&](std::span<const std::byte> data, std::uint32_t crc) {
        Segment s {cursor, data.size(), crc};
        payloads.push_back(data);
        cursor = align_up(cursor + data.size());
        return s;
    };

    nlohmann::json args = nlohmann::json::array();
    for (std::size_t i = 0; i < c.args.size(); i++) {
        if (const auto* s = std::get_if<ScalarArg>(&c.args[i])) {
            args.push_back(scalar_to_json(*s));
            continue;
        }

        const auto& b = std::get<CapturedBuffer>(c.args[i]);
        if (b.payload.size() != b.element_count * element_size(b.type)) {
            throw FormatError(
                "argument " + std::to_string(i) + ": payload is " + std::to_string(b.payload.size())
                + " bytes, expected " + std::to_string(b.element_count) + " x "
                + std::to_string(element_size(b.type)));
        }
        if (crc32(b.payload) != b.checksum) {
            throw FormatError("argument " + std::to_string(i) + ": checksum does not match payload");
        }

        nlohmann::json entry = {
            {"kind", "buffer"},
            {"role", role_name(b.role)},
            {"type", type_name(b.type)},
            {"count", b.element_count},
            {"payload", segment_json(place(b.payload, b.checksum))},
        };

        if (b.reference) {
            if (b.reference->size() != b.payload.size()) {
                throw FormatError(
                    "argument " + std::to_string(i) + ": reference output size differs from payload");
            }
            entry["reference"] = segment_json(place(*b.reference, crc32(*b.reference)));
        }

        args.push_back(std::move(entry));
    }

    metadata = {
        {"application", c.metadata.application},
        {"args", std::move(args)},
        {"definition", c.definition.to_json()},
        {"format_version", c.metadata.format_version},
        {"problem", to_json(c.problem)},
        {"timestamp", c.metadata.timestamp},
    };

    return payloads;
}

class CaptureReader {
  public:
    explicit CaptureReader(const std::filesystem::path& path) :
        path_(path),
        in_(path, std::ios::binary) {
        if (!in_) {
            throw IoError("cannot open capture '" + path.string() + "': " + std::strerror(errno));
        }

        in_.seekg(0, std::ios::end);
        file_size_ = static_cast<std::uint64_t>(in_.tellg());
        in_.seekg(0);

        unsigned char header[header_size];
        if (file_size_ < header_size || !in_.read(reinterpret_cast<char*>(header), header_size)) {
            fail("truncated header");
        }
        if (std::memcmp(header, capture_magic, sizeof(capture_magic)) != 0) {
            fail("bad magic, not a capture file");
        }

        auto version = static_cast<std::uint32_t>(get_le(header + 6, 4));
        if (version != capture_format_version) {
            fail("unsupported format version " + std::to_string(version));
        }

        std::uint64_t meta_len = get_le(header + 10, 8);
        if (meta_len > file_size_ - header_size) {
            fail("metadata length exceeds file size");
        }

        std::string meta(meta_len, '\0');
        if (!in_.read(meta.data(), static_cast<std::streamsize>(meta_len))) {
            fail("truncated metadata");
        }

        try {
            metadata_ = nlohmann::json::parse(meta);
        } catch (const nlohmann::json::parse_error& e) {
            fail(std::string("metadata is not valid JSON: ") + e.what());
        }

        payload_base_ = align_up(header_size + meta_len);
    }

    const nlohmann::json& metadata() const {
        return metadata_;
    }

    std::vector<std::byte> read_segment(const Segment& s, const std::string& what) {
        if (s.offset % capture_alignment != 0) {
            fail(what + ": misaligned payload offset");
        }
        if (s.offset > file_size_ || payload_base_ + s.offset > file_size_
            || s.length > file_size_ - payload_base_ - s.offset) {
            fail(what + ": payload extends past end of file");
        }

        std::vector<std::byte> data(s.length);
        in_.seekg(static_cast<std::streamoff>(payload_base_ + s.offset));
        if (!in_.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(s.length))) {
            fail(what + ": read failed");
        }

        if (crc32(data) != s.crc) {
            fail(what + ": checksum mismatch (file corrupted)");
        }
        return data;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw FormatError("capture '" + path_.string() + "': " + msg);
    }

  private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::uint64_t file_size_ = 0;
    std::uint64_t payload_base_ = 0;
    nlohmann::json metadata_;
};

}  // namespace

std::size_t element_size(ElementType t) {
    switch (t) {
        case ElementType::i8:
        case ElementType::u8:
            return 1;
        case ElementType::i16:
        case ElementType::u16:
            return 2;
        case ElementType::f32:
        case ElementType::i32:
        case ElementType::u32:
            return 4;
        case ElementType::f64:
        case ElementType::i64:
        case ElementType::u64:
            return 8;
    }
    return 1;
}

const char* type_name(ElementType t) {
    switch (t) {
        case ElementType::f32:
            return "f32";
        case ElementType::f64:
            return "f64";
        case ElementType::i8:
            return "i8";
        case ElementType::i16:
            return "i16";
        case ElementType::i32:
            return "i32";
        case ElementType::i64:
            return "i64";
        case ElementType::u8:
            return "u8";
        case ElementType::u16:
            return "u16";
        case ElementType::u32:
            return "u32";
        case ElementType::u64:
            return "u64";
    }
    return "?";
}

ElementType parse_element_type(std::string_view name) {
    static constexpr ElementType all[] = {
        ElementType::f32,
        ElementType::f64,
        ElementType::i8,
        ElementType::i16,
        ElementType::i32,
        ElementType::i64,
        ElementType::u8,
        ElementType::u16,
        ElementType::u32,
        ElementType::u64};
    for (auto t : all) {
        if (name == type_name(t)) {
            return t;
        }
    }
    throw FormatError("unknown element type '" + std::string(name) + "'");
}

const char* role_name(BufferRole r) {
    return r == BufferRole::input ? "input" : "output";
}

ScalarArg ScalarArg::integer(std::int64_t v, ElementType type) {
    ScalarArg s;
    s.type = type;
    if (is_unsigned(type)) {
        s.value = static_cast<std::uint64_t>(v);
    } else {
        s.value = v;
    }
    return s;
}

ScalarArg ScalarArg::floating(double v, ElementType type) {
    return {type, v};
}

std::optional<std::int64_t> ScalarArg::as_integer() const {
    if (const auto* i = std::get_if<std::int64_t>(&value)) {
        return *i;
    }
    if (const auto* u = std::get_if<std::uint64_t>(&value)) {
        if (*u <= static_cast<std::uint64_t>(INT64_MAX)) {
            return static_cast<std::int64_t>(*u);
        }
    }
    return std::nullopt;
}

ScalarArgs scalar_args_of(const LaunchArgs& args) {
    ScalarArgs out;
    for (std::size_t i = 0; i < args.size(); i++) {
        if (const auto* s = std::get_if<ScalarArg>(&args[i])) {
            if (auto v = s->as_integer()) {
                out[i] = *v;
            }
        }
    }
    return out;
}

CapturedBuffer CapturedBuffer::make(BufferRole role, ElementType type, std::vector<std::byte> payload) {
    if (payload.size() % element_size(type) != 0) {
        throw FormatError("buffer size is not a multiple of the element size");
    }
    CapturedBuffer b;
    b.role = role;
    b.type = type;
    b.element_count = payload.size() / element_size(type);
    b.checksum = crc32(payload);
    b.payload = std::move(payload);
    return b;
}

ScalarArgs Capture::scalar_args() const {
    ScalarArgs out;
    for (std::size_t i = 0; i < args.size(); i++) {
        if (const auto* s = std::get_if<ScalarArg>(&args[i])) {
            if (auto v = s->as_integer()) {
                out[i] = *v;
            }
        }
    }
    return out;
}

std::string Capture::precision() const {
    for (const auto& a : args) {
        if (const auto* b = std::get_if<CapturedBuffer>(&a)) {
            if (b->type == ElementType::f32) {
                return "float";
            }
            if (b->type == ElementType::f64) {
                return "double";
            }
        }
    }
    return "none";
}

std::uint64_t Capture::payload_bytes() const {
    std::uint64_t total = 0;
    for (const auto& a : args) {
        if (const auto* b = std::get_if<CapturedBuffer>(&a)) {
            total += b->payload.size();
        }
    }
    return total;
}

Capture Capture::from_launch(
    const KernelDefinition& def,
    const LaunchArgs& args,
    std::string application) {
    Capture c;
    c.definition = def;
    c.problem = def.derive_problem_size(scalar_args_of(args));
    c.metadata.timestamp = utc_timestamp();
    c.metadata.application = std::move(application);

    for (const auto& a : args) {
        if (const auto* s = std::get_if<ScalarArg>(&a)) {
            c.args.emplace_back(*s);
        } else {
            const auto& view = std::get<BufferView>(a);
            std::vector<std::byte> copy(view.data.begin(), view.data.end());
            c.args.emplace_back(CapturedBuffer::make(view.role, view.type, std::move(copy)));
        }
    }
    return c;
}

std::uint32_t crc32(std::span<const std::byte> data) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    const auto* p = reinterpret_cast<const Bytef*>(data.data());
    std::size_t left = data.size();
    // zlib takes uInt lengths.
    while (left > 0) {
        auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
        crc = ::crc32(crc, p, chunk);
        p += chunk;
        left -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

void write_capture(const Capture& capture, const std::filesystem::path& path) {
    nlohmann::json metadata;
    auto payloads = layout(capture, metadata);
    std::string meta = canonical_json(metadata);

    std::string head(capture_magic, sizeof(capture_magic));
    put_le(head, capture_format_version, 4);
    put_le(head, meta.size(), 8);
    head += meta;
    head.resize(align_up(head.size()), '\0');

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot create '" + tmp.string() + "': " + std::strerror(errno));
        }
        out.write(head.data(), static_cast<std::streamsize>(head.size()));

        static const char zeros[capture_alignment] = {};
        for (std::size_t i = 0; i < payloads.size(); i++) {
            const auto& p = payloads[i];
            out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size()));
            if (i + 1 < payloads.size()) {
                out.write(zeros, static_cast<std::streamsize>(align_up(p.size()) - p.size()));
            }
        }

        out.flush();
        if (!out) {
            throw IoError("failed to write capture '" + tmp.string() + "'");
        }
    }

    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot replace '" + path.string() + "'");
    }
}

Capture read_capture(const std::filesystem::path& path) {
    CaptureReader reader(path);
    const auto& meta = reader.metadata();

    try {
        Capture c;
        c.metadata.application = meta.at("application").get<std::string>();
        c.metadata.timestamp = meta.at("timestamp").get<std::string>();
        c.metadata.format_version = meta.at("format_version").get<std::uint32_t>();
        c.definition = KernelDefinition::from_json(meta.at("definition"));
        c.problem = problem_from_json(meta.at("problem"));

        const auto& args = meta.at("args");
        for (std::size_t i = 0; i < args.size(); i++) {
            const auto& a = args[i];
            std::string kind = a.at("kind").get<std::string>();

            if (kind == "scalar") {
                c.args.emplace_back(scalar_from_json(a));
                continue;
            }
            if (kind != "buffer") {
                reader.fail("argument " + std::to_string(i) + " has unknown kind '" + kind + "'");
            }

            std::string what = "argument " + std::to_string(i);
            CapturedBuffer b;
            std::string role = a.at("role").get<std::string>();
            if (role != "input" && role != "output") {
                reader.fail(what + " has unknown role '" + role + "'");
            }
            b.role = role == "input" ? BufferRole::input : BufferRole::output;
            b.type = parse_element_type(a.at("type").get<std::string>());
            b.element_count = a.at("count").get<std::uint64_t>();

            Segment seg = segment_from_json(a.at("payload"));
            if (seg.length != b.element_count * element_size(b.type)) {
                reader.fail(what + ": payload length does not match element count");
            }
            b.payload = reader.read_segment(seg, what);
            b.checksum = seg.crc;

            if (a.contains("reference")) {
                b.reference = reader.read_segment(segment_from_json(a.at("reference")), what);
            }

            c.args.emplace_back(std::move(b));
        }

        return c;
    } catch (const nlohmann::json::exception& e) {
        reader.fail(std::string("malformed metadata: ") + e.what());
    }
}

nlohmann::json read_capture_metadata(const std::filesystem::path& path) {
    return CaptureReader(path).metadata();
}

CapturePolicy CapturePolicy::parse(std::string_view list, std::filesystem::path directory) {
    CapturePolicy p;
    p.directory = std::move(directory);

    std::size_t start = 0;
    while (start <= list.size()) {
        auto end = list.find(',', start);
        if (end == std::string_view::npos) {
            end = list.size();
        }

        auto token = list.substr(start, end - start);
        while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front()))) {
            token.remove_prefix(1);
        }
        while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back()))) {
            token.remove_suffix(1);
        }
        if (!token.empty()) {
            p.kernels.emplace(token);
        }

        start = end + 1;
    }
    return p;
}

CapturePolicy CapturePolicy::from_env() {
    const char* list = std::getenv(capture_env_var);
    const char* dir = std::getenv(capture_dir_env_var);
    return parse(list != nullptr ? list : "", dir != nullptr && *dir != '\0' ? dir : ".");
}

std::filesystem::path capture_file_name(
    const std::filesystem::path& dir,
    const KernelDefinition& def,
    const ProblemSize& problem) {
    std::string name = def.name() + "_";
    for (std::size_t i = 0; i < problem.dims(); i++) {
        if (i > 0) {
            name += 'x';
        }
        name += std::to_string(problem[i]);
    }
    return dir / (name + capture_extension);
}

}  // namespace tunekit
