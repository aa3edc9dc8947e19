#include <bit>
#include <cstring>
#include <fstream>

#include "pcflow/coupling.hpp"
#include "pcflow/errors.hpp"

namespace pcflow {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'F', 'L', 'O', 'W', 'S', 'C'};

template <class T>
void put_le(std::string& buf, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class T>
T get_le(const unsigned char* p) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
    return v;
}

void put_block(std::string& buf, const PointCloud& c) {
    for (double d : c.coords()) put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(static_cast<float>(d)));
}

std::vector<double> get_block(const unsigned char* p, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i)));
    return out;
}

struct Parsed {
    CacheHeader header;
    std::size_t blocks_at = 0;
};

// Validates the header against the file length; error text on failure.
std::optional<Parsed> parse_header(const std::string& bytes, std::string& why) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t fixed = 8 + 4 + 8 + 4 + 8 + 8 + 4;
    if (bytes.size() < fixed) {
        why = "truncated header";
        return std::nullopt;
    }
    if (std::memcmp(p, kMagic, 8) != 0) {
        why = "bad magic";
        return std::nullopt;
    }
    std::size_t at = 8;
    const auto version = get_le<std::uint32_t>(p + at);
    at += 4;
    if (version != kCouplingCacheVersion) {
        why = "unsupported version " + std::to_string(version);
        return std::nullopt;
    }
    Parsed out;
    out.header.m = get_le<std::uint64_t>(p + at);
    at += 8;
    const auto method = get_le<std::uint32_t>(p + at);
    at += 4;
    if (method > 1) {
        why = "unknown method code " + std::to_string(method);
        return std::nullopt;
    }
    out.header.method = static_cast<CouplingMethod>(method);
    out.header.seed = get_le<std::uint64_t>(p + at);
    at += 8;
    out.header.digest = get_le<std::uint64_t>(p + at);
    at += 8;
    const auto id_len = get_le<std::uint32_t>(p + at);
    at += 4;
    if (bytes.size() < at + id_len) {
        why = "truncated header";
        return std::nullopt;
    }
    out.header.shape_id.assign(bytes.data() + at, id_len);
    at += id_len;
    const std::size_t m = out.header.m;
    if (m == 0 || m > (bytes.size() - at) / 24 || bytes.size() - at != m * 24) {
        why = "size mismatch (m = " + std::to_string(m) + ")";
        return std::nullopt;
    }
    out.blocks_at = at;
    return out;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open coupling cache " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

void write_coupling_cache(const std::filesystem::path& path, const SupersetCoupling& c) {
    if (c.x0_rows.size() != c.x1_rows.size() || c.x0_rows.empty())
        throw ArgumentError("write_coupling_cache: malformed coupling");
    std::string buf(kMagic, 8);
    put_le<std::uint32_t>(buf, kCouplingCacheVersion);
    put_le<std::uint64_t>(buf, c.m());
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.method));
    put_le<std::uint64_t>(buf, c.seed);
    put_le<std::uint64_t>(buf, c.digest);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.shape_id.size()));
    buf += c.shape_id;
    buf.reserve(buf.size() + 24 * c.m());
    put_block(buf, c.x0_rows);
    put_block(buf, c.x1_rows);

    // Write-then-rename so readers never see a partial file.
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write coupling cache " + tmp.string());
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw IoError("write failed for coupling cache " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move coupling cache into place at " + path.string() + ": " + ec.message());
}

SupersetCoupling read_coupling_cache(const std::filesystem::path& path) {
    const std::string bytes = slurp(path);
    std::string why;
    const auto parsed = parse_header(bytes, why);
    if (!parsed) throw IoError("invalid coupling cache " + path.string() + ": " + why);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + parsed->blocks_at;
    const std::size_t m = parsed->header.m;
    SupersetCoupling c;
    c.shape_id = parsed->header.shape_id;
    c.method = parsed->header.method;
    c.seed = parsed->header.seed;
    c.digest = parsed->header.digest;
    try {
        c.x0_rows = PointCloud(get_block(p, 3 * m));
        c.x1_rows = PointCloud(get_block(p + 12 * m, 3 * m));
    } catch (const std::exception& e) {
        throw IoError("invalid coupling cache " + path.string() + ": " + e.what());
    }
    return c;
}

std::optional<CacheHeader> probe_coupling_cache(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
    std::string why;
    auto parsed = parse_header(slurp(path), why);
    if (!parsed) return std::nullopt;
    return parsed->header;
}

}  // namespace pcflow
