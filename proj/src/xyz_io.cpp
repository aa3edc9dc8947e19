#include "pcflow/xyz_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pcflow/errors.hpp"

namespace pcflow {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

}  // namespace

PointCloud parse_xyz(const std::string& text) {
    std::vector<double> xyz;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        ++line_no;
        const char* p = text.data() + pos;
        const char* e = text.data() + end;
        pos = end + 1;

        while (p < e && is_space(*p)) ++p;
        if (p == e || *p == '#') {
            if (end == text.size()) break;
            continue;
        }
        double vals[3];
        int count = 0;
        while (p < e) {
            if (count == 3) throw ParseError("expected 3 values, found more", line_no);
            if (*p == '+') ++p;  // from_chars rejects a leading '+'
            auto [next, ec] = std::from_chars(p, e, vals[count]);
            if (ec != std::errc() || !std::isfinite(vals[count]))
                throw ParseError("malformed coordinate", line_no);
            ++count;
            p = next;
            if (p < e && !is_space(*p)) throw ParseError("malformed coordinate", line_no);
            while (p < e && is_space(*p)) ++p;
        }
        if (count != 3)
            throw ParseError("expected 3 values, found " + std::to_string(count), line_no);
        xyz.insert(xyz.end(), vals, vals + 3);
        if (end == text.size()) break;
    }
    if (xyz.empty()) throw IoError("empty cloud");
    return PointCloud(std::move(xyz));
}

PointCloud read_xyz(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_xyz(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

std::string format_xyz(const PointCloud& cloud, const std::vector<std::string>& comments) {
    std::string out;
    out.reserve(cloud.size() * 72);
    for (const auto& c : comments) out += "# " + c + "\n";
    char buf[32];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            auto [end, ec] = std::to_chars(buf, buf + sizeof buf, cloud[i][k],
                                           std::chars_format::general, 17);
            (void)ec;
            out.append(buf, end);
            out += (k == 2) ? '\n' : ' ';
        }
    }
    return out;
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<std::string>& comments) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << format_xyz(cloud, comments);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace pcflow
