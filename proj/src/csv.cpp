#include "pheno/csv.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "pheno/common.hpp"

namespace pheno::csv {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

Reader::Reader(const std::filesystem::path& path) : path_(path) {
    // gzopen reads uncompressed files transparently.
    gz_ = gzopen(path.string().c_str(), "rb");
    if (gz_ == nullptr || !std::filesystem::is_regular_file(path)) {
        if (gz_ != nullptr) gzclose(static_cast<gzFile>(gz_));
        gz_ = nullptr;
        throw IoError("cannot open file: " + path.string());
    }
    gzbuffer(static_cast<gzFile>(gz_), 1 << 17);
    std::string first;
    if (!read_line(first)) {
        throw SchemaError("missing header row: " + path.string());
    }
    if (first.size() >= 3 && static_cast<unsigned char>(first[0]) == 0xEF &&
        static_cast<unsigned char>(first[1]) == 0xBB && static_cast<unsigned char>(first[2]) == 0xBF) {
        first.erase(0, 3);
    }
    header_ = split_line(first);
    for (auto& h : header_) h = std::string(trim(h));
    line_ = 1;
}

Reader::~Reader() {
    if (gz_ != nullptr) gzclose(static_cast<gzFile>(gz_));
}

std::optional<std::size_t> Reader::find(std::string_view name) const {
    const std::string want = lower(name);
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (lower(header_[i]) == want) return i;
    }
    return std::nullopt;
}

std::size_t Reader::require(std::string_view name) const {
    if (auto idx = find(name)) return *idx;
    throw SchemaError("missing required column '" + std::string(name) + "' in " + path_.string());
}

bool Reader::read_line(std::string& out) {
    out.clear();
    auto* f = static_cast<gzFile>(gz_);
    char buf[4096];
    bool any = false;
    while (gzgets(f, buf, sizeof(buf)) != nullptr) {
        any = true;
        out.append(buf);
        if (!out.empty() && out.back() == '\n') break;
    }
    if (!any) {
        int err = 0;
        gzerror(f, &err);
        if (err != Z_OK && err != Z_STREAM_END) throw IoError("read error in " + path_.string());
        return false;
    }
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return true;
}

bool Reader::next(std::vector<std::string>& fields) {
    std::string line;
    for (;;) {
        if (!read_line(line)) return false;
        ++line_;
        if (!line.empty()) break;
    }
    // A quoted field may span physical lines; join until quotes balance.
    auto quotes = std::count(line.begin(), line.end(), '"');
    while (quotes % 2 != 0) {
        std::string more;
        if (!read_line(more)) break;
        ++line_;
        line += '\n';
        line += more;
        quotes += std::count(more.begin(), more.end(), '"');
    }
    fields = split_line(line);
    return true;
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    std::string tmp(s);
    char* end = nullptr;
    double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size()) return std::nullopt;
    return v;
}

std::optional<long long> parse_int(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace pheno::csv
