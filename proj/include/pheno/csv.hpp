#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pheno::csv {

/// Streaming CSV reader over a plain or gzip-compressed (".gz") file.
/// Handles RFC 4180 quoting; header lookup is case-insensitive.
class Reader {
public:
    explicit Reader(const std::filesystem::path& path);
    ~Reader();
    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    const std::vector<std::string>& header() const { return header_; }

    /// Index of a header column, or nullopt.
    std::optional<std::size_t> find(std::string_view name) const;

    /// Index of a required column; throws SchemaError naming column and file.
    std::size_t require(std::string_view name) const;

    /// Reads the next record into `fields`. Returns false at end of file.
    bool next(std::vector<std::string>& fields);

    /// 1-based line number of the last record returned.
    std::size_t line() const { return line_; }

    const std::filesystem::path& path() const { return path_; }

private:
    bool read_line(std::string& out);

    std::filesystem::path path_;
    void* gz_ = nullptr;  // gzFile
    std::vector<std::string> header_;
    std::size_t line_ = 0;
};

/// Splits one CSV line (no embedded newlines) into fields.
std::vector<std::string> split_line(std::string_view line);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

/// Parses a double; nullopt for empty or malformed text.
std::optional<double> parse_double(std::string_view s);

std::optional<long long> parse_int(std::string_view s);

}  // namespace pheno::csv
