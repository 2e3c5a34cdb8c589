#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace pheno {

/// Flat "key = value" text: one entry per line, '#' starts a comment.
class KeyValues {
public:
    static KeyValues parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValues load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key) const;  // throws ParameterError if absent
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    long long get_int_or(const std::string& key, long long fallback) const;
    bool get_bool_or(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles_or(const std::string& key, const std::vector<double>& fallback) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

    /// Keys in insertion order are kept for writing.
    std::string str() const;
    void save(const std::filesystem::path& path) const;

private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

/// Runs `fn` for indices [0, n) on up to `threads` workers. Each index runs
/// exactly once; callers write results into per-index slots.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace pheno
