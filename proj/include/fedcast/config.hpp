#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace fedcast {

/// Flat `key = value` configuration with dotted section keys. Lines starting
/// with '#' are comments. Reads are tracked so unknown keys can be reported.
class KeyValueConfig {
public:
    static KeyValueConfig parse_file(const std::filesystem::path& path);
    static KeyValueConfig parse_string(const std::string& text,
                                       const std::string& origin = "<string>");

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    long get_int(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    /// Comma-separated non-negative integers.
    std::vector<std::size_t> get_size_list(const std::string& key) const;

    /// Keys present in the file but never read; non-empty means a typo.
    std::vector<std::string> unread_keys() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> read_;
};

} // namespace fedcast
