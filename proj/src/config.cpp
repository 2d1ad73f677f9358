#include "fedcast/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fedcast/errors.hpp"

namespace fedcast {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

} // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError(path.string(), "config: cannot open file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path.string());
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text,
                                            const std::string& origin) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(t, "config: missing '=' at " + origin + ":" +
                                     std::to_string(line_no));
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError(t, "config: empty key at " + origin + ":" +
                                     std::to_string(line_no));
        if (cfg.values_.count(key))
            throw ConfigError(key, "config: duplicate key '" + key + "' at " + origin +
                                       ":" + std::to_string(line_no));
        cfg.values_[key] = value;
    }
    return cfg;
}

bool KeyValueConfig::has(const std::string& key) const {
    return values_.count(key) != 0;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
    read_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const char* s = it->second.c_str();
    char* end = nullptr;
    long v = std::strtol(s, &end, 10);
    if (end == s || *end != '\0')
        throw ConfigError(key, "config: key '" + key + "' is not an integer: " +
                                   it->second);
    return v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const char* s = it->second.c_str();
    char* end = nullptr;
    double v = std::strtod(s, &end);
    if (end == s || *end != '\0')
        throw ConfigError(key, "config: key '" + key + "' is not a number: " +
                                   it->second);
    return v;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key,
                                      std::uint64_t fallback) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const char* s = it->second.c_str();
    char* end = nullptr;
    unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0')
        throw ConfigError(key, "config: key '" + key + "' is not an unsigned integer: " +
                                   it->second);
    return static_cast<std::uint64_t>(v);
}

std::vector<std::size_t> KeyValueConfig::get_size_list(const std::string& key) const {
    read_.insert(key);
    auto it = values_.find(key);
    std::vector<std::size_t> out;
    if (it == values_.end()) return out;
    std::istringstream in(it->second);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        cell = trim(cell);
        const char* s = cell.c_str();
        char* end = nullptr;
        unsigned long long v = std::strtoull(s, &end, 10);
        if (cell.empty() || end == s || *end != '\0')
            throw ConfigError(key, "config: key '" + key +
                                       "' has a malformed list entry: " + cell);
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty())
        throw ConfigError(key, "config: key '" + key + "' has an empty list");
    return out;
}

std::vector<std::string> KeyValueConfig::unread_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
        if (!read_.count(k)) out.push_back(k);
    return out;
}

} // namespace fedcast
