#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace harmony {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// Line-based `key=value` configuration. Blank lines and `#` comments are
/// ignored; later keys override earlier ones. Serialization is sorted by key.
class KeyValueConfig {
public:
    static KeyValueConfig load(const std::filesystem::path& path);
    static KeyValueConfig parse(const std::string& text);

    void save(const std::filesystem::path& path) const;
    std::string str() const;

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void merge(const KeyValueConfig& overrides);

    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    unsigned long long get_uint(const std::string& key, unsigned long long fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace harmony
