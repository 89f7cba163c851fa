#pragma once

#include <map>
#include <string>
#include <vector>

namespace holo {

/// Plain-text key=value configuration file. Lines starting with '#' and blank
/// lines are ignored; values keep everything after the first '='.
class KeyValueConfig {
public:
    KeyValueConfig() = default;
    static KeyValueConfig load(const std::string& path);
    static KeyValueConfig parse(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Comma-separated list of reals.
    std::vector<double> get_list(const std::string& key,
                                 const std::vector<double>& fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace holo
