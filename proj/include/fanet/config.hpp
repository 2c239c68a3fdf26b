#pragma once

#include <map>
#include <string>
#include <vector>

#include "fanet/common.hpp"

namespace fanet {

// Flat key=value configuration ("train.lr=1e-4"). '#' starts a comment, blank
// lines are skipped, later assignments win. Typed getters validate on access
// and name the offending key in their error.
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text, const std::string& origin = "<inline>");

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;

    std::string serialize() const;
    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    void parse_line(const std::string& line, int lineno, const std::string& origin);

    std::map<std::string, std::string> values_;
};

}  // namespace fanet
