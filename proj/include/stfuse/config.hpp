#pragma once

#include "stfuse/core.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace stfuse {

class ConfigError : public InputError {
public:
    using InputError::InputError;
};

/// Flat "key = value" text with optional [section] headers; a key inside a
/// section is addressed as "section.key". '#' and ';' start comments.
class Config {
public:
    explicit Config(std::set<std::string> known = {}) : known_(std::move(known)) {}

    void parse(std::istream& in, const std::string& origin = "<config>") {
        std::string line, section;
        for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const std::string t = trim(strip_comment(line));
            if (t.empty()) continue;
            const std::string where = origin + ":" + std::to_string(lineno);
            if (t.front() == '[') {
                if (t.back() != ']') throw ConfigError(where + ": malformed section header");
                section = trim(t.substr(1, t.size() - 2));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
            std::string key = trim(t.substr(0, eq));
            if (key.empty()) throw ConfigError(where + ": empty key");
            if (!section.empty()) key = section + "." + key;
            set(key, trim(t.substr(eq + 1)), where);
        }
    }

    void load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        parse(in, path);
    }

    /// Later calls win, so flags applied after load() override the file.
    void set(const std::string& key, std::string value, const std::string& where = "<flag>") {
        if (!known_.empty() && !known_.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
        values_[key] = std::move(value);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        double v = 0.0;
        const auto& s = it->second;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError("config: '" + key + "' is not a number: " + s);
        return v;
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        long long v = 0;
        const auto& s = it->second;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError("config: '" + key + "' is not an integer: " + s);
        return v;
    }

    /// Comma separated list; empty entries dropped.
    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        auto it = values_.find(key);
        if (it == values_.end()) return out;
        std::string cur;
        for (char c : it->second + ",") {
            if (c == ',') {
                if (auto v = trim(cur); !v.empty()) out.push_back(v);
                cur.clear();
            } else {
                cur += c;
            }
        }
        return out;
    }

    /// Resolved values, sorted by key.
    void dump(std::ostream& os) const {
        for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string strip_comment(const std::string& s) {
        const auto p = s.find_first_of("#;");
        return p == std::string::npos ? s : s.substr(0, p);
    }
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
    }

    std::set<std::string> known_;
    std::map<std::string, std::string> values_;
};

} // namespace stfuse
