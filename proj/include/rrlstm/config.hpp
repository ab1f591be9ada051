#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "rrlstm/tensor.hpp"
#include "rrlstm/timeseries.hpp"

namespace rrlstm {

/// Bad command-line or configuration input.
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/**
 * Flat "key = value" file. '#' starts a comment; blank lines are ignored.
 * Keys are consumed as they are read so leftovers can be reported.
 */
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(std::istream& in, const std::string& origin = "config") {
        KeyValueConfig cfg;
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw UsageError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
            auto trim = [](std::string s) {
                const auto l = s.find_first_not_of(" \t\r");
                const auto r = s.find_last_not_of(" \t\r");
                return l == std::string::npos ? std::string{} : s.substr(l, r - l + 1);
            };
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw UsageError(origin + ":" + std::to_string(n) + ": empty key");
            if (cfg.values_.count(key)) throw UsageError(origin + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
            cfg.values_[key] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    static KeyValueConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open config '" + path + "'");
        return parse(in, path);
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string take_string(const std::string& key, const std::string& fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::string v = it->second;
        values_.erase(it);
        return v;
    }

    double take_double(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const std::string s = take_string(key, {});
        double v = 0.0;
        if (!parse_double(s, v)) throw UsageError("config key '" + key + "': not a number: '" + s + "'");
        return v;
    }

    long long take_int(const std::string& key, long long fallback) {
        if (!has(key)) return fallback;
        const std::string s = take_string(key, {});
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size() || s.empty()) throw UsageError("config key '" + key + "': not an integer: '" + s + "'");
        return v;
    }

    bool take_bool(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const std::string s = take_string(key, {});
        if (s == "true" || s == "on" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "off" || s == "0" || s == "no") return false;
        throw UsageError("config key '" + key + "': not a boolean: '" + s + "'");
    }

    /// Throws if any key was never consumed.
    void reject_unknown() const {
        if (values_.empty()) return;
        std::string keys;
        for (const auto& [k, v] : values_) keys += (keys.empty() ? "" : ", ") + k;
        throw UsageError("unknown config key(s): " + keys);
    }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace rrlstm
