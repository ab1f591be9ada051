#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <vector>

#include "rrlstm/tensor.hpp"

namespace rrlstm {

using Instant = std::chrono::sys_time<std::chrono::minutes>;
inline constexpr std::chrono::minutes kStep{15};
inline constexpr int kStepsPerDay = 96;
inline constexpr const char* kMissingToken = "NA";

inline Instant make_instant(int year, unsigned month, unsigned day, int hour = 0, int minute = 0) {
    using namespace std::chrono;
    return Instant{sys_days{std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}}} +
           hours{hour} + minutes{minute};
}

inline int year_of(Instant t) {
    using namespace std::chrono;
    return static_cast<int>(year_month_day{floor<days>(t)}.year());
}

inline Instant year_start(int year) { return make_instant(year, 1, 1); }

inline bool on_grid(Instant t) { return t.time_since_epoch().count() % kStep.count() == 0; }

/// "YYYY-MM-DDTHH:MM" (UTC, no offset).
inline std::string format_instant(Instant t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const auto mins = (t - day).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long long>(mins / 60), static_cast<long long>(mins % 60));
    return buf;
}

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    auto r = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return r.ec == std::errc{};
}

}  // namespace detail

/**
 * Parses an ISO-8601 instant: YYYY-MM-DD[T| ]HH:MM[:SS][Z]. Seconds are
 * accepted and kept so the grid check can reject them.
 * Returns false on malformed input.
 */
inline bool parse_instant(std::string_view s, Instant& out, int* seconds = nullptr) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
    if (s.size() != 16 && s.size() != 19) return false;
    if (!detail::parse_fixed_int(s, 0, 4, y) || s[4] != '-' || !detail::parse_fixed_int(s, 5, 2, mo) || s[7] != '-' ||
        !detail::parse_fixed_int(s, 8, 2, d) || (s[10] != 'T' && s[10] != ' ') ||
        !detail::parse_fixed_int(s, 11, 2, h) || s[13] != ':' || !detail::parse_fixed_int(s, 14, 2, mi)) {
        return false;
    }
    if (s.size() == 19 && (s[16] != ':' || !detail::parse_fixed_int(s, 17, 2, sec))) return false;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 59) return false;
    out = make_instant(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi);
    if (seconds) *seconds = sec;
    return true;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s == "inf" || s == "+inf") {
        out = HUGE_VAL;
        return true;
    }
    if (s == "-inf") {
        out = -HUGE_VAL;
        return true;
    }
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc{} && r.ptr == s.data() + s.size();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
    }
    return out;
}

/**
 * Multichannel series on a strict 15-minute grid with an explicit
 * missing mask. Values under a set mask bit are meaningless (kept at 0).
 */
struct TimeSeriesFrame {
    Instant start{};
    std::vector<std::string> channels;
    Matrix values;                    // rows x channels
    std::vector<std::uint8_t> missing;  // rows x channels, 1 = missing

    std::size_t rows() const { return values.rows; }
    std::size_t width() const { return channels.size(); }
    Instant time_at(std::size_t row) const { return start + kStep * static_cast<std::int64_t>(row); }
    bool is_missing(std::size_t r, std::size_t c) const { return missing[r * width() + c] != 0; }

    std::size_t channel_index(const std::string& name) const {
        auto it = std::find(channels.begin(), channels.end(), name);
        if (it == channels.end()) throw DataError("unknown channel '" + name + "'");
        return static_cast<std::size_t>(it - channels.begin());
    }
    bool has_channel(const std::string& name) const {
        return std::find(channels.begin(), channels.end(), name) != channels.end();
    }

    TimeSeriesFrame() = default;
    TimeSeriesFrame(Instant s, std::vector<std::string> names, std::size_t n_rows)
        : start(s), channels(std::move(names)), values(n_rows, channels.size()), missing(n_rows * channels.size(), 0) {}

    void set(std::size_t r, std::size_t c, double v) {
        values(r, c) = v;
        missing[r * width() + c] = 0;
    }
    void set_missing(std::size_t r, std::size_t c) {
        values(r, c) = 0.0;
        missing[r * width() + c] = 1;
    }

    /// Checks invariants; target_channel, when non-empty, is exempt from the non-negative rule.
    void validate(const std::string& target_channel = {}) const {
        if (!on_grid(start)) throw DataError("frame start " + format_instant(start) + " is off the 15-minute grid");
        std::unordered_set<std::string> seen;
        for (const auto& n : channels) {
            if (n.empty()) throw DataError("empty channel name");
            if (!seen.insert(n).second) throw DataError("duplicate channel name '" + n + "'");
        }
        if (values.cols != width() || missing.size() != values.rows * width())
            throw DataError("frame storage does not match channel count");
        for (std::size_t c = 0; c < width(); ++c) {
            if (channels[c] == target_channel) continue;
            for (std::size_t r = 0; r < rows(); ++r) {
                if (!is_missing(r, c) && values(r, c) < 0.0)
                    throw DataError("negative rainfall in channel '" + channels[c] + "' at row " + std::to_string(r));
            }
        }
    }
};

/**
 * Reads a frame from CSV. Header: timestamp column then channel names.
 * Empty fields and "NA" are missing. Rows must be strictly increasing on
 * the 15-minute grid; skipped grid points are inserted as fully missing rows.
 */
inline TimeSeriesFrame load_csv(std::istream& in, const std::string& target_channel = {}) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("csv: empty input");
    auto header = split_csv_line(line);
    if (header.size() < 2) throw DataError("csv: header needs a timestamp column and at least one channel");
    std::vector<std::string> names(header.begin() + 1, header.end());

    std::vector<Instant> times;
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<std::uint8_t>> masks;
    std::size_t row_index = 0;
    while (std::getline(in, line)) {
        ++row_index;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        const std::string where = "csv row " + std::to_string(row_index);
        if (fields.size() != header.size())
            throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        Instant t;
        int sec = 0;
        if (!parse_instant(fields[0], t, &sec)) throw DataError(where + ": malformed timestamp '" + fields[0] + "'");
        if (sec != 0 || !on_grid(t)) throw DataError(where + ": timestamp " + fields[0] + " is off the 15-minute grid");
        if (!times.empty()) {
            if (t == times.back()) throw DataError(where + ": duplicate timestamp " + fields[0]);
            if (t < times.back()) throw DataError(where + ": timestamp " + fields[0] + " is out of order");
        }
        std::vector<double> vals(names.size(), 0.0);
        std::vector<std::uint8_t> mask(names.size(), 0);
        for (std::size_t c = 0; c < names.size(); ++c) {
            const auto& f = fields[c + 1];
            if (f.empty() || f == kMissingToken) {
                mask[c] = 1;
            } else if (!parse_double(f, vals[c]) || !std::isfinite(vals[c])) {
                throw DataError(where + ": bad value '" + f + "' in channel '" + names[c] + "'");
            }
        }
        times.push_back(t);
        rows.push_back(std::move(vals));
        masks.push_back(std::move(mask));
    }
    if (times.empty()) throw DataError("csv: no data rows");

    const auto n_rows = static_cast<std::size_t>((times.back() - times.front()) / kStep) + 1;
    TimeSeriesFrame frame(times.front(), names, n_rows);
    std::fill(frame.missing.begin(), frame.missing.end(), std::uint8_t{1});
    for (std::size_t i = 0; i < times.size(); ++i) {
        const auto r = static_cast<std::size_t>((times[i] - times.front()) / kStep);
        for (std::size_t c = 0; c < names.size(); ++c) {
            if (masks[i][c]) {
                frame.set_missing(r, c);
            } else {
                frame.set(r, c, rows[i][c]);
            }
        }
    }
    frame.validate(target_channel);
    return frame;
}

inline TimeSeriesFrame load_csv(const std::string& path, const std::string& target_channel = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return load_csv(in, target_channel);
}

inline void write_csv(std::ostream& out, const TimeSeriesFrame& frame) {
    out << "timestamp";
    for (const auto& n : frame.channels) out << ',' << n;
    out << '\n';
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        out << format_instant(frame.time_at(r));
        for (std::size_t c = 0; c < frame.width(); ++c) {
            out << ',' << (frame.is_missing(r, c) ? std::string(kMissingToken) : format_double(frame.values(r, c)));
        }
        out << '\n';
    }
}

inline void write_csv(const std::string& path, const TimeSeriesFrame& frame) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_csv(out, frame);
}

}  // namespace rrlstm
