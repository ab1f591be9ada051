#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "rrlstm/tensor.hpp"
#include "rrlstm/timeseries.hpp"

namespace rrlstm {

inline constexpr std::size_t kDefaultMaxGapSteps = 6;  // 90 minutes
inline constexpr std::size_t kDefaultChunkLength = 2048;
inline constexpr double kScaleCeiling = 0.9;

/// Linearly interpolated run of one channel, in source-frame rows [first_row, last_row].
struct ImputedRange {
    std::string channel;
    std::size_t first_row = 0;
    std::size_t last_row = 0;

    friend bool operator==(const ImputedRange&, const ImputedRange&) = default;
};

/**
 * Gap-free window of a frame. Chunks produced by chunk() are also
 * CleanSegments; source_segment/offset_in_source locate them inside the
 * segment they were cut from.
 */
struct CleanSegment {
    std::size_t id = 0;
    Instant start{};
    std::vector<std::string> channels;
    Matrix values;  // rows x channels
    std::size_t origin_row = 0;
    std::size_t source_segment = 0;
    std::size_t offset_in_source = 0;
    std::vector<ImputedRange> imputed;

    std::size_t length() const { return values.rows; }
    Instant time_at(std::size_t r) const { return start + kStep * static_cast<std::int64_t>(r); }
    Instant end() const { return time_at(length() - 1); }

    std::size_t channel_index(const std::string& name) const {
        auto it = std::find(channels.begin(), channels.end(), name);
        if (it == channels.end()) throw DataError("segment " + std::to_string(id) + " lacks channel '" + name + "'");
        return static_cast<std::size_t>(it - channels.begin());
    }

    /// Rows [begin, begin+count) as a new segment with adjusted origin.
    CleanSegment slice(std::size_t begin, std::size_t count) const {
        CleanSegment s;
        s.id = id;
        s.start = time_at(begin);
        s.channels = channels;
        s.values = Matrix(count, channels.size());
        std::copy_n(values.data.begin() + static_cast<std::ptrdiff_t>(begin * channels.size()),
                    count * channels.size(), s.values.data.begin());
        s.origin_row = origin_row + begin;
        s.source_segment = source_segment;
        s.offset_in_source = offset_in_source + begin;
        for (const auto& r : imputed) {
            const std::size_t lo = std::max(r.first_row, s.origin_row);
            const std::size_t hi = std::min(r.last_row, s.origin_row + count - 1);
            if (lo <= hi) s.imputed.push_back({r.channel, lo, hi});
        }
        return s;
    }

    /// Column values in row order.
    Vector column(std::size_t c) const {
        Vector out(length());
        for (std::size_t r = 0; r < length(); ++r) out[r] = values(r, c);
        return out;
    }
};

struct SplitResult {
    std::vector<CleanSegment> segments;
    std::vector<ImputedRange> imputed;
    std::vector<std::string> warnings;
};

/**
 * Fills missing runs of at most max_gap_steps by linear interpolation
 * between the bounding present values and splits the frame (all channels)
 * at longer runs. Leading and trailing missing runs are trimmed.
 */
inline SplitResult impute_and_split(const TimeSeriesFrame& frame, std::size_t max_gap_steps = kDefaultMaxGapSteps) {
    SplitResult out;
    const std::size_t n = frame.rows();
    const std::size_t w = frame.width();
    for (std::size_t c = 0; c < w; ++c) {
        bool any = false;
        for (std::size_t r = 0; r < n && !any; ++r) any = !frame.is_missing(r, c);
        if (!any) {
            out.warnings.push_back("channel '" + frame.channels[c] + "' is entirely missing; frame yields no segments");
            return out;
        }
    }

    Matrix filled = frame.values;
    std::vector<std::uint8_t> dropped(n, 0);
    for (std::size_t c = 0; c < w; ++c) {
        std::size_t r = 0;
        while (r < n) {
            if (!frame.is_missing(r, c)) {
                ++r;
                continue;
            }
            const std::size_t a = r;
            while (r < n && frame.is_missing(r, c)) ++r;
            const std::size_t b = r - 1;  // inclusive
            const std::size_t len = b - a + 1;
            if (a == 0 || b == n - 1 || len > max_gap_steps) {
                std::fill(dropped.begin() + static_cast<std::ptrdiff_t>(a),
                          dropped.begin() + static_cast<std::ptrdiff_t>(b + 1), std::uint8_t{1});
                continue;
            }
            const double left = frame.values(a - 1, c);
            const double right = frame.values(b + 1, c);
            const double span = static_cast<double>(len + 1);
            for (std::size_t k = a; k <= b; ++k) {
                const double frac = static_cast<double>(k - a + 1) / span;
                filled(k, c) = left + (right - left) * frac;
            }
            out.imputed.push_back({frame.channels[c], a, b});
        }
    }

    std::size_t r = 0;
    while (r < n) {
        if (dropped[r]) {
            ++r;
            continue;
        }
        const std::size_t a = r;
        while (r < n && !dropped[r]) ++r;
        const std::size_t len = r - a;
        if (len < 2) continue;
        CleanSegment s;
        s.id = out.segments.size();
        s.start = frame.time_at(a);
        s.channels = frame.channels;
        s.values = Matrix(len, w);
        std::copy_n(filled.data.begin() + static_cast<std::ptrdiff_t>(a * w), len * w, s.values.data.begin());
        s.origin_row = a;
        s.source_segment = s.id;
        for (const auto& imp : out.imputed) {
            if (imp.first_row >= a && imp.last_row < r) s.imputed.push_back(imp);
        }
        out.segments.push_back(std::move(s));
    }
    return out;
}

/// Frame with short gaps filled (missing mask cleared there); long gaps stay missing.
inline TimeSeriesFrame apply_imputation(const TimeSeriesFrame& frame, const SplitResult& split) {
    TimeSeriesFrame out = frame;
    for (const auto& seg : split.segments) {
        for (std::size_t r = 0; r < seg.length(); ++r) {
            for (std::size_t c = 0; c < seg.channels.size(); ++c) out.set(seg.origin_row + r, c, seg.values(r, c));
        }
    }
    return out;
}

/**
 * Partitions every segment into consecutive chunks of at most max_len
 * rows. Chunk ids are sequential; source_segment names the parent.
 */
inline std::vector<CleanSegment> chunk(const std::vector<CleanSegment>& segments,
                                       std::size_t max_len = kDefaultChunkLength) {
    if (max_len < 2) throw std::invalid_argument("chunk: max_len must be >= 2");
    std::vector<CleanSegment> out;
    for (const auto& seg : segments) {
        for (std::size_t b = 0; b < seg.length(); b += max_len) {
            CleanSegment c = seg.slice(b, std::min(max_len, seg.length() - b));
            c.source_segment = seg.id;
            c.offset_in_source = b;
            c.id = out.size();
            out.push_back(std::move(c));
        }
    }
    return out;
}

/// Inverse of chunk(): concatenates chunks per source segment (in order of first appearance).
inline std::vector<CleanSegment> restitch(const std::vector<CleanSegment>& chunks) {
    std::vector<CleanSegment> out;
    std::map<std::size_t, std::size_t> index;
    for (const auto& c : chunks) {
        auto it = index.find(c.source_segment);
        if (it == index.end()) {
            if (c.offset_in_source != 0) throw DataError("restitch: first chunk of a segment must start at offset 0");
            CleanSegment s = c;
            s.id = c.source_segment;
            s.offset_in_source = 0;
            index.emplace(c.source_segment, out.size());
            out.push_back(std::move(s));
            continue;
        }
        CleanSegment& s = out[it->second];
        if (c.offset_in_source != s.length() || c.channels != s.channels)
            throw DataError("restitch: chunk does not continue its segment");
        s.values.data.insert(s.values.data.end(), c.values.data.begin(), c.values.data.end());
        s.values.rows += c.length();
        for (const auto& r : c.imputed) {
            if (!s.imputed.empty() && s.imputed.back().channel == r.channel &&
                s.imputed.back().last_row + 1 == r.first_row) {
                s.imputed.back().last_row = r.last_row;
            } else {
                s.imputed.push_back(r);
            }
        }
    }
    return out;
}

/// Per-channel min/max affine map onto [0, ceiling].
struct ScalingParams {
    std::vector<std::string> channels;
    Vector min;
    Vector max;
    double ceiling = kScaleCeiling;

    std::size_t index(const std::string& name) const {
        auto it = std::find(channels.begin(), channels.end(), name);
        if (it == channels.end()) throw DataError("scaler has no channel '" + name + "'");
        return static_cast<std::size_t>(it - channels.begin());
    }

    double apply(std::size_t c, double x) const {
        const double range = max[c] - min[c];
        if (range <= 0.0) return 0.0;
        return ceiling * ((x - min[c]) / range);
    }

    double invert(std::size_t c, double y) const {
        const double range = max[c] - min[c];
        if (range <= 0.0) return min[c];
        return min[c] + y * range / ceiling;
    }

    friend bool operator==(const ScalingParams&, const ScalingParams&) = default;
};

/// Fits per-channel extrema over the given (training) segments.
inline ScalingParams fit_scaler(const std::vector<CleanSegment>& segments) {
    std::size_t total = 0;
    for (const auto& s : segments) total += s.length();
    if (segments.empty() || total == 0) throw DataError("fit_scaler: empty fitting set");
    ScalingParams sp;
    sp.channels = segments.front().channels;
    const std::size_t w = sp.channels.size();
    sp.min.assign(w, std::numeric_limits<double>::infinity());
    sp.max.assign(w, -std::numeric_limits<double>::infinity());
    for (const auto& s : segments) {
        if (s.channels != sp.channels) throw DataError("fit_scaler: segments disagree on channel set");
        for (std::size_t r = 0; r < s.length(); ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                sp.min[c] = std::min(sp.min[c], s.values(r, c));
                sp.max[c] = std::max(sp.max[c], s.values(r, c));
            }
        }
    }
    return sp;
}

/// Scaled copy of a segment. Values outside the fitted range are not clipped.
inline CleanSegment apply_scaler(const ScalingParams& sp, const CleanSegment& seg) {
    CleanSegment out = seg;
    std::vector<std::size_t> map(seg.channels.size());
    for (std::size_t c = 0; c < seg.channels.size(); ++c) map[c] = sp.index(seg.channels[c]);
    for (std::size_t r = 0; r < seg.length(); ++r) {
        for (std::size_t c = 0; c < seg.channels.size(); ++c) out.values(r, c) = sp.apply(map[c], seg.values(r, c));
    }
    return out;
}

inline CleanSegment invert_scaler(const ScalingParams& sp, const CleanSegment& seg) {
    CleanSegment out = seg;
    std::vector<std::size_t> map(seg.channels.size());
    for (std::size_t c = 0; c < seg.channels.size(); ++c) map[c] = sp.index(seg.channels[c]);
    for (std::size_t r = 0; r < seg.length(); ++r) {
        for (std::size_t c = 0; c < seg.channels.size(); ++c) out.values(r, c) = sp.invert(map[c], seg.values(r, c));
    }
    return out;
}

struct DatasetSplit {
    std::vector<CleanSegment> train;
    std::vector<CleanSegment> validation;
    std::vector<CleanSegment> test;
    std::vector<std::string> warnings;
};

/**
 * Assigns rows by calendar year: <= train_end_year to training,
 * val_year to validation, test_year to test. Segments crossing a boundary
 * are cut there; rows in other years are dropped with a warning.
 */
inline DatasetSplit split_by_year(const std::vector<CleanSegment>& segments, int train_end_year = 2015,
                                  int val_year = 2016, int test_year = 2017) {
    if (!(train_end_year < val_year && val_year < test_year))
        throw std::invalid_argument("split_by_year: years must satisfy train_end < validation < test");
    DatasetSplit out;
    auto category = [&](int y) {
        if (y <= train_end_year) return 0;
        if (y == val_year) return 1;
        if (y == test_year) return 2;
        return 3;
    };
    std::size_t dropped = 0;
    for (const auto& seg : segments) {
        std::size_t r = 0;
        while (r < seg.length()) {
            const int cat = category(year_of(seg.time_at(r)));
            const std::size_t a = r;
            while (r < seg.length() && category(year_of(seg.time_at(r))) == cat) ++r;
            if (cat == 3) {
                dropped += r - a;
                continue;
            }
            CleanSegment piece = seg.slice(a, r - a);
            piece.source_segment = seg.id;
            auto& dest = cat == 0 ? out.train : cat == 1 ? out.validation : out.test;
            piece.id = dest.size();
            dest.push_back(std::move(piece));
        }
    }
    if (dropped > 0) out.warnings.push_back(std::to_string(dropped) + " rows fall outside the split years and were dropped");
    if (out.train.empty()) out.warnings.push_back("training split is empty");
    if (out.validation.empty()) out.warnings.push_back("validation split is empty");
    if (out.test.empty()) out.warnings.push_back("test split is empty");
    return out;
}

}  // namespace rrlstm
