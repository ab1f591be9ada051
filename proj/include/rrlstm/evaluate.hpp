#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "rrlstm/metrics.hpp"
#include "rrlstm/pipeline.hpp"
#include "rrlstm/timeseries.hpp"
#include "rrlstm/trainer.hpp"

namespace rrlstm {

inline constexpr double kEventPeakThreshold = 30.0;     // cms
inline constexpr std::size_t kEventMinSeparation = 384;  // 4 days of 15-minute steps
inline constexpr double kEventBasePercentile = 25.0;

struct EventWindow {
    std::size_t id = 0;
    std::size_t first = 0;  // index into the series, inclusive
    std::size_t last = 0;   // inclusive
    Instant start{};
    Instant end{};
    double peak = 0.0;

    friend bool operator==(const EventWindow&, const EventWindow&) = default;
};

/// Linear-interpolated percentile (0..100) of a sample.
inline double percentile(std::span<const double> v, double pct) {
    if (v.empty()) throw DimensionError("percentile: empty input");
    Vector s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const double pos = pct / 100.0 * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

struct EventOptions {
    double threshold = kEventPeakThreshold;
    std::size_t min_separation = kEventMinSeparation;
    double base_percentile = kEventBasePercentile;
};

/**
 * Flood events in a gap-free discharge series: runs above the base level
 * (a percentile of the series), merged when fewer than min_separation
 * steps apart, kept when the peak reaches the threshold.
 */
inline std::vector<EventWindow> extract_events(std::span<const double> flow, Instant start,
                                               const EventOptions& opt = {}) {
    std::vector<EventWindow> out;
    if (flow.empty()) return out;
    const double base = percentile(flow, opt.base_percentile);
    std::vector<EventWindow> runs;
    std::size_t t = 0;
    while (t < flow.size()) {
        if (!(flow[t] > base)) {
            ++t;
            continue;
        }
        EventWindow w;
        w.first = t;
        while (t < flow.size() && flow[t] > base) ++t;
        w.last = t - 1;
        if (!runs.empty() && w.first - runs.back().last - 1 < opt.min_separation) {
            runs.back().last = w.last;
        } else {
            runs.push_back(w);
        }
    }
    for (auto& w : runs) {
        w.peak = *std::max_element(flow.begin() + static_cast<std::ptrdiff_t>(w.first),
                                   flow.begin() + static_cast<std::ptrdiff_t>(w.last + 1));
        if (w.peak < opt.threshold) continue;
        w.id = out.size();
        w.start = start + kStep * static_cast<std::int64_t>(w.first);
        w.end = start + kStep * static_cast<std::int64_t>(w.last);
        out.push_back(w);
    }
    return out;
}

/// Named window whose rows are left out of the "Test excluding" row.
struct ExclusionWindow {
    std::string name;
    Instant start{};
    Instant end{};  // inclusive
};

struct PredictionRow {
    Instant time{};
    std::string split;
    double observed = 0.0;
    double predicted = 0.0;
};

struct ScoreRow {
    std::string dataset;
    std::size_t n = 0;
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double nse = std::numeric_limits<double>::quiet_NaN();
};

struct EventScore {
    std::size_t id = 0;
    Instant start{};
    Instant end{};
    double peak = 0.0;
    double nse = std::numeric_limits<double>::quiet_NaN();
    double rmse = std::numeric_limits<double>::quiet_NaN();
};

struct EvaluationReport {
    std::vector<ScoreRow> scores;
    std::vector<EventScore> events;
    std::vector<PredictionRow> predictions;
};

inline ScoreRow score_row(const std::string& name, const Vector& pred, const Vector& obs) {
    ScoreRow r;
    r.dataset = name;
    r.n = obs.size();
    if (!obs.empty()) r.rmse = rmse(pred, obs);
    if (obs.size() >= 2) {
        try {
            r.nse = nse(pred, obs);
        } catch (const NumericalError&) {
        }
    }
    return r;
}

/**
 * Training / Validation / Test scores in physical units, an optional
 * "Test excluding ..." row, and per-event scores over test-split events.
 */
inline EvaluationReport evaluate_model(const TrainedModel& model, const DatasetSplit& split,
                                       const std::vector<ExclusionWindow>& exclusions = {},
                                       const EventOptions& events = {}) {
    EvaluationReport rep;
    auto run = [&](const std::string& name, const std::vector<CleanSegment>& segs, bool is_test) {
        Vector pred, obs, pred_kept, obs_kept;
        for (const auto& seg : segs) {
            const Vector p = predict_segment(model, seg);
            const Vector o = seg.column(seg.channel_index(model.target));
            for (std::size_t t = 0; t < seg.length(); ++t) {
                rep.predictions.push_back({seg.time_at(t), name, o[t], p[t]});
                bool excluded = false;
                for (const auto& w : exclusions) excluded = excluded || (seg.time_at(t) >= w.start && seg.time_at(t) <= w.end);
                if (!excluded) {
                    pred_kept.push_back(p[t]);
                    obs_kept.push_back(o[t]);
                }
            }
            pred.insert(pred.end(), p.begin(), p.end());
            obs.insert(obs.end(), o.begin(), o.end());
            if (is_test) {
                for (const auto& ev : extract_events(o, seg.start, events)) {
                    EventScore s;
                    s.id = rep.events.size();
                    s.start = ev.start;
                    s.end = ev.end;
                    s.peak = ev.peak;
                    const auto b = static_cast<std::ptrdiff_t>(ev.first);
                    const auto e = static_cast<std::ptrdiff_t>(ev.last + 1);
                    const Vector ep(p.begin() + b, p.begin() + e), eo(o.begin() + b, o.begin() + e);
                    const ScoreRow r = score_row("event", ep, eo);
                    s.nse = r.nse;
                    s.rmse = r.rmse;
                    rep.events.push_back(s);
                }
            }
        }
        rep.scores.push_back(score_row(name, pred, obs));
        if (is_test && !exclusions.empty()) {
            std::string label = "Test excluding ";
            for (std::size_t i = 0; i < exclusions.size(); ++i) label += (i ? " + " : "") + exclusions[i].name;
            rep.scores.push_back(score_row(label, pred_kept, obs_kept));
        }
    };
    run("Training", split.train, false);
    run("Validation", split.validation, false);
    run("Test", split.test, true);
    return rep;
}

inline void write_scores_csv(std::ostream& out, const EvaluationReport& r) {
    out << "dataset,n,rmse,nse\n";
    for (const auto& s : r.scores) out << s.dataset << ',' << s.n << ',' << format_double(s.rmse) << ',' << format_double(s.nse) << '\n';
}

inline void write_predictions_csv(std::ostream& out, const EvaluationReport& r) {
    out << "timestamp,split,observed,predicted\n";
    for (const auto& p : r.predictions)
        out << format_instant(p.time) << ',' << p.split << ',' << format_double(p.observed) << ','
            << format_double(p.predicted) << '\n';
}

inline void write_events_csv(std::ostream& out, const EvaluationReport& r) {
    out << "event,start,end,peak,nse,rmse\n";
    for (const auto& e : r.events)
        out << e.id << ',' << format_instant(e.start) << ',' << format_instant(e.end) << ',' << format_double(e.peak) << ','
            << format_double(e.nse) << ',' << format_double(e.rmse) << '\n';
}

/// Reads a per-step prediction CSV back into rows.
inline std::vector<PredictionRow> load_predictions_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"timestamp", "split", "observed", "predicted"})
        throw DataError("predictions csv: unexpected header");
    std::vector<PredictionRow> rows;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        PredictionRow r;
        if (f.size() != 4 || !parse_instant(f[0], r.time) || !parse_double(f[2], r.observed) || !parse_double(f[3], r.predicted))
            throw DataError("predictions csv: bad row " + std::to_string(n));
        r.split = f[1];
        rows.push_back(r);
    }
    return rows;
}

}  // namespace rrlstm
