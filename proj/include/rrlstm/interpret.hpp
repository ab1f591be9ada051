#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rrlstm/nn.hpp"
#include "rrlstm/stats.hpp"
#include "rrlstm/timeseries.hpp"
#include "rrlstm/trainer.hpp"

namespace rrlstm {

struct SweepEntry {
    std::string gage;
    double error = std::numeric_limits<double>::infinity();
    bool diverged = false;
    std::size_t best_epoch = 0;
    std::string reason;
};

/// Single-gage protocol: no validation, no regularization, train and validation years merged.
inline RunConfig sweep_config(RunConfig base) {
    base.validation = false;
    base.regularization = false;
    return base;
}

/**
 * Trains one d=1 model per gage and records its minimum training error
 * over epochs. Runs up to `jobs` trainings concurrently; each gage gets a
 * seed derived from (config seed, gage name). Divergence yields e = +inf.
 */
inline std::vector<SweepEntry> gage_sweep(const RunConfig& config, const DatasetSplit& split,
                                          const std::vector<std::string>& gages, std::size_t jobs = 1,
                                          const std::function<void(const SweepEntry&)>& on_done = {}) {
    DatasetSplit fit;
    fit.train = split.train;
    fit.train.insert(fit.train.end(), split.validation.begin(), split.validation.end());
    const RunConfig base = sweep_config(config);

    std::vector<SweepEntry> out(gages.size());
    std::atomic<std::size_t> next{0};
    std::mutex report_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (std::size_t i = next++; i < gages.size(); i = next++) {
            SweepEntry& e = out[i];
            e.gage = gages[i];
            RunConfig rc = base;
            rc.seed = derive_seed(config.seed, gages[i]);
            try {
                const TrainingResult r = train_model(rc, fit, {gages[i]});
                e.error = r.report.best_training_loss;
                e.best_epoch = r.report.best_epoch;
            } catch (const NumericalError& err) {
                e.error = std::numeric_limits<double>::infinity();
                e.diverged = true;
                e.reason = err.what();
            } catch (...) {
                std::lock_guard lock(report_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
            if (on_done) {
                std::lock_guard lock(report_mutex);
                on_done(e);
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, gages.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

/**
 * First-layer input-hidden weights of one gage, grouped per hidden unit:
 * [W_ii,1, W_if,1, W_ig,1, W_io,1, ..., W_ii,p, W_if,p, W_ig,p, W_io,p].
 */
inline Vector flatten_first_layer_weights(const NetworkParams& net, std::size_t gage_index) {
    if (gage_index >= net.input_size())
        throw std::out_of_range("flatten_first_layer_weights: gage index " + std::to_string(gage_index) + " out of range");
    const std::size_t p = net.hidden_size();
    const Matrix& w = net.layer1.input_hidden_weights;
    Vector out;
    out.reserve(4 * p);
    for (std::size_t k = 0; k < p; ++k) {
        for (std::size_t gate = 0; gate < 4; ++gate) out.push_back(w(gate * p + k, gage_index));
    }
    return out;
}

struct WeightNorms {
    double l1 = 0.0;
    double l2 = 0.0;
    double linf = 0.0;
};

inline WeightNorms weight_norms(std::span<const double> w) {
    WeightNorms n;
    double sq = 0.0;
    for (double x : w) {
        n.l1 += std::abs(x);
        sq += x * x;
        n.linf = std::max(n.linf, std::abs(x));
    }
    n.l2 = std::sqrt(sq);
    return n;
}

/// The k gages with smallest error, ascending; equal errors ordered by name.
inline std::vector<std::string> select_top_k(const std::map<std::string, double>& errors, std::size_t k) {
    if (k > errors.size())
        throw std::invalid_argument("select_top_k: k = " + std::to_string(k) + " exceeds " +
                                    std::to_string(errors.size()) + " gages");
    std::vector<std::pair<std::string, double>> v(errors.begin(), errors.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(v[i].first);
    return out;
}

/// 1-based rank of every gage by error (ties by name).
inline std::map<std::string, std::size_t> rank_by_error(const std::map<std::string, double>& errors) {
    std::map<std::string, std::size_t> out;
    const auto order = select_top_k(errors, errors.size());
    for (std::size_t i = 0; i < order.size(); ++i) out[order[i]] = i + 1;
    return out;
}

struct GageImportanceRow {
    std::string gage;
    double error = 0.0;
    WeightNorms norms;
    std::size_t rank = 0;
    std::optional<double> distance;
};

struct CorrelationRow {
    std::string parameter;
    Correlation pearson;
    Correlation spearman;
    std::size_t n = 0;
};

struct GageImportanceTable {
    std::vector<GageImportanceRow> rows;
    std::vector<CorrelationRow> correlations;
};

/**
 * Norm triple of each model gage next to its sweep error, plus Pearson and
 * Spearman of every norm (and of distance, when known) against the error.
 * Gages with infinite error are left out of the correlations.
 */
inline GageImportanceTable importance_table(const TrainedModel& model, const std::map<std::string, double>& errors,
                                            const std::map<std::string, double>& distances = {}) {
    GageImportanceTable table;
    std::map<std::string, double> model_errors;
    for (const auto& g : model.gages) {
        auto it = errors.find(g);
        if (it == errors.end()) throw DataError("error table has no entry for gage '" + g + "'");
        model_errors[g] = it->second;
    }
    const auto ranks = rank_by_error(model_errors);
    for (std::size_t j = 0; j < model.gages.size(); ++j) {
        GageImportanceRow row;
        row.gage = model.gages[j];
        row.error = model_errors[row.gage];
        row.norms = weight_norms(flatten_first_layer_weights(model.net, j));
        row.rank = ranks.at(row.gage);
        if (auto d = distances.find(row.gage); d != distances.end()) row.distance = d->second;
        table.rows.push_back(row);
    }

    Vector e, l1, l2, linf, dist_e, dist;
    for (const auto& r : table.rows) {
        if (!std::isfinite(r.error)) continue;
        e.push_back(r.error);
        l1.push_back(r.norms.l1);
        l2.push_back(r.norms.l2);
        linf.push_back(r.norms.linf);
        if (r.distance) {
            dist.push_back(*r.distance);
            dist_e.push_back(r.error);
        }
    }
    auto add = [&](const std::string& name, const Vector& x, const Vector& y) {
        if (x.size() < 3) return;
        try {
            table.correlations.push_back({name, pearson(x, y), spearman(x, y), x.size()});
        } catch (const NumericalError&) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            table.correlations.push_back({name, {nan, nan}, {nan, nan}, x.size()});
        }
    };
    add("l1", l1, e);
    add("l2", l2, e);
    add("linf", linf, e);
    if (!dist.empty() && dist.size() == e.size()) add("distance", dist, dist_e);
    return table;
}

/// Straight-line distance of every gage to the row named "outlet".
inline std::map<std::string, double> load_distances(const std::string& coords_csv) {
    std::ifstream in(coords_csv);
    if (!in) throw DataError("cannot open '" + coords_csv + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError(coords_csv + ": empty");
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "gage" || header[1] != "x" || header[2] != "y")
        throw DataError(coords_csv + ": expected header gage,x,y");
    std::map<std::string, std::pair<double, double>> xy;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        double x = 0, y = 0;
        if (f.size() < 3 || !parse_double(f[1], x) || !parse_double(f[2], y))
            throw DataError(coords_csv + ": bad row " + std::to_string(n));
        xy[f[0]] = {x, y};
    }
    auto outlet = xy.find("outlet");
    if (outlet == xy.end()) throw DataError(coords_csv + ": no 'outlet' row");
    std::map<std::string, double> out;
    for (const auto& [g, p] : xy) {
        if (g == "outlet") continue;
        out[g] = std::hypot(p.first - outlet->second.first, p.second - outlet->second.second);
    }
    return out;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepEntry>& entries) {
    std::map<std::string, double> errs;
    for (const auto& e : entries) errs[e.gage] = e.error;
    const auto ranks = rank_by_error(errs);
    out << "gage,e,rank,best_epoch,diverged\n";
    for (const auto& e : entries) {
        out << e.gage << ',' << format_double(e.error) << ',' << ranks.at(e.gage) << ',' << e.best_epoch << ','
            << (e.diverged ? 1 : 0) << '\n';
    }
}

inline void write_importance_csv(std::ostream& out, const GageImportanceTable& t) {
    const bool with_distance = !t.rows.empty() && std::all_of(t.rows.begin(), t.rows.end(), [](const auto& r) {
        return r.distance.has_value();
    });
    out << "gage,e,l1,l2,linf,rank" << (with_distance ? ",distance" : "") << '\n';
    for (const auto& r : t.rows) {
        out << r.gage << ',' << format_double(r.error) << ',' << format_double(r.norms.l1) << ','
            << format_double(r.norms.l2) << ',' << format_double(r.norms.linf) << ',' << r.rank;
        if (with_distance) out << ',' << format_double(*r.distance);
        out << '\n';
    }
}

inline void write_correlation_csv(std::ostream& out, const GageImportanceTable& t) {
    out << "parameter,n,pearson_r,pearson_p,spearman_rho,spearman_p\n";
    for (const auto& c : t.correlations) {
        out << c.parameter << ',' << c.n << ',' << format_double(c.pearson.coefficient) << ','
            << format_double(c.pearson.p_value) << ',' << format_double(c.spearman.coefficient) << ','
            << format_double(c.spearman.p_value) << '\n';
    }
}

/// Reads the "gage" and "e" columns of any CSV table that has them.
inline std::map<std::string, double> load_error_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty");
    const auto header = split_csv_line(line);
    const auto gi = std::find(header.begin(), header.end(), "gage");
    const auto ei = std::find(header.begin(), header.end(), "e");
    if (gi == header.end() || ei == header.end()) throw DataError(path + ": needs 'gage' and 'e' columns");
    const auto g_col = static_cast<std::size_t>(gi - header.begin());
    const auto e_col = static_cast<std::size_t>(ei - header.begin());
    std::map<std::string, double> out;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        double e = 0.0;
        if (f.size() != header.size() || !parse_double(f[e_col], e) || std::isnan(e) || e < 0.0)
            throw DataError(path + ": bad row " + std::to_string(n));
        if (!out.emplace(f[g_col], e).second) throw DataError(path + ": duplicate gage '" + f[g_col] + "'");
    }
    return out;
}

}  // namespace rrlstm
