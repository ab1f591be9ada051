#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rrlstm/config.hpp"
#include "rrlstm/metrics.hpp"
#include "rrlstm/nn.hpp"
#include "rrlstm/optim.hpp"
#include "rrlstm/pipeline.hpp"
#include "rrlstm/timeseries.hpp"

namespace rrlstm {

enum class ValidationMetric { NSE, MSE };

inline const char* to_string(ValidationMetric m) { return m == ValidationMetric::NSE ? "nse" : "mse"; }

struct RunConfig {
    int epochs = 200;
    double learning_rate = 1e-4;
    double l2 = 1e-6;
    std::size_t hidden_size = 10;
    std::uint64_t seed = 1;
    std::size_t chunk_length = kDefaultChunkLength;
    ValidationMetric validation_metric = ValidationMetric::NSE;
    bool regularization = true;
    bool validation = true;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double clip_norm = 0.0;  // 0 disables clipping
    CandidateActivation candidate = CandidateActivation::Tanh;
    std::string target = "discharge";
    int train_end_year = 2015;
    int validation_year = 2016;
    int test_year = 2017;

    void validate() const {
        if (epochs < 1) throw UsageError("epochs must be >= 1");
        if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be > 0");
        if (!(l2 >= 0.0)) throw UsageError("l2 must be >= 0");
        if (hidden_size < 1) throw UsageError("hidden_size must be >= 1");
        if (chunk_length < 2) throw UsageError("chunk_length must be >= 2");
        if (clip_norm < 0.0) throw UsageError("clip_norm must be >= 0");
    }

    AdamHyperparams adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }

    static RunConfig from(KeyValueConfig kv) {
        RunConfig c;
        c.epochs = static_cast<int>(kv.take_int("epochs", c.epochs));
        c.learning_rate = kv.take_double("learning_rate", c.learning_rate);
        c.l2 = kv.take_double("l2", c.l2);
        c.hidden_size = static_cast<std::size_t>(kv.take_int("hidden_size", static_cast<long long>(c.hidden_size)));
        c.seed = static_cast<std::uint64_t>(kv.take_int("seed", static_cast<long long>(c.seed)));
        c.chunk_length = static_cast<std::size_t>(kv.take_int("chunk_length", static_cast<long long>(c.chunk_length)));
        const std::string metric = kv.take_string("validation_metric", to_string(c.validation_metric));
        if (metric == "nse") {
            c.validation_metric = ValidationMetric::NSE;
        } else if (metric == "mse") {
            c.validation_metric = ValidationMetric::MSE;
        } else {
            throw UsageError("validation_metric must be nse|mse");
        }
        c.regularization = kv.take_bool("regularization", c.regularization);
        c.validation = kv.take_bool("validation", c.validation);
        c.adam_beta1 = kv.take_double("adam_beta1", c.adam_beta1);
        c.adam_beta2 = kv.take_double("adam_beta2", c.adam_beta2);
        c.adam_epsilon = kv.take_double("adam_epsilon", c.adam_epsilon);
        c.clip_norm = kv.take_double("clip_norm", c.clip_norm);
        try {
            c.candidate = parse_candidate_activation(kv.take_string("candidate_activation", "tanh"));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        c.target = kv.take_string("target", c.target);
        c.train_end_year = static_cast<int>(kv.take_int("train_end_year", c.train_end_year));
        c.validation_year = static_cast<int>(kv.take_int("validation_year", c.validation_year));
        c.test_year = static_cast<int>(kv.take_int("test_year", c.test_year));
        kv.reject_unknown();
        c.validate();
        return c;
    }

    /// key = value lines that parse back into an identical config.
    std::string to_text() const {
        std::string s;
        auto put = [&](std::string_view k, const std::string& v) { (s += k) += " = " + v + "\n"; };
        put("epochs", std::to_string(epochs));
        put("learning_rate", format_double(learning_rate));
        put("l2", format_double(l2));
        put("hidden_size", std::to_string(hidden_size));
        put("seed", std::to_string(seed));
        put("chunk_length", std::to_string(chunk_length));
        put("validation_metric", to_string(validation_metric));
        put("regularization", regularization ? "true" : "false");
        put("validation", validation ? "true" : "false");
        put("adam_beta1", format_double(adam_beta1));
        put("adam_beta2", format_double(adam_beta2));
        put("adam_epsilon", format_double(adam_epsilon));
        put("clip_norm", format_double(clip_norm));
        put("candidate_activation", to_string(candidate));
        put("target", target);
        put("train_end_year", std::to_string(train_end_year));
        put("validation_year", std::to_string(validation_year));
        put("test_year", std::to_string(test_year));
        return s;
    }
};

inline constexpr const char* kRunConfigHelp =
    "run config keys (key = value):\n"
    "  epochs (200)  learning_rate (1e-4)  l2 (1e-6)  hidden_size (10)  seed (1)\n"
    "  chunk_length (2048)  validation_metric (nse|mse)  regularization (true)\n"
    "  validation (true)  adam_beta1 (0.9)  adam_beta2 (0.999)  adam_epsilon (1e-8)\n"
    "  clip_norm (0 = off)  candidate_activation (tanh|sigmoid)  target (discharge)\n"
    "  train_end_year (2015)  validation_year (2016)  test_year (2017)\n";

/// Everything needed to run a trained network on raw (physical-unit) rainfall.
struct TrainedModel {
    NetworkParams net;
    std::vector<std::string> gages;
    std::string target = "discharge";
    ScalingParams scaler;
    std::size_t chunk_length = kDefaultChunkLength;

    friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

struct TrainingReport {
    RunConfig config;
    std::vector<std::string> gages;
    std::vector<double> training_loss;     // per epoch, scaled-unit MSE after the epoch
    std::vector<double> validation_score;  // per epoch; empty when validation is off
    std::size_t best_epoch = 0;            // 1-based
    double best_training_loss = 0.0;
    double best_validation_score = std::numeric_limits<double>::quiet_NaN();
    std::size_t training_chunks = 0;
    std::size_t validation_chunks = 0;
    std::size_t iterations = 0;
    double wall_seconds = 0.0;
    ScalingParams scaler;
    std::vector<std::string> warnings;
};

struct TrainingResult {
    TrainedModel model;
    TrainingReport report;
};

/// One optimization example: a scaled chunk.
struct Example {
    Matrix inputs;       // T x d, scaled
    Vector targets;      // T, scaled
    Vector observed;     // T, physical units
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stable per-name seed: splitmix(base ^ fnv1a(name)).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(base ^ h);
}

inline std::vector<std::size_t> channel_indices(const std::vector<std::string>& have,
                                                const std::vector<std::string>& want) {
    std::vector<std::size_t> out;
    for (const auto& w : want) {
        auto it = std::find(have.begin(), have.end(), w);
        if (it == have.end()) throw DataError("channel '" + w + "' not present in data");
        out.push_back(static_cast<std::size_t>(it - have.begin()));
    }
    return out;
}

/// Scales the model's gage columns (and the target, when present) of one segment.
inline Example make_example(const TrainedModel& model, const CleanSegment& seg, bool with_target = true) {
    const auto cols = channel_indices(seg.channels, model.gages);
    std::vector<std::size_t> scale_cols;
    for (const auto& g : model.gages) scale_cols.push_back(model.scaler.index(g));
    Example ex;
    ex.inputs = Matrix(seg.length(), cols.size());
    for (std::size_t r = 0; r < seg.length(); ++r) {
        for (std::size_t j = 0; j < cols.size(); ++j) ex.inputs(r, j) = model.scaler.apply(scale_cols[j], seg.values(r, cols[j]));
    }
    if (with_target) {
        const std::size_t tc = seg.channel_index(model.target);
        const std::size_t ts = model.scaler.index(model.target);
        ex.targets.resize(seg.length());
        ex.observed.resize(seg.length());
        for (std::size_t r = 0; r < seg.length(); ++r) {
            ex.observed[r] = seg.values(r, tc);
            ex.targets[r] = model.scaler.apply(ts, ex.observed[r]);
        }
    }
    return ex;
}

inline std::vector<Example> make_examples(const TrainedModel& model, const std::vector<CleanSegment>& segments,
                                          std::size_t chunk_length) {
    std::vector<Example> out;
    for (const auto& c : chunk(segments, chunk_length)) out.push_back(make_example(model, c));
    return out;
}

/// Scaled-unit MSE over all chunks (no regularization): the sweep ranking statistic.
inline double training_error(const NetworkParams& net, const std::vector<Example>& examples) {
    double sse = 0.0;
    std::size_t n = 0;
    for (const auto& ex : examples) {
        const Vector pred = network_predict(net, ex.inputs);
        for (std::size_t t = 0; t < pred.size(); ++t) sse += (pred[t] - ex.targets[t]) * (pred[t] - ex.targets[t]);
        n += pred.size();
    }
    if (n == 0) throw DataError("training_error: no examples");
    return sse / static_cast<double>(n);
}

inline double training_error(const TrainedModel& model, const std::vector<CleanSegment>& train_segments) {
    return training_error(model.net, make_examples(model, train_segments, model.chunk_length));
}

/**
 * Predicted discharge (physical units) for a gap-free segment: chunked the
 * same way as in training, each chunk started from the learnable initial
 * state, re-stitched. Observed discharge is never read.
 */
inline Vector predict_segment(const TrainedModel& model, const CleanSegment& seg) {
    const std::size_t ts = model.scaler.index(model.target);
    Vector out;
    out.reserve(seg.length());
    for (const auto& c : chunk({seg}, model.chunk_length)) {
        const Example ex = make_example(model, c, false);
        for (double y : network_predict(model.net, ex.inputs)) out.push_back(model.scaler.invert(ts, y));
    }
    return out;
}

/// Predicted discharge for every row of a frame; the gage channels must be gap-free.
inline Vector predict(const TrainedModel& model, const TimeSeriesFrame& frame) {
    const auto cols = channel_indices(frame.channels, model.gages);
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        for (std::size_t c : cols) {
            if (frame.is_missing(r, c))
                throw DataError("predict: channel '" + frame.channels[c] + "' has a gap at " +
                                format_instant(frame.time_at(r)));
        }
    }
    if (frame.rows() == 0) throw DataError("predict: empty frame");
    CleanSegment seg;
    seg.start = frame.start;
    seg.channels = model.gages;
    seg.values = Matrix(frame.rows(), cols.size());
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        for (std::size_t j = 0; j < cols.size(); ++j) seg.values(r, j) = frame.values(r, cols[j]);
    }
    return predict_segment(model, seg);
}

/// Per-epoch progress hook: (epoch 1-based, training loss, validation score or NaN).
using EpochCallback = std::function<void(std::size_t, double, double)>;

namespace detail {

inline double validation_score(const NetworkParams& net, const TrainedModel& shell, const std::vector<Example>& val,
                               ValidationMetric metric) {
    const std::size_t ts = shell.scaler.index(shell.target);
    Vector pred, obs;
    for (const auto& ex : val) {
        for (double y : network_predict(net, ex.inputs)) pred.push_back(shell.scaler.invert(ts, y));
        obs.insert(obs.end(), ex.observed.begin(), ex.observed.end());
    }
    if (metric == ValidationMetric::NSE) return nse(pred, obs);
    return mse_loss(pred, obs);
}

inline bool better(ValidationMetric metric, double candidate, double incumbent) {
    if (std::isnan(incumbent)) return true;
    return metric == ValidationMetric::NSE ? candidate > incumbent : candidate < incumbent;
}

}  // namespace detail

/**
 * Trains a fresh network on the training split, one chunk per iteration in
 * a seeded shuffled order, and returns the parameters of the best epoch:
 * highest validation score (physical units) or, with validation off,
 * lowest training loss. The scaler is fit on the training split only.
 */
inline TrainingResult train_model(const RunConfig& config, const DatasetSplit& split,
                                  const std::vector<std::string>& gages, const EpochCallback& on_epoch = {}) {
    config.validate();
    if (gages.empty()) throw UsageError("train_model: empty gage subset");
    if (split.train.empty()) throw DataError("train_model: no training segments");
    const auto started = std::chrono::steady_clock::now();

    TrainedModel model;
    model.gages = gages;
    model.target = config.target;
    model.chunk_length = config.chunk_length;
    model.scaler = fit_scaler(split.train);
    channel_indices(model.scaler.channels, gages);
    channel_indices(model.scaler.channels, {config.target});

    TrainingReport report;
    report.config = config;
    report.gages = gages;
    report.scaler = model.scaler;
    report.warnings = split.warnings;

    const std::vector<Example> train = make_examples(model, split.train, config.chunk_length);
    if (train.empty()) throw DataError("train_model: no training chunks");
    std::vector<Example> val;
    bool use_validation = config.validation;
    if (use_validation) {
        val = make_examples(model, split.validation, config.chunk_length);
        if (val.empty()) {
            report.warnings.push_back("validation requested but the validation split is empty; selecting by training loss");
            use_validation = false;
        }
    }
    report.training_chunks = train.size();
    report.validation_chunks = val.size();

    NetworkParams net = init_params(config.seed, gages.size(), config.hidden_size);
    net.candidate = config.candidate;
    AdamState adam(parameter_count(net), config.adam());
    const double lambda = config.regularization ? config.l2 : 0.0;
    std::mt19937_64 shuffle_rng(splitmix64(config.seed ^ 0x5eed5eed5eed5eedULL));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    NetworkParams best = net;
    double best_loss = std::numeric_limits<double>::infinity();
    double best_score = std::numeric_limits<double>::quiet_NaN();
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t k = 0; k < order.size(); ++k) {
            const Example& ex = train[order[k]];
            const ForwardResult fwd = network_forward(net, ex.inputs);
            const double loss = mse_loss(fwd.predictions, ex.targets) + l2_penalty(net, lambda);
            if (!std::isfinite(loss))
                throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " chunk " +
                                     std::to_string(order[k]));
            NetworkParams grad = network_backward(net, ex.inputs, ex.targets, fwd.cache, lambda);
            if (config.clip_norm > 0.0) clip_gradient_norm(grad, config.clip_norm);
            adam.step(net, grad);
            ++report.iterations;
        }
        const double loss = training_error(net, train);
        if (!std::isfinite(loss))
            throw NumericalError("non-finite training error after epoch " + std::to_string(epoch));
        report.training_loss.push_back(loss);
        double score = std::numeric_limits<double>::quiet_NaN();
        bool improved = false;
        if (use_validation) {
            score = detail::validation_score(net, model, val, config.validation_metric);
            report.validation_score.push_back(score);
            improved = std::isfinite(score) && detail::better(config.validation_metric, score, best_score);
        } else {
            improved = loss < best_loss;
        }
        if (improved) {
            best = net;
            best_loss = loss;
            best_score = score;
            report.best_epoch = static_cast<std::size_t>(epoch);
        }
        if (on_epoch) on_epoch(static_cast<std::size_t>(epoch), loss, score);
    }
    if (report.best_epoch == 0) throw NumericalError("no epoch produced a finite validation score");

    model.net = std::move(best);
    report.best_training_loss = best_loss;
    report.best_validation_score = best_score;
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return {std::move(model), std::move(report)};
}

}  // namespace rrlstm
