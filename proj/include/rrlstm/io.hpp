#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrlstm/nn.hpp"
#include "rrlstm/pipeline.hpp"
#include "rrlstm/timeseries.hpp"
#include "rrlstm/trainer.hpp"

namespace rrlstm {

using Json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;
inline constexpr int kSegmentsVersion = 1;

namespace detail {

inline Json matrix_json(const Matrix& m) { return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}}; }

inline Matrix matrix_from(const Json& j, std::size_t rows, std::size_t cols, const std::string& what) {
    Matrix m;
    m.rows = j.at("rows").get<std::size_t>();
    m.cols = j.at("cols").get<std::size_t>();
    m.data = j.at("data").get<std::vector<double>>();
    if (m.rows != rows || m.cols != cols || m.data.size() != rows * cols)
        throw DataError("checkpoint: " + what + " has shape " + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                        ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    return m;
}

inline Vector vector_from(const Json& j, std::size_t n, const std::string& what) {
    auto v = j.get<Vector>();
    if (v.size() != n) throw DataError("checkpoint: " + what + " has length " + std::to_string(v.size()) +
                                       ", expected " + std::to_string(n));
    return v;
}

inline Json layer_json(const LstmLayerParams& lp) {
    return {{"input_size", lp.input_size()},
            {"hidden_size", lp.hidden_size()},
            {"input_hidden_weights", matrix_json(lp.input_hidden_weights)},
            {"hidden_hidden_weights", matrix_json(lp.hidden_hidden_weights)},
            {"input_hidden_bias", lp.input_hidden_bias},
            {"hidden_hidden_bias", lp.hidden_hidden_bias},
            {"initial_hidden", lp.initial_hidden},
            {"initial_cell", lp.initial_cell}};
}

inline LstmLayerParams layer_from(const Json& j, const std::string& name) {
    const auto d = j.at("input_size").get<std::size_t>();
    const auto p = j.at("hidden_size").get<std::size_t>();
    if (d == 0 || p == 0) throw DataError("checkpoint: " + name + " has zero size");
    LstmLayerParams lp;
    lp.input_hidden_weights = matrix_from(j.at("input_hidden_weights"), 4 * p, d, name + ".input_hidden_weights");
    lp.hidden_hidden_weights = matrix_from(j.at("hidden_hidden_weights"), 4 * p, p, name + ".hidden_hidden_weights");
    lp.input_hidden_bias = vector_from(j.at("input_hidden_bias"), 4 * p, name + ".input_hidden_bias");
    lp.hidden_hidden_bias = vector_from(j.at("hidden_hidden_bias"), 4 * p, name + ".hidden_hidden_bias");
    lp.initial_hidden = vector_from(j.at("initial_hidden"), p, name + ".initial_hidden");
    lp.initial_cell = vector_from(j.at("initial_cell"), p, name + ".initial_cell");
    return lp;
}

inline Json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw DataError("'" + path + "': " + e.what());
    }
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
}

}  // namespace detail

/// Network parameters with explicit dimensions and gate order.
inline Json params_to_json(const NetworkParams& net) {
    return {{"format", "rrlstm-params"},
            {"version", kCheckpointVersion},
            {"gate_order", kGateOrder},
            {"candidate_activation", to_string(net.candidate)},
            {"layers", {detail::layer_json(net.layer1), detail::layer_json(net.layer2)}},
            {"head",
             {{"activation", to_string(net.head.activation)}, {"bias", net.head.bias}, {"weights", net.head.weights}}}};
}

inline NetworkParams params_from_json(const Json& j) {
    try {
        if (j.at("version").get<int>() != kCheckpointVersion)
            throw DataError("checkpoint: unsupported version " + j.at("version").dump());
        if (j.at("gate_order").get<std::string>() != kGateOrder)
            throw DataError("checkpoint: unsupported gate order " + j.at("gate_order").dump());
        const auto& layers = j.at("layers");
        if (!layers.is_array() || layers.size() != 2) throw DataError("checkpoint: expected exactly two layers");
        NetworkParams net;
        net.layer1 = detail::layer_from(layers[0], "layers[0]");
        net.layer2 = detail::layer_from(layers[1], "layers[1]");
        net.candidate = parse_candidate_activation(j.at("candidate_activation").get<std::string>());
        const auto& head = j.at("head");
        net.head.activation = parse_head_activation(head.at("activation").get<std::string>());
        net.head.bias = head.at("bias").get<double>();
        net.head.weights = detail::vector_from(head.at("weights"), net.layer2.hidden_size(), "head.weights");
        try {
            net.validate();
        } catch (const DimensionError& e) {
            throw DataError(std::string("checkpoint: ") + e.what());
        }
        return net;
    } catch (const Json::exception& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
}

inline Json scaler_to_json(const ScalingParams& sp) {
    return {{"channels", sp.channels}, {"min", sp.min}, {"max", sp.max}, {"ceiling", sp.ceiling}};
}

inline ScalingParams scaler_from_json(const Json& j) {
    ScalingParams sp;
    sp.channels = j.at("channels").get<std::vector<std::string>>();
    sp.min = detail::vector_from(j.at("min"), sp.channels.size(), "scaler.min");
    sp.max = detail::vector_from(j.at("max"), sp.channels.size(), "scaler.max");
    sp.ceiling = j.at("ceiling").get<double>();
    for (std::size_t c = 0; c < sp.channels.size(); ++c) {
        if (sp.max[c] < sp.min[c]) throw DataError("scaler: max < min for channel '" + sp.channels[c] + "'");
    }
    return sp;
}

inline Json model_to_json(const TrainedModel& m) {
    return {{"format", "rrlstm-model"},
            {"version", kCheckpointVersion},
            {"gages", m.gages},
            {"target", m.target},
            {"chunk_length", m.chunk_length},
            {"scaler", scaler_to_json(m.scaler)},
            {"params", params_to_json(m.net)}};
}

inline TrainedModel model_from_json(const Json& j) {
    try {
        TrainedModel m;
        if (j.at("format").get<std::string>() != "rrlstm-model") throw DataError("not a model checkpoint");
        m.gages = j.at("gages").get<std::vector<std::string>>();
        m.target = j.at("target").get<std::string>();
        m.chunk_length = j.at("chunk_length").get<std::size_t>();
        m.scaler = scaler_from_json(j.at("scaler"));
        m.net = params_from_json(j.at("params"));
        if (m.gages.size() != m.net.input_size()) throw DataError("checkpoint: gage list does not match input size");
        return m;
    } catch (const Json::exception& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
}

inline void save_model(const std::string& path, const TrainedModel& m) {
    detail::write_text(path, model_to_json(m).dump(1) + "\n");
}

inline TrainedModel load_model(const std::string& path) { return model_from_json(detail::read_json(path)); }

inline Json report_to_json(const TrainingReport& r) {
    Json j = {{"format", "rrlstm-training-report"},
              {"version", 1},
              {"gages", r.gages},
              {"config", r.config.to_text()},
              {"optimizer",
               {{"name", "adam"},
                {"learning_rate", r.config.learning_rate},
                {"beta1", r.config.adam_beta1},
                {"beta2", r.config.adam_beta2},
                {"epsilon", r.config.adam_epsilon},
                {"l2", r.config.regularization ? r.config.l2 : 0.0},
                {"clip_norm", r.config.clip_norm}}},
              {"training_loss", r.training_loss},
              {"validation_metric", r.config.validation ? to_string(r.config.validation_metric) : "none"},
              {"validation_score", r.validation_score},
              {"best_epoch", r.best_epoch},
              {"best_training_loss", r.best_training_loss},
              {"training_chunks", r.training_chunks},
              {"validation_chunks", r.validation_chunks},
              {"iterations", r.iterations},
              {"wall_seconds", r.wall_seconds},
              {"scaler", scaler_to_json(r.scaler)},
              {"warnings", r.warnings}};
    j["best_validation_score"] = std::isfinite(r.best_validation_score) ? Json(r.best_validation_score) : Json(nullptr);
    return j;
}

/// Plot-ready per-epoch table: epoch, training_loss, validation_score.
inline void write_epoch_csv(const std::string& path, const TrainingReport& r) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "epoch,training_loss,validation_score\n";
    for (std::size_t e = 0; e < r.training_loss.size(); ++e) {
        out << e + 1 << ',' << format_double(r.training_loss[e]) << ','
            << (e < r.validation_score.size() ? format_double(r.validation_score[e]) : std::string(kMissingToken)) << '\n';
    }
}

/// A prepared data directory: imputed frame plus its gap-free segments.
struct PreparedData {
    TimeSeriesFrame frame;  // short gaps filled; long gaps remain missing
    std::vector<CleanSegment> segments;
    std::string target = "discharge";
    std::size_t max_gap = kDefaultMaxGapSteps;
    std::size_t chunk_length = kDefaultChunkLength;

    std::vector<std::string> gages() const {
        std::vector<std::string> out;
        for (const auto& c : frame.channels) {
            if (c != target) out.push_back(c);
        }
        return out;
    }
};

inline Json segments_to_json(const PreparedData& d) {
    Json segs = Json::array();
    for (const auto& s : d.segments) {
        Json imp = Json::array();
        for (const auto& r : s.imputed) {
            imp.push_back({{"channel", r.channel},
                           {"start", format_instant(d.frame.time_at(r.first_row))},
                           {"end", format_instant(d.frame.time_at(r.last_row))},
                           {"points", r.last_row - r.first_row + 1}});
        }
        segs.push_back({{"id", s.id},
                        {"start", format_instant(s.start)},
                        {"end", format_instant(s.end())},
                        {"rows", s.length()},
                        {"origin_row", s.origin_row},
                        {"imputed", imp}});
    }
    Json chunks = Json::array();
    for (const auto& c : chunk(d.segments, d.chunk_length)) {
        chunks.push_back({{"segment", c.source_segment},
                          {"offset", c.offset_in_source},
                          {"start", format_instant(c.start)},
                          {"rows", c.length()}});
    }
    return {{"format", "rrlstm-segments"},
            {"version", kSegmentsVersion},
            {"target", d.target},
            {"channels", d.frame.channels},
            {"max_gap", d.max_gap},
            {"chunk_length", d.chunk_length},
            {"segments", segs},
            {"chunks", chunks}};
}

inline void save_prepared(const std::string& dir, const PreparedData& d) {
    std::filesystem::create_directories(dir);
    write_csv((std::filesystem::path(dir) / "clean.csv").string(), d.frame);
    detail::write_text((std::filesystem::path(dir) / "segments.json").string(), segments_to_json(d).dump(1) + "\n");
}

/// Runs impute_and_split on a raw frame and packages the result.
inline PreparedData prepare(const TimeSeriesFrame& raw, const std::string& target, std::size_t max_gap,
                            std::size_t chunk_length, std::vector<std::string>* warnings = nullptr) {
    if (!raw.has_channel(target)) throw DataError("input has no target channel '" + target + "'");
    SplitResult split = impute_and_split(raw, max_gap);
    if (warnings) warnings->insert(warnings->end(), split.warnings.begin(), split.warnings.end());
    PreparedData d;
    d.frame = apply_imputation(raw, split);
    d.segments = std::move(split.segments);
    d.target = target;
    d.max_gap = max_gap;
    d.chunk_length = chunk_length;
    return d;
}

inline PreparedData load_prepared(const std::string& dir) {
    const auto root = std::filesystem::path(dir);
    const Json j = detail::read_json((root / "segments.json").string());
    PreparedData d;
    try {
        if (j.at("format").get<std::string>() != "rrlstm-segments") throw DataError("segments.json: wrong format tag");
        if (j.at("version").get<int>() != kSegmentsVersion) throw DataError("segments.json: unsupported version");
        d.target = j.at("target").get<std::string>();
        d.max_gap = j.at("max_gap").get<std::size_t>();
        d.chunk_length = j.at("chunk_length").get<std::size_t>();
        d.frame = load_csv((root / "clean.csv").string(), d.target);
        if (d.frame.channels != j.at("channels").get<std::vector<std::string>>())
            throw DataError("segments.json: channel list does not match clean.csv");
        for (const auto& s : j.at("segments")) {
            const auto origin = s.at("origin_row").get<std::size_t>();
            const auto rows = s.at("rows").get<std::size_t>();
            if (origin + rows > d.frame.rows()) throw DataError("segments.json: segment beyond end of data");
            CleanSegment seg;
            seg.id = s.at("id").get<std::size_t>();
            seg.start = d.frame.time_at(origin);
            seg.channels = d.frame.channels;
            seg.values = Matrix(rows, d.frame.width());
            seg.origin_row = origin;
            seg.source_segment = seg.id;
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < d.frame.width(); ++c) {
                    if (d.frame.is_missing(origin + r, c))
                        throw DataError("segment " + std::to_string(seg.id) + " has a missing value at " +
                                        format_instant(d.frame.time_at(origin + r)));
                    seg.values(r, c) = d.frame.values(origin + r, c);
                }
            }
            for (const auto& imp : s.at("imputed")) {
                Instant a, b;
                if (!parse_instant(imp.at("start").get<std::string>(), a) || !parse_instant(imp.at("end").get<std::string>(), b))
                    throw DataError("segments.json: bad imputed range timestamp");
                seg.imputed.push_back({imp.at("channel").get<std::string>(),
                                       static_cast<std::size_t>((a - d.frame.start) / kStep),
                                       static_cast<std::size_t>((b - d.frame.start) / kStep)});
            }
            d.segments.push_back(std::move(seg));
        }
    } catch (const Json::exception& e) {
        throw DataError(std::string("segments.json: ") + e.what());
    }
    return d;
}

}  // namespace rrlstm
