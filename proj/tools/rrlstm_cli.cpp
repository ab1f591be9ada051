// Command-line front end: synth, prepare, train, sweep, importance, select, eval, predict.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
// Failures print one line "rrlstm: error: <kind>: <message>" on stderr.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rrlstm/rrlstm.hpp"

namespace fs = std::filesystem;
using namespace rrlstm;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

std::vector<std::string> parse_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto& f : split_csv_line(s)) {
        if (!f.empty()) out.push_back(f);
    }
    return out;
}

RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed) {
    KeyValueConfig kv = path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
    RunConfig c = RunConfig::from(kv);
    if (seed) c.seed = *seed;
    return c;
}

std::ofstream open_out(const std::string& path) {
    if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    return out;
}

void warn(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "rrlstm: warning: " << w << '\n';
}

DatasetSplit load_split(const std::string& dir, int train_end, int val, int test) {
    const PreparedData data = load_prepared(dir);
    DatasetSplit split = split_by_year(data.segments, train_end, val, test);
    warn(split.warnings);
    return split;
}

Instant parse_time_arg(const std::string& s) {
    Instant t;
    if (!parse_instant(s, t)) throw UsageError("bad timestamp '" + s + "' (expected YYYY-MM-DDTHH:MM)");
    return t;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LSTM rainfall-runoff modeling: synthetic data, preparation, training, gage selection, evaluation"};
    app.require_subcommand(1);
    app.footer(std::string("\n") + kRunConfigHelp + "\n" + kSynthConfigHelp);

    std::optional<std::uint64_t> seed;
    std::string config_path, out_path, data_dir, model_path;

    auto* synth = app.add_subcommand("synth", "generate the synthetic watershed dataset");
    synth->add_option("--config", config_path, "synth config file (key = value)");
    synth->add_option("--out", out_path, "output directory")->required();
    synth->add_option("--seed", seed, "override the config seed");

    std::string in_csv, target = "discharge";
    std::size_t max_gap = kDefaultMaxGapSteps, chunk_len = kDefaultChunkLength;
    auto* prep = app.add_subcommand("prepare", "impute short gaps, split at long gaps, write a data directory");
    prep->add_option("--in", in_csv, "input CSV (timestamp + channels)")->required();
    prep->add_option("--out", out_path, "output data directory")->required();
    prep->add_option("--max-gap", max_gap, "longest imputed gap in steps")->capture_default_str();
    prep->add_option("--chunk", chunk_len, "chunk length recorded in the manifest")->capture_default_str();
    prep->add_option("--target", target, "discharge channel name")->capture_default_str();

    std::string gage_list;
    auto* train = app.add_subcommand("train", "train a model on a data directory");
    train->add_option("--data", data_dir, "prepared data directory")->required();
    train->add_option("--config", config_path, "run config file");
    train->add_option("--gages", gage_list, "comma-separated gages, or 'all'")->required();
    train->add_option("--out", out_path, "output directory")->required();
    train->add_option("--seed", seed, "override the config seed");

    std::size_t jobs = 1;
    auto* sweep = app.add_subcommand("sweep", "train one single-gage model per gage and tabulate training errors");
    sweep->add_option("--data", data_dir, "prepared data directory")->required();
    sweep->add_option("--config", config_path, "run config file");
    sweep->add_option("--out", out_path, "output error table CSV")->required();
    sweep->add_option("--jobs", jobs, "concurrent trainings")->capture_default_str();
    sweep->add_option("--gages", gage_list, "comma-separated gages (default: all)");
    sweep->add_option("--seed", seed, "override the config seed");

    std::string errors_path, coords_path, corr_path;
    auto* imp = app.add_subcommand("importance", "first-layer weight norms per gage and their correlation with sweep error");
    imp->add_option("--model", model_path, "model checkpoint")->required();
    imp->add_option("--errors", errors_path, "sweep error table CSV")->required();
    imp->add_option("--out", out_path, "output importance table CSV")->required();
    imp->add_option("--coords", coords_path, "gage coordinates CSV (gage,x,y; row 'outlet')");
    imp->add_option("--corr-out", corr_path, "correlation table CSV (default: stdout)");

    std::size_t k = 10;
    auto* sel = app.add_subcommand("select", "print the k gages with the lowest sweep error");
    sel->add_option("--errors", errors_path, "error table CSV")->required();
    sel->add_option("--k", k, "number of gages")->capture_default_str();

    std::vector<std::string> exclude;
    int train_end = 2015, val_year = 2016, test_year = 2017;
    EventOptions ev_opt;
    auto* eval = app.add_subcommand("eval", "score a model per split and per test event");
    eval->add_option("--model", model_path, "model checkpoint")->required();
    eval->add_option("--data", data_dir, "prepared data directory")->required();
    eval->add_option("--out", out_path, "output directory")->required();
    eval->add_option("--exclude-window", exclude, "START END of a window left out of the 'Test excluding' row")
        ->expected(2);
    eval->add_option("--train-end-year", train_end)->capture_default_str();
    eval->add_option("--validation-year", val_year)->capture_default_str();
    eval->add_option("--test-year", test_year)->capture_default_str();
    eval->add_option("--threshold", ev_opt.threshold, "event peak threshold (cms)")->capture_default_str();
    eval->add_option("--min-separation", ev_opt.min_separation, "event merge distance (steps)")->capture_default_str();
    eval->add_option("--base-percentile", ev_opt.base_percentile, "event base level percentile")->capture_default_str();

    std::string rain_csv;
    auto* pred = app.add_subcommand("predict", "predict discharge from rainfall");
    pred->add_option("--model", model_path, "model checkpoint")->required();
    pred->add_option("--rain", rain_csv, "rainfall CSV with the model's gage columns")->required();
    pred->add_option("--out", out_path, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "rrlstm: error: usage: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (*synth) {
            KeyValueConfig kv = config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path);
            SynthConfig sc = SynthConfig::from(kv);
            if (seed) sc.seed = *seed;
            const SynthDataset ds = generate(sc);
            fs::create_directories(out_path);
            write_csv((fs::path(out_path) / "data.csv").string(), ds.frame);
            write_manifest((fs::path(out_path) / "manifest.csv").string(), ds);
            write_coordinates((fs::path(out_path) / "coords.csv").string(), ds);
        } else if (*prep) {
            if (chunk_len < 2) throw UsageError("--chunk must be >= 2");
            const TimeSeriesFrame raw = load_csv(in_csv, target);
            std::vector<std::string> warnings;
            const PreparedData data = prepare(raw, target, max_gap, chunk_len, &warnings);
            warn(warnings);
            save_prepared(out_path, data);
            std::cerr << "rrlstm: " << data.segments.size() << " segments\n";
        } else if (*train) {
            const RunConfig rc = load_run_config(config_path, seed);
            const PreparedData data = load_prepared(data_dir);
            std::vector<std::string> gages = gage_list == "all" ? data.gages() : parse_list(gage_list);
            if (gages.empty()) throw UsageError("--gages is empty");
            if (rc.target != data.target) throw UsageError("config target '" + rc.target + "' differs from data target '" + data.target + "'");
            DatasetSplit split = split_by_year(data.segments, rc.train_end_year, rc.validation_year, rc.test_year);
            warn(split.warnings);
            const TrainingResult res = train_model(rc, split, gages, [](std::size_t e, double loss, double score) {
                std::cerr << "epoch " << e << " loss " << format_double(loss) << " validation " << format_double(score) << '\n';
            });
            fs::create_directories(out_path);
            save_model((fs::path(out_path) / "model.json").string(), res.model);
            open_out((fs::path(out_path) / "report.json").string()) << report_to_json(res.report).dump(1) << '\n';
            write_epoch_csv((fs::path(out_path) / "epochs.csv").string(), res.report);
        } else if (*sweep) {
            const RunConfig rc = load_run_config(config_path, seed);
            const PreparedData data = load_prepared(data_dir);
            const std::vector<std::string> gages = gage_list.empty() ? data.gages() : parse_list(gage_list);
            DatasetSplit split = split_by_year(data.segments, rc.train_end_year, rc.validation_year, rc.test_year);
            warn(split.warnings);
            const auto entries = gage_sweep(rc, split, gages, jobs, [](const SweepEntry& e) {
                std::cerr << "gage " << e.gage << " e " << format_double(e.error) << (e.diverged ? " (diverged)" : "") << '\n';
            });
            auto out = open_out(out_path);
            write_sweep_csv(out, entries);
        } else if (*imp) {
            const TrainedModel model = load_model(model_path);
            const auto errors = load_error_table(errors_path);
            const auto dist = coords_path.empty() ? std::map<std::string, double>{} : load_distances(coords_path);
            const GageImportanceTable table = importance_table(model, errors, dist);
            auto out = open_out(out_path);
            write_importance_csv(out, table);
            if (corr_path.empty()) {
                write_correlation_csv(std::cout, table);
            } else {
                auto corr = open_out(corr_path);
                write_correlation_csv(corr, table);
            }
        } else if (*sel) {
            const auto errors = load_error_table(errors_path);
            if (k > errors.size()) throw UsageError("--k exceeds the number of gages in the table");
            const auto top = select_top_k(errors, k);
            for (std::size_t i = 0; i < top.size(); ++i) std::cout << (i ? "," : "") << top[i];
            std::cout << '\n';
        } else if (*eval) {
            const TrainedModel model = load_model(model_path);
            const DatasetSplit split = load_split(data_dir, train_end, val_year, test_year);
            std::vector<ExclusionWindow> windows;
            for (std::size_t i = 0; i + 1 < exclude.size(); i += 2)
                windows.push_back({exclude[i] + ".." + exclude[i + 1], parse_time_arg(exclude[i]), parse_time_arg(exclude[i + 1])});
            const EvaluationReport rep = evaluate_model(model, split, windows, ev_opt);
            fs::create_directories(out_path);
            auto scores = open_out((fs::path(out_path) / "report.csv").string());
            write_scores_csv(scores, rep);
            auto preds = open_out((fs::path(out_path) / "predictions.csv").string());
            write_predictions_csv(preds, rep);
            auto events = open_out((fs::path(out_path) / "events.csv").string());
            write_events_csv(events, rep);
            write_scores_csv(std::cout, rep);
        } else if (*pred) {
            const TrainedModel model = load_model(model_path);
            const TimeSeriesFrame rain = load_csv(rain_csv, model.target);
            const Vector q = predict(model, rain);
            auto out = open_out(out_path);
            out << "timestamp," << model.target << '\n';
            for (std::size_t r = 0; r < q.size(); ++r) out << format_instant(rain.time_at(r)) << ',' << format_double(q[r]) << '\n';
        }
    } catch (const UsageError& e) {
        std::cerr << "rrlstm: error: usage: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericalError& e) {
        std::cerr << "rrlstm: error: numerical: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "rrlstm: error: data: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
