#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "rrlstm/config.hpp"
#include "rrlstm/tensor.hpp"
#include "rrlstm/timeseries.hpp"
#include "rrlstm/trainer.hpp"

namespace rrlstm {

/**
 * Synthetic watershed. Relevant gages share one storm process (with
 * per-gage intensity jitter); noise gages each draw their own storms and
 * have zero weight in the discharge.
 */
struct SynthConfig {
    std::size_t n_gages = 20;
    std::size_t n_relevant = 5;
    Vector relevance;                 // per gage, cms per (mm / 15 min); empty = default ramp
    double relevance_peak = 12.0;     // default ramp: peak, peak*(1 - 0.6 k/(n_relevant-1))
    double uh_shape = 3.0;            // gamma unit hydrograph, shape k
    double uh_scale = 8.0;            // gamma scale theta, in steps
    std::size_t uh_max_steps = 384;
    double base_flow = 5.0;           // cms
    double noise_std = 0.5;           // cms
    double storm_rate = 0.3;          // storms per day
    double storm_duration = 24.0;     // mean, steps
    double storm_intensity = 2.0;     // mean, mm per 15 min
    double intensity_jitter = 0.25;   // lognormal sigma of per-gage storm intensity
    double step_variability = 0.5;    // per-step multiplier ~ U(1 - v, 1 + v)
    int start_year = 2015;
    int years = 3;
    std::uint64_t seed = 42;
    double missing_rate = 5e-5;       // probability per step and channel of starting a gap
    std::size_t missing_max_run = 12;
    std::string target = "discharge";

    void validate() const {
        if (n_gages < 1 || n_relevant > n_gages) throw UsageError("synth: need 1 <= n_gages and n_relevant <= n_gages");
        if (!relevance.empty() && relevance.size() != n_gages) throw UsageError("synth: relevance needs n_gages entries");
        for (double w : relevance) {
            if (w < 0.0) throw UsageError("synth: relevance weights must be >= 0");
        }
        if (!(uh_shape > 0 && uh_scale > 0 && storm_duration > 0 && storm_intensity > 0))
            throw UsageError("synth: distribution parameters must be positive");
        if (storm_rate < 0 || noise_std < 0 || base_flow < 0 || missing_rate < 0 || missing_rate > 1)
            throw UsageError("synth: rates, noise and base flow must be non-negative");
        if (step_variability < 0 || step_variability > 1) throw UsageError("synth: step_variability must lie in [0, 1]");
        if (years < 1 || uh_max_steps < 1) throw UsageError("synth: years and uh_max_steps must be >= 1");
    }

    Vector relevance_weights() const {
        if (!relevance.empty()) return relevance;
        Vector w(n_gages, 0.0);
        for (std::size_t k = 0; k < n_relevant; ++k) {
            const double frac = n_relevant > 1 ? static_cast<double>(k) / static_cast<double>(n_relevant - 1) : 0.0;
            w[k] = relevance_peak * (1.0 - 0.6 * frac);
        }
        return w;
    }

    std::vector<std::string> gage_names() const {
        std::vector<std::string> names;
        for (std::size_t g = 0; g < n_gages; ++g) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "g%02zu", g + 1);
            names.emplace_back(buf);
        }
        return names;
    }

    static SynthConfig from(KeyValueConfig kv) {
        SynthConfig c;
        c.n_gages = static_cast<std::size_t>(kv.take_int("n_gages", static_cast<long long>(c.n_gages)));
        c.n_relevant = static_cast<std::size_t>(kv.take_int("n_relevant", static_cast<long long>(c.n_relevant)));
        if (kv.has("relevance")) {
            std::string s = kv.take_string("relevance", {});
            for (const auto& f : split_csv_line(s)) {
                double v = 0.0;
                if (!parse_double(f, v)) throw UsageError("synth: bad relevance weight '" + f + "'");
                c.relevance.push_back(v);
            }
        }
        c.relevance_peak = kv.take_double("relevance_peak", c.relevance_peak);
        c.uh_shape = kv.take_double("uh_shape", c.uh_shape);
        c.uh_scale = kv.take_double("uh_scale", c.uh_scale);
        c.uh_max_steps = static_cast<std::size_t>(kv.take_int("uh_max_steps", static_cast<long long>(c.uh_max_steps)));
        c.base_flow = kv.take_double("base_flow", c.base_flow);
        c.noise_std = kv.take_double("noise_std", c.noise_std);
        c.storm_rate = kv.take_double("storm_rate", c.storm_rate);
        c.storm_duration = kv.take_double("storm_duration", c.storm_duration);
        c.storm_intensity = kv.take_double("storm_intensity", c.storm_intensity);
        c.intensity_jitter = kv.take_double("intensity_jitter", c.intensity_jitter);
        c.step_variability = kv.take_double("step_variability", c.step_variability);
        c.start_year = static_cast<int>(kv.take_int("start_year", c.start_year));
        c.years = static_cast<int>(kv.take_int("years", c.years));
        c.seed = static_cast<std::uint64_t>(kv.take_int("seed", static_cast<long long>(c.seed)));
        c.missing_rate = kv.take_double("missing_rate", c.missing_rate);
        c.missing_max_run = static_cast<std::size_t>(kv.take_int("missing_max_run", static_cast<long long>(c.missing_max_run)));
        c.target = kv.take_string("target", c.target);
        kv.reject_unknown();
        c.validate();
        return c;
    }
};

inline constexpr const char* kSynthConfigHelp =
    "synth config keys (key = value):\n"
    "  n_gages (20)  n_relevant (5)  relevance (comma list; default ramp)  relevance_peak (12)\n"
    "  uh_shape (3)  uh_scale (8 steps)  uh_max_steps (384)  base_flow (5)  noise_std (0.5)\n"
    "  storm_rate (0.3/day)  storm_duration (24 steps)  storm_intensity (2 mm/15min)\n"
    "  intensity_jitter (0.25)  step_variability (0.5)  start_year (2015)  years (3)  seed (42)\n"
    "  missing_rate (5e-5)  missing_max_run (12)  target (discharge)\n";

/// Regularized lower incomplete gamma P(a, x) by series / continued fraction.
inline double regularized_gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    const double log_prefix = a * std::log(x) - x - std::lgamma(a);
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 1000; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        return sum * std::exp(log_prefix);
    }
    // Lentz continued fraction for Q(a, x).
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return 1.0 - std::exp(log_prefix) * h;
}

/**
 * Gamma unit hydrograph on the step grid: kernel[k] = F(k+1) - F(k) with F
 * the gamma CDF, truncated at max_steps and renormalized to sum 1.
 */
inline Vector gamma_unit_hydrograph(double shape, double scale, std::size_t max_steps) {
    Vector k(max_steps);
    double prev = 0.0;
    for (std::size_t i = 0; i < max_steps; ++i) {
        const double cur = regularized_gamma_p(shape, static_cast<double>(i + 1) / scale);
        k[i] = cur - prev;
        prev = cur;
    }
    double total = 0.0;
    for (double v : k) total += v;
    for (double& v : k) v /= total;
    return k;
}

/// Routed flow (no base flow, no noise): sum_g w_g * (rain_g * kernel).
inline Vector route_rainfall(const Matrix& rain, std::span<const double> weights, std::span<const double> kernel) {
    require(weights.size() == rain.cols, "route_rainfall: one weight per rain column");
    Vector q(rain.rows, 0.0);
    Vector effective(rain.rows, 0.0);
    for (std::size_t t = 0; t < rain.rows; ++t) {
        double s = 0.0;
        for (std::size_t g = 0; g < rain.cols; ++g) s += weights[g] * rain(t, g);
        effective[t] = s;
    }
    for (std::size_t t = 0; t < rain.rows; ++t) {
        if (effective[t] == 0.0) continue;
        const std::size_t n = std::min(kernel.size(), rain.rows - t);
        for (std::size_t k = 0; k < n; ++k) q[t + k] += effective[t] * kernel[k];
    }
    return q;
}

struct SynthDataset {
    TimeSeriesFrame frame;  // gages then target; missing runs injected
    Matrix rainfall;        // complete rainfall before gap injection
    Vector discharge;       // complete discharge before gap injection
    std::vector<std::string> gages;
    Vector relevance;
    Vector kernel;
    std::vector<std::pair<double, double>> coordinates;  // gage x, y in meters; outlet at origin
};

namespace detail {

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) { return splitmix64(seed * 0x100 + stream); }

}  // namespace detail

inline std::size_t synth_rows(const SynthConfig& cfg) {
    return static_cast<std::size_t>((year_start(cfg.start_year + cfg.years) - year_start(cfg.start_year)) / kStep);
}

/// Rainfall matrix (rows x gages) from the storm process.
inline Matrix synth_rainfall(const SynthConfig& cfg) {
    const std::size_t n = synth_rows(cfg);
    Matrix rain(n, cfg.n_gages);
    std::mt19937_64 rng(detail::stream_seed(cfg.seed, 1));
    const double p_start = cfg.storm_rate / kStepsPerDay;
    std::exponential_distribution<double> duration(1.0 / cfg.storm_duration);
    std::exponential_distribution<double> intensity(1.0 / cfg.storm_intensity);
    std::normal_distribution<double> jitter(0.0, cfg.intensity_jitter);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto add_storm = [&](std::size_t t0, const std::vector<std::size_t>& gages) {
        const auto len = static_cast<std::size_t>(std::ceil(duration(rng)));
        const double base = intensity(rng);
        for (std::size_t g : gages) {
            const double level = base * std::exp(jitter(rng) - 0.5 * cfg.intensity_jitter * cfg.intensity_jitter);
            for (std::size_t t = t0; t < std::min(n, t0 + len); ++t) {
                const double m = 1.0 - cfg.step_variability + 2.0 * cfg.step_variability * unit(rng);
                rain(t, g) += level * m;
            }
        }
    };

    std::vector<std::size_t> relevant;
    for (std::size_t g = 0; g < cfg.n_relevant; ++g) relevant.push_back(g);
    for (std::size_t t = 0; t < n; ++t) {
        if (!relevant.empty() && unit(rng) < p_start) add_storm(t, relevant);
        for (std::size_t g = cfg.n_relevant; g < cfg.n_gages; ++g) {
            if (unit(rng) < p_start) add_storm(t, {g});
        }
    }
    return rain;
}

/// Discharge for a rainfall matrix: base flow + routed flow + seeded noise, floored at 0.
inline Vector synth_discharge(const SynthConfig& cfg, const Matrix& rain) {
    const Vector w = cfg.relevance_weights();
    const Vector kernel = gamma_unit_hydrograph(cfg.uh_shape, cfg.uh_scale, cfg.uh_max_steps);
    Vector q = route_rainfall(rain, w, kernel);
    std::mt19937_64 rng(detail::stream_seed(cfg.seed, 2));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (double& v : q) {
        const double e = cfg.noise_std > 0.0 ? cfg.noise_std * noise(rng) : 0.0;
        v = std::max(0.0, v + cfg.base_flow + e);
    }
    return q;
}

inline SynthDataset generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthDataset ds;
    ds.gages = cfg.gage_names();
    ds.relevance = cfg.relevance_weights();
    ds.kernel = gamma_unit_hydrograph(cfg.uh_shape, cfg.uh_scale, cfg.uh_max_steps);
    ds.rainfall = synth_rainfall(cfg);
    ds.discharge = synth_discharge(cfg, ds.rainfall);

    const std::size_t n = ds.rainfall.rows;
    auto names = ds.gages;
    names.push_back(cfg.target);
    ds.frame = TimeSeriesFrame(year_start(cfg.start_year), names, n);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t g = 0; g < cfg.n_gages; ++g) ds.frame.set(t, g, ds.rainfall(t, g));
        ds.frame.set(t, cfg.n_gages, ds.discharge[t]);
    }

    std::mt19937_64 gap_rng(detail::stream_seed(cfg.seed, 3));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> run(1, std::max<std::size_t>(1, cfg.missing_max_run));
    if (cfg.missing_rate > 0.0) {
        for (std::size_t c = 0; c < names.size(); ++c) {
            for (std::size_t t = 0; t < n; ++t) {
                if (unit(gap_rng) >= cfg.missing_rate) continue;
                const std::size_t len = run(gap_rng);
                for (std::size_t k = t; k < std::min(n, t + len); ++k) ds.frame.set_missing(k, c);
                t += len;
            }
        }
    }

    std::mt19937_64 geo_rng(detail::stream_seed(cfg.seed, 4));
    std::uniform_real_distribution<double> angle(0.0, 6.283185307179586);
    std::uniform_real_distribution<double> near(1500.0, 8000.0);
    std::uniform_real_distribution<double> far(15000.0, 40000.0);
    for (std::size_t g = 0; g < cfg.n_gages; ++g) {
        const double r = ds.relevance[g] > 0.0 ? near(geo_rng) : far(geo_rng);
        const double a = angle(geo_rng);
        ds.coordinates.emplace_back(r * std::cos(a), r * std::sin(a));
    }
    return ds;
}

inline void write_manifest(const std::string& path, const SynthDataset& ds) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "gage,relevance\n";
    for (std::size_t g = 0; g < ds.gages.size(); ++g) out << ds.gages[g] << ',' << format_double(ds.relevance[g]) << '\n';
}

inline void write_coordinates(const std::string& path, const SynthDataset& ds) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "gage,x,y\noutlet,0,0\n";
    for (std::size_t g = 0; g < ds.gages.size(); ++g)
        out << ds.gages[g] << ',' << format_double(ds.coordinates[g].first) << ','
            << format_double(ds.coordinates[g].second) << '\n';
}

}  // namespace rrlstm
