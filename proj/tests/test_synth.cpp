#include <gtest/gtest.h>

#include <numeric>

#include "rrlstm/synth.hpp"

using namespace rrlstm;

namespace {

SynthConfig small_config() {
    SynthConfig c;
    c.n_gages = 6;
    c.n_relevant = 2;
    c.years = 1;
    c.seed = 9;
    return c;
}

}  // namespace

TEST(GammaKernel, MatchesIndependentCdfDifferences) {
    const Vector k = gamma_unit_hydrograph(3.0, 8.0, 384);
    ASSERT_EQ(k.size(), 384u);
    EXPECT_NEAR(k[0], 0.0002964775408880204, 1e-14);
    EXPECT_NEAR(k[1], 0.0018650191488744925, 1e-14);
    EXPECT_NEAR(k[16], 0.03379114168486186, 1e-14);
    EXPECT_NEAR(k[100], 3.454649702516743e-05, 1e-14);
    EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), 1.0, 1e-12);
    for (double v : k) EXPECT_GE(v, 0.0);
}

TEST(GammaKernel, RegularizedGammaP) {
    EXPECT_NEAR(regularized_gamma_p(3.0, 2.5), 0.45618688411667035, 1e-14);
    EXPECT_NEAR(regularized_gamma_p(3.0, 10.0), 0.9972306042844884, 1e-14);
    EXPECT_EQ(regularized_gamma_p(3.0, 0.0), 0.0);
}

TEST(Synth, ZeroStormRateGivesBaseFlowPlusNoise) {
    SynthConfig c = small_config();
    c.storm_rate = 0.0;
    c.noise_std = 0.0;
    c.missing_rate = 0.0;
    const SynthDataset ds = generate(c);
    for (double q : ds.discharge) EXPECT_EQ(q, c.base_flow);
    for (double r : ds.rainfall.data) EXPECT_EQ(r, 0.0);

    c.noise_std = 0.5;
    const SynthDataset noisy = generate(c);
    double mean = 0.0;
    for (double q : noisy.discharge) mean += q;
    mean /= static_cast<double>(noisy.discharge.size());
    EXPECT_NEAR(mean, c.base_flow, 0.01);
}

TEST(Synth, ImpulseResponseIsScaledKernel) {
    SynthConfig c = small_config();
    c.noise_std = 0.0;
    c.base_flow = 0.0;
    Matrix rain(1000, c.n_gages);
    rain(10, 1) = 1.0;
    const Vector q = synth_discharge(c, rain);
    const Vector w = c.relevance_weights();
    const Vector k = gamma_unit_hydrograph(c.uh_shape, c.uh_scale, c.uh_max_steps);
    for (std::size_t t = 0; t < 10; ++t) EXPECT_EQ(q[t], 0.0);
    for (std::size_t j = 0; j < k.size(); ++j) EXPECT_NEAR(q[10 + j], w[1] * k[j], 1e-15);
}

TEST(Synth, MassConsistency) {
    SynthConfig c = small_config();
    c.noise_std = 0.0;
    c.base_flow = 0.0;
    Matrix rain = synth_rainfall(c);
    for (std::size_t t = rain.rows - c.uh_max_steps; t < rain.rows; ++t) {
        for (std::size_t g = 0; g < rain.cols; ++g) rain(t, g) = 0.0;
    }
    const Vector q = synth_discharge(c, rain);
    const Vector w = c.relevance_weights();
    const Vector k = gamma_unit_hydrograph(c.uh_shape, c.uh_scale, c.uh_max_steps);
    const double ksum = std::accumulate(k.begin(), k.end(), 0.0);
    double expected = 0.0;
    for (std::size_t g = 0; g < rain.cols; ++g) {
        double s = 0.0;
        for (std::size_t t = 0; t < rain.rows; ++t) s += rain(t, g);
        expected += w[g] * s * ksum;
    }
    const double total = std::accumulate(q.begin(), q.end(), 0.0);
    EXPECT_GT(total, 0.0);
    EXPECT_NEAR(total, expected, 1e-9 * expected);
}

TEST(Synth, NoiseGagesHaveNoCausalEffect) {
    const SynthConfig c = small_config();
    const Matrix rain = synth_rainfall(c);
    Matrix zeroed = rain;
    for (std::size_t t = 0; t < rain.rows; ++t) zeroed(t, 4) = 0.0;
    EXPECT_EQ(synth_discharge(c, rain), synth_discharge(c, zeroed));
}

TEST(Synth, DeterministicPerSeed) {
    const SynthConfig c = small_config();
    const SynthDataset a = generate(c), b = generate(c);
    EXPECT_EQ(a.frame.values, b.frame.values);
    EXPECT_EQ(a.frame.missing, b.frame.missing);
    SynthConfig other = c;
    other.seed = 10;
    EXPECT_NE(generate(other).frame.values, a.frame.values);
}

TEST(Synth, FrameShapeAndInvariants) {
    const SynthConfig c = small_config();
    const SynthDataset ds = generate(c);
    EXPECT_EQ(ds.frame.rows(), 365u * kStepsPerDay);
    EXPECT_EQ(ds.frame.width(), 7u);
    EXPECT_EQ(ds.frame.channels.front(), "g01");
    EXPECT_EQ(ds.frame.channels.back(), "discharge");
    EXPECT_NO_THROW(ds.frame.validate("discharge"));
    for (double q : ds.discharge) EXPECT_GE(q, 0.0);
    EXPECT_EQ(ds.relevance, (Vector{12.0, 12.0 * 0.4, 0, 0, 0, 0}));
    std::size_t missing = 0;
    for (auto m : ds.frame.missing) missing += m;
    EXPECT_GT(missing, 0u);
}

TEST(Synth, RelevantGagesShareStormTiming) {
    SynthConfig c = small_config();
    c.step_variability = 0.0;
    const Matrix rain = synth_rainfall(c);
    for (std::size_t t = 0; t < rain.rows; ++t) EXPECT_EQ(rain(t, 0) > 0.0, rain(t, 1) > 0.0);
}

TEST(Synth, RejectsBadConfig) {
    SynthConfig c = small_config();
    c.n_relevant = 7;
    EXPECT_THROW(generate(c), UsageError);
    c = small_config();
    c.uh_shape = 0.0;
    EXPECT_THROW(generate(c), UsageError);
}
