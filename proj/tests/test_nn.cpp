#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rrlstm/nn.hpp"

using namespace rrlstm;

TEST(Sigmoid, Values) {
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_NEAR(sigmoid(30.0), 1.0, 1e-12);
    EXPECT_NEAR(sigmoid(1.0), 0.73105857863000487925, 1e-15);
    EXPECT_NEAR(sigmoid(-1.0), 1.0 - 0.73105857863000487925, 1e-15);
}

TEST(Sigmoid, StableAtExtremes) {
    for (double x : {-700.0, -100.0, 100.0, 700.0}) {
        const double s = sigmoid(x);
        EXPECT_TRUE(std::isfinite(s));
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
    }
}

TEST(LeakyRelu, Branches) {
    EXPECT_EQ(lrelu(2.0), 2.0);
    EXPECT_EQ(lrelu(0.0), 0.0);
    EXPECT_DOUBLE_EQ(lrelu(-3.0), -0.03);
}

TEST(LstmCell, ZeroParamsZeroState) {
    const LstmLayerParams lp(2, 3);
    const Vector x{0.7, -1.2}, z(3, 0.0);
    const CellStep s = lstm_cell_forward(lp, x, z, z);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(s.hidden[k], 0.0);
        EXPECT_EQ(s.cell[k], 0.0);
    }
}

TEST(LstmCell, ZeroParamsUnitCell) {
    const LstmLayerParams lp(2, 3);
    const Vector x{0.7, -1.2}, h(3, 0.0), c(3, 1.0);
    const CellStep s = lstm_cell_forward(lp, x, h, c);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(s.cell[k], 0.5);
        EXPECT_NEAR(s.hidden[k], 0.23105857863000487925, 1e-15);
    }
}

TEST(LstmCell, MatchesScalarOracle) {
    for (CandidateActivation cand : {CandidateActivation::Tanh, CandidateActivation::Sigmoid}) {
        const NetworkParams net = oracle::random_net(11, 2, 3);
        const Vector x{0.3, -0.8}, h{0.1, -0.2, 0.4}, c{-0.5, 0.25, 1.5};
        const CellStep s = lstm_cell_forward(net.layer1, x, h, c, cand);
        Vector ho = h, co = c;
        oracle::cell(net.layer1, cand, x, ho, co);
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_NEAR(s.hidden[k], ho[k], 1e-12);
            EXPECT_NEAR(s.cell[k], co[k], 1e-12);
        }
    }
}

TEST(LstmCell, GateRanges) {
    const NetworkParams net = oracle::random_net(5, 3, 4, 1.0);
    const Vector x{2.0, -2.0, 1.0}, h{0.9, -0.9, 0.1, 0.0}, c{10.0, -10.0, 0.0, 3.0};
    const CellStep s = lstm_cell_forward(net.layer1, x, h, c);
    for (std::size_t k = 0; k < 4; ++k) {
        for (Gate g : {kInput, kForget, kOutputGate}) {
            EXPECT_GT(s.gates[g * 4 + k], 0.0);
            EXPECT_LT(s.gates[g * 4 + k], 1.0);
        }
        EXPECT_GT(s.gates[kCandidate * 4 + k], -1.0);
        EXPECT_LT(s.gates[kCandidate * 4 + k], 1.0);
        EXPECT_TRUE(std::isfinite(s.cell[k]));
    }
}

TEST(LstmCell, RejectsMismatchedDimensions) {
    const LstmLayerParams lp(2, 3);
    const Vector x{1.0}, z(3, 0.0);
    EXPECT_THROW(lstm_cell_forward(lp, x, z, z), DimensionError);
    const Vector x2{1.0, 2.0}, short_state(2, 0.0);
    EXPECT_THROW(lstm_cell_forward(lp, x2, short_state, z), DimensionError);
}

TEST(NetworkForward, ZeroParamsGiveZeroOutput) {
    const NetworkParams net(3, 4);
    const Matrix in = oracle::random_inputs(1, 10, 3);
    for (double y : network_predict(net, in)) EXPECT_EQ(y, 0.0);
}

TEST(NetworkForward, SingleStepIsTwoCellsAndHead) {
    const NetworkParams net = oracle::random_net(3, 2, 3);
    const Matrix in = oracle::random_inputs(2, 1, 2);
    const Vector x{in(0, 0), in(0, 1)};
    const CellStep s1 = lstm_cell_forward(net.layer1, x, net.layer1.initial_hidden, net.layer1.initial_cell);
    const CellStep s2 = lstm_cell_forward(net.layer2, s1.hidden, net.layer2.initial_hidden, net.layer2.initial_cell);
    double pre = net.head.bias;
    for (std::size_t k = 0; k < 3; ++k) pre += net.head.weights[k] * s2.hidden[k];
    const ForwardResult r = network_forward(net, in);
    ASSERT_EQ(r.predictions.size(), 1u);
    EXPECT_EQ(r.predictions[0], lrelu(pre));
    EXPECT_EQ(r.final_state.layer2.hidden, s2.hidden);
}

TEST(NetworkForward, MatchesScalarOracleOverTime) {
    const NetworkParams net = oracle::random_net(7, 3, 4);
    const Matrix in = oracle::random_inputs(8, 20, 3);
    const Vector fast = network_predict(net, in);
    const Vector slow = oracle::forward(net, in);
    ASSERT_EQ(fast.size(), slow.size());
    for (std::size_t t = 0; t < fast.size(); ++t) EXPECT_NEAR(fast[t], slow[t], 1e-12);
}

TEST(NetworkForward, OracleEquivalenceProperty) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> dim(1, 8), len(1, 50);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t d = dim(rng), p = dim(rng), T = len(rng);
        NetworkParams net = oracle::random_net(100 + trial, d, p);
        if (trial % 2) net.candidate = CandidateActivation::Sigmoid;
        const Matrix in = oracle::random_inputs(200 + trial, T, d);
        const Vector fast = network_predict(net, in);
        const Vector slow = oracle::forward(net, in);
        for (std::size_t t = 0; t < T; ++t) ASSERT_NEAR(fast[t], slow[t], 1e-12) << "trial " << trial;
    }
}

TEST(NetworkForward, ExplicitInitialStateOverridesLearnable) {
    NetworkParams net = oracle::random_net(9, 2, 3);
    const Matrix in = oracle::random_inputs(1, 5, 2);
    const LstmState s0 = learnable_initial_state(net);
    EXPECT_EQ(network_forward(net, in, s0).predictions, network_predict(net, in));
    LstmState zero{{Vector(3, 0.0), Vector(3, 0.0)}, {Vector(3, 0.0), Vector(3, 0.0)}};
    EXPECT_NE(network_forward(net, in, zero).predictions, network_predict(net, in));
}

TEST(NetworkForward, RejectsEmptyAndMismatchedInputs) {
    const NetworkParams net(3, 4);
    EXPECT_THROW(network_forward(net, Matrix(0, 3)), DimensionError);
    EXPECT_THROW(network_forward(net, Matrix(5, 2)), DimensionError);
}

TEST(NetworkBackward, ZeroTargetsZeroParamsGiveZeroGradient) {
    const NetworkParams net(3, 4);
    const Matrix in = oracle::random_inputs(4, 12, 3);
    const ForwardResult f = network_forward(net, in);
    const NetworkParams g = network_backward(net, in, Vector(12, 0.0), f.cache, 0.0);
    for (double v : flatten(g)) EXPECT_EQ(v, 0.0);
}

TEST(NetworkBackward, MatchesFiniteDifferences) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const NetworkParams net = oracle::random_net(seed, 3, 4);
        const Matrix in = oracle::random_inputs(seed + 50, 20, 3);
        const Vector y = oracle::random_targets(seed + 90, 20);
        const ForwardResult f = network_forward(net, in);
        const Vector analytic = flatten(network_backward(net, in, y, f.cache, 1e-3));
        const Vector numeric = oracle::finite_difference_gradient(net, in, y, 1e-3);
        const oracle::GradientCheck c = oracle::compare_gradients(analytic, numeric);
        EXPECT_GT(c.checked, analytic.size() / 2);
        EXPECT_LT(c.max_relative_error, 1e-4) << "seed " << seed;
    }
}

TEST(NetworkBackward, SigmoidCandidateMatchesFiniteDifferences) {
    NetworkParams net = oracle::random_net(21, 2, 3);
    net.candidate = CandidateActivation::Sigmoid;
    const Matrix in = oracle::random_inputs(22, 15, 2);
    const Vector y = oracle::random_targets(23, 15);
    const ForwardResult f = network_forward(net, in);
    const Vector analytic = flatten(network_backward(net, in, y, f.cache, 0.0));
    const Vector numeric = oracle::finite_difference_gradient(net, in, y, 0.0);
    EXPECT_LT(oracle::compare_gradients(analytic, numeric).max_relative_error, 1e-4);
}

TEST(NetworkBackward, LambdaAddsExactlyLambdaTheta) {
    const NetworkParams net = oracle::random_net(31, 2, 3);
    const Matrix in = oracle::random_inputs(32, 10, 2);
    const Vector y = oracle::random_targets(33, 10);
    const ForwardResult f = network_forward(net, in);
    const Vector g0 = flatten(network_backward(net, in, y, f.cache, 0.0));
    const double lambda = 0.25;
    const Vector g1 = flatten(network_backward(net, in, y, f.cache, lambda));
    const Vector theta = flatten(net);
    for (std::size_t i = 0; i < theta.size(); ++i) EXPECT_NEAR(g1[i] - g0[i], lambda * theta[i], 1e-15);
}

TEST(NetworkBackward, RejectsTargetLengthMismatch) {
    const NetworkParams net = oracle::random_net(1, 2, 3);
    const Matrix in = oracle::random_inputs(2, 10, 2);
    const ForwardResult f = network_forward(net, in);
    EXPECT_THROW(network_backward(net, in, Vector(9, 0.0), f.cache, 0.0), DimensionError);
}

TEST(InitParams, DeterministicBoundedAndSeedSensitive) {
    const NetworkParams a = init_params(1, 3, 10), b = init_params(1, 3, 10), c = init_params(2, 3, 10);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    const double bound = 1.0 / std::sqrt(10.0);
    for (double w : flatten(a)) {
        EXPECT_GE(w, -bound);
        EXPECT_LE(w, bound);
    }
    for (double v : a.layer1.initial_hidden) EXPECT_EQ(v, 0.0);
    for (double v : a.layer2.initial_cell) EXPECT_EQ(v, 0.0);
}

TEST(Parameters, FlattenRoundTripAndCount) {
    const NetworkParams net = oracle::random_net(4, 3, 5);
    const std::size_t p = 5, d = 3;
    const std::size_t expected = (4 * p * d + 4 * p * p + 8 * p + 2 * p) + (4 * p * p + 4 * p * p + 8 * p + 2 * p) + 1 + p;
    EXPECT_EQ(parameter_count(net), expected);
    NetworkParams copy = net.zeros_like();
    unflatten(copy, flatten(net));
    EXPECT_EQ(copy, net);
}
