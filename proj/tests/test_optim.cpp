#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "rrlstm/nn.hpp"
#include "rrlstm/optim.hpp"

using namespace rrlstm;

TEST(MseLoss, HandCases) {
    const Vector y{0.0, 1.0, 2.0};
    EXPECT_EQ(mse_loss(y, y), 0.0);
    EXPECT_EQ(mse_loss(Vector{1.0, 1.0}, Vector{0.0, 2.0}), 1.0);
    EXPECT_DOUBLE_EQ(mse_loss(Vector{0.5, 1.5, 3.0}, y), 0.5);
}

TEST(MseLoss, RejectsBadLengths) {
    EXPECT_THROW(mse_loss(Vector{}, Vector{}), DimensionError);
    EXPECT_THROW(mse_loss(Vector{1.0}, Vector{1.0, 2.0}), DimensionError);
}

TEST(L2Penalty, HandCases) {
    EXPECT_EQ(l2_penalty(Vector{1.0, 2.0}, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(l2_penalty(Vector{2.0}, 1e-6), 2e-6);
    EXPECT_DOUBLE_EQ(l2_penalty(Vector{1.0, 2.0, 2.0}, 1.0), 4.5);
}

TEST(L2Penalty, PermutationInvariantAndQuadratic) {
    const Vector w{0.3, -1.7, 2.2, 0.01};
    const Vector perm{2.2, 0.01, 0.3, -1.7};
    Vector doubled = w;
    for (double& x : doubled) x *= 2.0;
    EXPECT_DOUBLE_EQ(l2_penalty(w, 0.5), l2_penalty(perm, 0.5));
    EXPECT_DOUBLE_EQ(l2_penalty(doubled, 0.5), 4.0 * l2_penalty(w, 0.5));
}

TEST(L2Penalty, CoversEveryNetworkParameter) {
    const NetworkParams net = oracle::random_net(3, 2, 3);
    EXPECT_DOUBLE_EQ(l2_penalty(net, 0.1), l2_penalty(flatten(net), 0.1));
}

TEST(Adam, ThreeStepHandTrace) {
    AdamState st(1, {0.1, 0.9, 0.999, 1e-8});
    Vector w{1.0};
    const double expected[] = {0.90000000099999999, 0.87336629737090296655, 0.80755513784280300692};
    const double grads[] = {1.0, -0.5, 2.0};
    for (int s = 0; s < 3; ++s) {
        const Vector g{grads[s]};
        st.step(std::span<double>(w), std::span<const double>(g));
        EXPECT_NEAR(w[0], expected[s], 1e-12) << "step " << s + 1;
        EXPECT_EQ(st.steps(), static_cast<std::uint64_t>(s + 1));
    }
}

TEST(Adam, ConstantGradientTwoSteps) {
    AdamState st(1, {0.1, 0.9, 0.999, 1e-8});
    Vector w{1.0};
    const Vector g{1.0};
    st.step(std::span<double>(w), std::span<const double>(g));
    EXPECT_NEAR(w[0], 0.9, 1e-8);
    st.step(std::span<double>(w), std::span<const double>(g));
    EXPECT_NEAR(w[0], 0.80000000199999998, 1e-12);
}

TEST(Adam, ZeroGradientIsNoOp) {
    NetworkParams net = oracle::random_net(1, 2, 3);
    const NetworkParams before = net;
    AdamState st(parameter_count(net), {});
    for (int i = 0; i < 5; ++i) adam_step(st, net, net.zeros_like());
    EXPECT_EQ(net, before);
    for (double v : st.second_moment()) EXPECT_GE(v, 0.0);
}

TEST(Adam, DeterministicTrajectories) {
    auto run = [] {
        NetworkParams net = oracle::random_net(5, 2, 3);
        const Matrix in = oracle::random_inputs(6, 10, 2);
        const Vector y = oracle::random_targets(7, 10);
        AdamState st(parameter_count(net), {1e-2});
        for (int i = 0; i < 10; ++i) {
            const ForwardResult f = network_forward(net, in);
            adam_step(st, net, network_backward(net, in, y, f.cache, 1e-6));
        }
        return net;
    };
    EXPECT_EQ(run(), run());
}

TEST(Adam, RejectsShapeMismatch) {
    AdamState st(2, {});
    Vector w{1.0, 2.0, 3.0};
    const Vector g{1.0, 1.0, 1.0};
    EXPECT_THROW(st.step(std::span<double>(w), std::span<const double>(g)), DimensionError);
}

TEST(SgdWeightDecay, DecayByOneMinusLambda) {
    Vector w{1.0};
    sgd_weight_decay_step(w, Vector{0.0}, 0.5, 0.1);
    EXPECT_EQ(w[0], 0.9);

    Vector v{2.0, -3.0};
    sgd_weight_decay_step(v, Vector{0.0, 0.0}, 0.5, 0.25);
    EXPECT_EQ(v[0], 2.0 * (1.0 - 0.25));
    EXPECT_EQ(v[1], -3.0 * (1.0 - 0.25));
}

TEST(SgdWeightDecay, LambdaZeroIsPlainSgd) {
    Vector w{1.0, -2.0};
    sgd_weight_decay_step(w, Vector{0.5, 4.0}, 0.1, 0.0);
    EXPECT_DOUBLE_EQ(w[0], 0.95);
    EXPECT_DOUBLE_EQ(w[1], -2.4);
}

TEST(SgdWeightDecay, EquivalentToL2UnderPlainSgd) {
    const double alpha = 0.05, lambda_l2 = 0.2;
    const Vector w0{0.7, -1.1, 0.3}, g{0.4, -0.2, 1.5};
    Vector decay = w0, folded = w0;
    sgd_weight_decay_step(decay, g, alpha, alpha * lambda_l2);
    Vector g_l2 = g;
    for (std::size_t i = 0; i < g.size(); ++i) g_l2[i] += lambda_l2 * w0[i];
    sgd_weight_decay_step(folded, g_l2, alpha, 0.0);
    for (std::size_t i = 0; i < w0.size(); ++i) EXPECT_NEAR(decay[i], folded[i], 1e-15);
}

TEST(ClipGradientNorm, RescalesOnlyAboveThreshold) {
    NetworkParams g = oracle::random_net(2, 2, 3, 5.0);
    const double norm = clip_gradient_norm(g, 0.0);
    EXPECT_GT(norm, 1.0);
    clip_gradient_norm(g, 1.0);
    double sq = 0.0;
    for (double v : flatten(g)) sq += v * v;
    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-12);
}

TEST(Adam, LossDecreasesOnSineBurst) {
    const std::size_t T = 120;
    Matrix rain(T, 1);
    Vector flow(T, 0.05);
    for (std::size_t t = 20; t < 40; ++t) rain(t, 0) = std::sin(std::numbers::pi * static_cast<double>(t - 20) / 20.0);
    for (std::size_t t = 25; t < 70; ++t) flow[t] = 0.05 + 0.6 * std::sin(std::numbers::pi * static_cast<double>(t - 25) / 45.0);

    NetworkParams net = init_params(3, 1, 10);
    AdamState st(parameter_count(net), {1e-3});
    auto loss = [&] { return mse_loss(network_predict(net, rain), flow); };
    const double first = loss();
    for (int it = 0; it < 50; ++it) {
        const ForwardResult f = network_forward(net, rain);
        adam_step(st, net, network_backward(net, rain, flow, f.cache, 0.0));
    }
    EXPECT_LT(loss(), first);
}
