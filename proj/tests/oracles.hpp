#pragma once

// Reference implementations used only by the tests: a scalar-loop LSTM
// written gate by gate, and central finite differences over every
// learnable parameter.

#include <cmath>
#include <random>
#include <vector>

#include "rrlstm/nn.hpp"
#include "rrlstm/optim.hpp"

namespace oracle {

using rrlstm::CandidateActivation;
using rrlstm::LstmLayerParams;
using rrlstm::Matrix;
using rrlstm::NetworkParams;
using rrlstm::Vector;

template <class Real>
Real logistic(Real x) {
    return Real(1) / (Real(1) + std::exp(-x));
}

// Pre-activation of gate `gate` for hidden unit k.
template <class Real>
Real gate_sum(const LstmLayerParams& lp, int gate, std::size_t k, const std::vector<Real>& x, const std::vector<Real>& h) {
    const std::size_t p = lp.hidden_size();
    const std::size_t row = static_cast<std::size_t>(gate) * p + k;
    Real s = Real(lp.input_hidden_bias[row]) + Real(lp.hidden_hidden_bias[row]);
    for (std::size_t j = 0; j < x.size(); ++j) s += Real(lp.input_hidden_weights(row, j)) * x[j];
    for (std::size_t m = 0; m < h.size(); ++m) s += Real(lp.hidden_hidden_weights(row, m)) * h[m];
    return s;
}

template <class Real>
void cell(const LstmLayerParams& lp, CandidateActivation cand, const std::vector<Real>& x, std::vector<Real>& h,
          std::vector<Real>& c) {
    const std::size_t p = lp.hidden_size();
    std::vector<Real> h_new(p), c_new(p);
    for (std::size_t k = 0; k < p; ++k) {
        const Real i = logistic(gate_sum(lp, 0, k, x, h));
        const Real f = logistic(gate_sum(lp, 1, k, x, h));
        const Real zg = gate_sum(lp, 2, k, x, h);
        const Real g = cand == CandidateActivation::Tanh ? std::tanh(zg) : logistic(zg);
        const Real o = logistic(gate_sum(lp, 3, k, x, h));
        c_new[k] = f * c[k] + i * g;
        h_new[k] = o * std::tanh(c_new[k]);
    }
    h = h_new;
    c = c_new;
}

template <class Real>
std::vector<Real> basic_forward(const NetworkParams& net, const Matrix& inputs) {
    auto widen = [](const Vector& v) { return std::vector<Real>(v.begin(), v.end()); };
    std::vector<Real> h1 = widen(net.layer1.initial_hidden), c1 = widen(net.layer1.initial_cell);
    std::vector<Real> h2 = widen(net.layer2.initial_hidden), c2 = widen(net.layer2.initial_cell);
    std::vector<Real> out;
    for (std::size_t t = 0; t < inputs.rows; ++t) {
        std::vector<Real> x(inputs.cols);
        for (std::size_t j = 0; j < inputs.cols; ++j) x[j] = Real(inputs(t, j));
        cell(net.layer1, net.candidate, x, h1, c1);
        cell(net.layer2, net.candidate, h1, h2, c2);
        Real y = Real(net.head.bias);
        for (std::size_t k = 0; k < h2.size(); ++k) y += Real(net.head.weights[k]) * h2[k];
        if (net.head.activation == rrlstm::HeadActivation::LeakyRelu && y <= Real(0)) y *= Real(0.01);
        out.push_back(y);
    }
    return out;
}

inline Vector forward(const NetworkParams& net, const Matrix& inputs) { return basic_forward<double>(net, inputs); }

template <class Real = double>
Real objective(const NetworkParams& net, const Matrix& inputs, const Vector& targets, double lambda) {
    const std::vector<Real> y = basic_forward<Real>(net, inputs);
    Real sse = 0;
    for (std::size_t t = 0; t < y.size(); ++t) sse += (y[t] - Real(targets[t])) * (y[t] - Real(targets[t]));
    Real sq = 0;
    for (double w : rrlstm::flatten(net)) sq += Real(w) * Real(w);
    return sse / Real(y.size()) + Real(0.5) * Real(lambda) * sq;
}

/// Central differences of the objective with respect to every flattened
/// parameter. Parameters are perturbed in double; the objective itself is
/// accumulated in long double so its roundoff stays far below the
/// smallest gradient entries being checked.
inline Vector finite_difference_gradient(const NetworkParams& net, const Matrix& inputs, const Vector& targets,
                                         double lambda, double step = 1e-5) {
    const Vector theta = rrlstm::flatten(net);
    Vector grad(theta.size());
    NetworkParams probe = net;
    Vector shifted = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double hi = theta[i] + step, lo = theta[i] - step;
        shifted[i] = hi;
        rrlstm::unflatten(probe, shifted);
        const long double up = objective<long double>(probe, inputs, targets, lambda);
        shifted[i] = lo;
        rrlstm::unflatten(probe, shifted);
        const long double down = objective<long double>(probe, inputs, targets, lambda);
        shifted[i] = theta[i];
        grad[i] = static_cast<double>((up - down) / (static_cast<long double>(hi) - static_cast<long double>(lo)));
    }
    return grad;
}

/// Random network with nonzero learnable states and head, so every block is exercised.
inline NetworkParams random_net(std::uint64_t seed, std::size_t d, std::size_t p, double scale = 0.6) {
    NetworkParams net = rrlstm::init_params(seed, d, p);
    std::mt19937_64 rng(seed ^ 0xabcdefULL);
    std::uniform_real_distribution<double> u(-scale, scale);
    Vector theta = rrlstm::flatten(net);
    for (double& w : theta) w = u(rng);
    rrlstm::unflatten(net, theta);
    return net;
}

inline Matrix random_inputs(std::uint64_t seed, std::size_t T, std::size_t d) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(T, d);
    for (double& v : m.data) v = u(rng);
    return m;
}

inline Vector random_targets(std::uint64_t seed, std::size_t T) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 0.9);
    Vector v(T);
    for (double& x : v) x = u(rng);
    return v;
}

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
};

/// Max relative error between analytic and finite-difference gradients,
/// skipping entries where both magnitudes are below 1e-8.
inline GradientCheck compare_gradients(const Vector& analytic, const Vector& numeric) {
    GradientCheck r;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i], n = numeric[i];
        if (std::abs(a) < 1e-8 && std::abs(n) < 1e-8) continue;
        r.max_relative_error = std::max(r.max_relative_error, std::abs(a - n) / std::max(std::abs(a), std::abs(n)));
        ++r.checked;
    }
    return r;
}

}  // namespace oracle
