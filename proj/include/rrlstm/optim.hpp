#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rrlstm/nn.hpp"
#include "rrlstm/tensor.hpp"

namespace rrlstm {

/// Mean squared error; the training objective.
inline double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.empty()) throw DimensionError("mse_loss: empty input");
    if (predictions.size() != targets.size()) throw DimensionError("mse_loss: length mismatch");
    double sum = 0.0;
    for (std::size_t t = 0; t < predictions.size(); ++t) {
        const double e = predictions[t] - targets[t];
        sum += e * e;
    }
    return sum / static_cast<double>(predictions.size());
}

/// lambda/2 times the squared l2 norm of every learnable entry.
inline double l2_penalty(std::span<const double> values, double lambda) {
    double sum = 0.0;
    for (double w : values) sum += w * w;
    return 0.5 * lambda * sum;
}

inline double l2_penalty(const NetworkParams& net, double lambda) {
    double sum = 0.0;
    for_each_block(net, [&](std::span<const double> s) {
        for (double w : s) sum += w * w;
    });
    return 0.5 * lambda * sum;
}

struct AdamHyperparams {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/**
 * Adam with bias-corrected moments. Any l2 term must already be folded
 * into the gradient; there is no decoupled decay here.
 */
class AdamState {
public:
    AdamState() = default;
    AdamState(std::size_t parameter_count, AdamHyperparams hp)
        : hp_(hp), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {}

    const AdamHyperparams& hyperparams() const { return hp_; }
    std::uint64_t steps() const { return t_; }
    const Vector& first_moment() const { return m_; }
    const Vector& second_moment() const { return v_; }

    /// Updates params in place. Blocks of params and grads are matched in order.
    void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) {
        require(params.size() == grads.size(), "adam_step: block count mismatch");
        std::size_t total = 0;
        for (std::size_t b = 0; b < params.size(); ++b) {
            require(params[b].size() == grads[b].size(), "adam_step: block shape mismatch");
            total += params[b].size();
        }
        require(total == m_.size(), "adam_step: parameter count does not match optimizer state");

        ++t_;
        const double bc1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(t_));
        std::size_t k = 0;
        for (std::size_t b = 0; b < params.size(); ++b) {
            auto w = params[b];
            auto g = grads[b];
            for (std::size_t j = 0; j < w.size(); ++j, ++k) {
                m_[k] = hp_.beta1 * m_[k] + (1.0 - hp_.beta1) * g[j];
                v_[k] = hp_.beta2 * v_[k] + (1.0 - hp_.beta2) * g[j] * g[j];
                const double m_hat = m_[k] / bc1;
                const double v_hat = v_[k] / bc2;
                w[j] -= hp_.learning_rate * m_hat / (std::sqrt(v_hat) + hp_.epsilon);
            }
        }
    }

    void step(NetworkParams& params, const NetworkParams& grads) {
        auto pb = blocks(params);
        auto gb = blocks(grads);
        step(pb, gb);
    }

    void step(std::span<double> params, std::span<const double> grads) {
        const std::span<double> pb[1] = {params};
        const std::span<const double> gb[1] = {grads};
        step(pb, gb);
    }

private:
    AdamHyperparams hp_;
    Vector m_;
    Vector v_;
    std::uint64_t t_ = 0;
};

inline void adam_step(AdamState& state, NetworkParams& params, const NetworkParams& grads) {
    state.step(params, grads);
}

/// w <- w - lambda*w - alpha*g, elementwise.
inline void sgd_weight_decay_step(std::span<double> params, std::span<const double> grads, double alpha,
                                  double lambda) {
    require(params.size() == grads.size(), "sgd_weight_decay_step: length mismatch");
    for (std::size_t j = 0; j < params.size(); ++j) params[j] = params[j] - lambda * params[j] - alpha * grads[j];
}

inline void sgd_weight_decay_step(NetworkParams& params, const NetworkParams& grads, double alpha, double lambda) {
    auto pb = blocks(params);
    auto gb = blocks(grads);
    require(pb.size() == gb.size(), "sgd_weight_decay_step: block mismatch");
    for (std::size_t b = 0; b < pb.size(); ++b) sgd_weight_decay_step(pb[b], gb[b], alpha, lambda);
}

/// Rescales all gradient blocks so their joint l2 norm is at most max_norm. Returns the pre-clip norm.
inline double clip_gradient_norm(NetworkParams& grads, double max_norm) {
    double sq = 0.0;
    for_each_block(grads, [&](std::span<const double> s) {
        for (double g : s) sq += g * g;
    });
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for_each_block(grads, [&](std::span<double> b) {
            for (double& g : b) g *= s;
        });
    }
    return norm;
}

}  // namespace rrlstm
