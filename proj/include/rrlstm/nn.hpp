#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "rrlstm/tensor.hpp"

namespace rrlstm {

// Gate blocks are packed along the rows of every weight matrix and bias
// vector in the order (i, f, g, o): rows [k*p, (k+1)*p) belong to gate k.
inline constexpr const char* kGateOrder = "i,f,g,o";
enum Gate : std::size_t { kInput = 0, kForget = 1, kCandidate = 2, kOutputGate = 3 };

enum class CandidateActivation { Tanh, Sigmoid };
enum class HeadActivation { LeakyRelu, Identity };

inline constexpr double kLeakySlope = 0.01;

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double lrelu(double x) { return x > 0.0 ? x : kLeakySlope * x; }
inline double lrelu_derivative(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }

struct LstmLayerParams {
    Matrix input_hidden_weights;   // 4p x d
    Matrix hidden_hidden_weights;  // 4p x p
    Vector input_hidden_bias;      // 4p
    Vector hidden_hidden_bias;     // 4p
    Vector initial_hidden;         // p
    Vector initial_cell;           // p

    LstmLayerParams() = default;
    LstmLayerParams(std::size_t input_size, std::size_t hidden_size)
        : input_hidden_weights(4 * hidden_size, input_size),
          hidden_hidden_weights(4 * hidden_size, hidden_size),
          input_hidden_bias(4 * hidden_size, 0.0),
          hidden_hidden_bias(4 * hidden_size, 0.0),
          initial_hidden(hidden_size, 0.0),
          initial_cell(hidden_size, 0.0) {}

    std::size_t input_size() const { return input_hidden_weights.cols; }
    std::size_t hidden_size() const { return initial_hidden.size(); }

    void validate() const {
        const std::size_t p = hidden_size();
        require(p > 0, "lstm layer: hidden size must be positive");
        require(input_hidden_weights.rows == 4 * p, "lstm layer: input-hidden weights must have 4p rows");
        require(hidden_hidden_weights.rows == 4 * p && hidden_hidden_weights.cols == p,
                "lstm layer: hidden-hidden weights must be 4p x p");
        require(input_hidden_bias.size() == 4 * p && hidden_hidden_bias.size() == 4 * p,
                "lstm layer: biases must have length 4p");
        require(initial_cell.size() == p, "lstm layer: initial cell must have length p");
    }

    friend bool operator==(const LstmLayerParams&, const LstmLayerParams&) = default;
};

struct OutputHead {
    double bias = 0.0;
    Vector weights;
    HeadActivation activation = HeadActivation::LeakyRelu;

    friend bool operator==(const OutputHead&, const OutputHead&) = default;
};

/// Two stacked LSTM layers followed by a scalar output head.
struct NetworkParams {
    LstmLayerParams layer1;
    LstmLayerParams layer2;
    OutputHead head;
    CandidateActivation candidate = CandidateActivation::Tanh;

    NetworkParams() = default;
    NetworkParams(std::size_t input_size, std::size_t hidden_size)
        : layer1(input_size, hidden_size), layer2(hidden_size, hidden_size) {
        head.weights.assign(hidden_size, 0.0);
    }

    std::size_t input_size() const { return layer1.input_size(); }
    std::size_t hidden_size() const { return layer1.hidden_size(); }

    void validate() const {
        layer1.validate();
        layer2.validate();
        require(layer2.input_size() == layer1.hidden_size(), "network: layer2 input size must equal layer1 hidden size");
        require(head.weights.size() == layer2.hidden_size(), "network: head weights must match top hidden size");
    }

    /// Same shapes and settings, all entries zero.
    NetworkParams zeros_like() const {
        NetworkParams z(input_size(), hidden_size());
        z.layer2 = LstmLayerParams(layer2.input_size(), layer2.hidden_size());
        z.head.activation = head.activation;
        z.candidate = candidate;
        return z;
    }

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/**
 * Visit every learnable block of a layer/network in canonical order:
 * per layer (input-hidden W, hidden-hidden W, input-hidden b,
 * hidden-hidden b, h0, c0), then head bias, head weights.
 */
template <class Layer, class F>
    requires std::same_as<std::remove_const_t<Layer>, LstmLayerParams>
void for_each_block(Layer& layer, F&& f) {
    f(std::span(layer.input_hidden_weights.data));
    f(std::span(layer.hidden_hidden_weights.data));
    f(std::span(layer.input_hidden_bias));
    f(std::span(layer.hidden_hidden_bias));
    f(std::span(layer.initial_hidden));
    f(std::span(layer.initial_cell));
}

template <class Net, class F>
    requires std::same_as<std::remove_const_t<Net>, NetworkParams>
void for_each_block(Net& net, F&& f) {
    for_each_block(net.layer1, f);
    for_each_block(net.layer2, f);
    f(std::span(&net.head.bias, 1));
    f(std::span(net.head.weights));
}

template <class Net>
auto blocks(Net& net) {
    using Elem = std::conditional_t<std::is_const_v<Net>, const double, double>;
    std::vector<std::span<Elem>> out;
    for_each_block(net, [&](auto s) { out.push_back(s); });
    return out;
}

inline std::size_t parameter_count(const NetworkParams& net) {
    std::size_t n = 0;
    for_each_block(net, [&](auto s) { n += s.size(); });
    return n;
}

/// Copies all learnable entries into one vector (canonical block order).
inline Vector flatten(const NetworkParams& net) {
    Vector out;
    out.reserve(parameter_count(net));
    for_each_block(net, [&](auto s) { out.insert(out.end(), s.begin(), s.end()); });
    return out;
}

inline void unflatten(NetworkParams& net, std::span<const double> values) {
    require(values.size() == parameter_count(net), "unflatten: length mismatch");
    std::size_t k = 0;
    for_each_block(net, [&](std::span<double> s) {
        for (double& x : s) x = values[k++];
    });
}

/// Cached per-step quantities of one cell evaluation.
struct CellStep {
    Vector hidden;
    Vector cell;
    Vector gates;  // activated (i, f, g, o), length 4p
};

namespace detail {

// Advances one cell step. gates_out receives activated gates; hidden_out,
// cell_out and cell_tanh_out the new state.
inline void cell_step(const LstmLayerParams& lp, CandidateActivation candidate, const double* x,
                      const double* h_prev, const double* c_prev, double* gates_out, double* cell_out,
                      double* cell_tanh_out, double* hidden_out) {
    const std::size_t p = lp.hidden_size();
    const std::size_t d = lp.input_size();
    const std::size_t rows = 4 * p;
    const double* wi = lp.input_hidden_weights.data.data();
    const double* wh = lp.hidden_hidden_weights.data.data();
    for (std::size_t r = 0; r < rows; ++r) {
        double z = lp.input_hidden_bias[r] + lp.hidden_hidden_bias[r];
        const double* wir = wi + r * d;
        for (std::size_t j = 0; j < d; ++j) z += wir[j] * x[j];
        const double* whr = wh + r * p;
        for (std::size_t k = 0; k < p; ++k) z += whr[k] * h_prev[k];
        gates_out[r] = z;
    }
    for (std::size_t k = 0; k < p; ++k) {
        const double i = sigmoid(gates_out[kInput * p + k]);
        const double f = sigmoid(gates_out[kForget * p + k]);
        const double zg = gates_out[kCandidate * p + k];
        const double g = candidate == CandidateActivation::Tanh ? std::tanh(zg) : sigmoid(zg);
        const double o = sigmoid(gates_out[kOutputGate * p + k]);
        gates_out[kInput * p + k] = i;
        gates_out[kForget * p + k] = f;
        gates_out[kCandidate * p + k] = g;
        gates_out[kOutputGate * p + k] = o;
        const double c = f * c_prev[k] + i * g;
        const double tc = std::tanh(c);
        cell_out[k] = c;
        cell_tanh_out[k] = tc;
        hidden_out[k] = o * tc;
    }
}

}  // namespace detail

inline CellStep lstm_cell_forward(const LstmLayerParams& params, std::span<const double> x,
                                  std::span<const double> h_prev, std::span<const double> c_prev,
                                  CandidateActivation candidate = CandidateActivation::Tanh) {
    params.validate();
    const std::size_t p = params.hidden_size();
    require(x.size() == params.input_size(), "lstm_cell_forward: input length mismatch");
    require(h_prev.size() == p && c_prev.size() == p, "lstm_cell_forward: state length mismatch");
    CellStep out{Vector(p), Vector(p), Vector(4 * p)};
    Vector tc(p);
    detail::cell_step(params, candidate, x.data(), h_prev.data(), c_prev.data(), out.gates.data(), out.cell.data(),
                      tc.data(), out.hidden.data());
    return out;
}

struct LayerState {
    Vector hidden;
    Vector cell;
};

/// Hidden/cell state of both layers.
struct LstmState {
    LayerState layer1;
    LayerState layer2;
};

/// Per-layer record of a forward pass over T steps.
struct LayerTrace {
    std::size_t steps = 0;
    std::size_t hidden_size = 0;
    Vector initial_hidden;
    Vector initial_cell;
    Vector gates;      // T x 4p, activated
    Vector cell;       // T x p
    Vector cell_tanh;  // T x p
    Matrix hidden;     // T x p (also the next layer's input sequence)
};

struct ForwardCache {
    LayerTrace layer1;
    LayerTrace layer2;
    Vector head_preactivation;  // T
};

struct ForwardResult {
    Vector predictions;
    LstmState final_state;
    ForwardCache cache;
};

namespace detail {

inline void run_layer(const LstmLayerParams& lp, CandidateActivation candidate, const Matrix& inputs,
                      const LayerState& init, LayerTrace& trace) {
    const std::size_t T = inputs.rows;
    const std::size_t p = lp.hidden_size();
    trace.steps = T;
    trace.hidden_size = p;
    trace.initial_hidden = init.hidden;
    trace.initial_cell = init.cell;
    trace.gates.assign(T * 4 * p, 0.0);
    trace.cell.assign(T * p, 0.0);
    trace.cell_tanh.assign(T * p, 0.0);
    trace.hidden = Matrix(T, p);
    for (std::size_t t = 0; t < T; ++t) {
        const double* h_prev = t == 0 ? init.hidden.data() : trace.hidden.data.data() + (t - 1) * p;
        const double* c_prev = t == 0 ? init.cell.data() : trace.cell.data() + (t - 1) * p;
        cell_step(lp, candidate, inputs.data.data() + t * inputs.cols, h_prev, c_prev, trace.gates.data() + t * 4 * p,
                  trace.cell.data() + t * p, trace.cell_tanh.data() + t * p, trace.hidden.data.data() + t * p);
    }
}

inline double apply_head(const OutputHead& head, double pre) {
    return head.activation == HeadActivation::LeakyRelu ? lrelu(pre) : pre;
}

}  // namespace detail

inline LstmState learnable_initial_state(const NetworkParams& net) {
    return {{net.layer1.initial_hidden, net.layer1.initial_cell}, {net.layer2.initial_hidden, net.layer2.initial_cell}};
}

/**
 * Runs the two-layer network over a sequence (one row per step).
 * Without an explicit start state the learnable (h0, c0) of each layer are used.
 */
inline ForwardResult network_forward(const NetworkParams& net, const Matrix& inputs,
                                     const std::optional<LstmState>& state0 = std::nullopt) {
    net.validate();
    require(inputs.rows > 0, "network_forward: empty input sequence");
    require(inputs.cols == net.input_size(), "network_forward: input width does not match network input size");
    const std::size_t p = net.hidden_size();
    const LstmState init = state0 ? *state0 : learnable_initial_state(net);
    require(init.layer1.hidden.size() == p && init.layer1.cell.size() == p && init.layer2.hidden.size() == p &&
                init.layer2.cell.size() == p,
            "network_forward: initial state length mismatch");

    ForwardResult out;
    detail::run_layer(net.layer1, net.candidate, inputs, init.layer1, out.cache.layer1);
    detail::run_layer(net.layer2, net.candidate, out.cache.layer1.hidden, init.layer2, out.cache.layer2);

    const std::size_t T = inputs.rows;
    out.predictions.resize(T);
    out.cache.head_preactivation.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        double z = net.head.bias;
        auto h = out.cache.layer2.hidden.row(t);
        for (std::size_t k = 0; k < p; ++k) z += net.head.weights[k] * h[k];
        out.cache.head_preactivation[t] = z;
        out.predictions[t] = detail::apply_head(net.head, z);
    }
    auto last = [&](const LayerTrace& tr) {
        LayerState s;
        s.hidden.assign(tr.hidden.data.end() - static_cast<std::ptrdiff_t>(p), tr.hidden.data.end());
        s.cell.assign(tr.cell.end() - static_cast<std::ptrdiff_t>(p), tr.cell.end());
        return s;
    };
    out.final_state = {last(out.cache.layer1), last(out.cache.layer2)};
    return out;
}

/// Predictions only; skips nothing but discards the cache.
inline Vector network_predict(const NetworkParams& net, const Matrix& inputs) {
    return network_forward(net, inputs).predictions;
}

namespace detail {

// Backpropagates through one layer. dh_out holds dL/dh_t from above
// (T x p); on return dx (T x d) holds dL/dx_t. Parameter gradients are
// accumulated into grad.
inline void layer_backward(const LstmLayerParams& lp, CandidateActivation candidate, const Matrix& inputs,
                           const LayerTrace& tr, const Matrix& dh_out, LstmLayerParams& grad, Matrix* dx) {
    const std::size_t T = tr.steps;
    const std::size_t p = tr.hidden_size;
    const std::size_t d = lp.input_size();
    const std::size_t rows = 4 * p;
    Vector dh_next(p, 0.0), dc_next(p, 0.0), dz(rows), dh_carry(p);
    if (dx) *dx = Matrix(T, d);

    const double* wi = lp.input_hidden_weights.data.data();
    const double* wh = lp.hidden_hidden_weights.data.data();
    double* gwi = grad.input_hidden_weights.data.data();
    double* gwh = grad.hidden_hidden_weights.data.data();

    for (std::size_t t = T; t-- > 0;) {
        const double* gates = tr.gates.data() + t * rows;
        const double* tc = tr.cell_tanh.data() + t * p;
        const double* c_prev = t == 0 ? tr.initial_cell.data() : tr.cell.data() + (t - 1) * p;
        const double* h_prev = t == 0 ? tr.initial_hidden.data() : tr.hidden.data.data() + (t - 1) * p;
        const double* x = inputs.data.data() + t * inputs.cols;
        const double* dho = dh_out.data.data() + t * p;

        for (std::size_t k = 0; k < p; ++k) {
            const double i = gates[kInput * p + k];
            const double f = gates[kForget * p + k];
            const double g = gates[kCandidate * p + k];
            const double o = gates[kOutputGate * p + k];
            const double dh = dho[k] + dh_next[k];
            const double dc = dc_next[k] + dh * o * (1.0 - tc[k] * tc[k]);
            dz[kInput * p + k] = dc * g * i * (1.0 - i);
            dz[kForget * p + k] = dc * c_prev[k] * f * (1.0 - f);
            dz[kCandidate * p + k] =
                dc * i * (candidate == CandidateActivation::Tanh ? (1.0 - g * g) : g * (1.0 - g));
            dz[kOutputGate * p + k] = dh * tc[k] * o * (1.0 - o);
            dc_next[k] = dc * f;
        }

        std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
        double* dxt = dx ? dx->data.data() + t * d : nullptr;
        for (std::size_t r = 0; r < rows; ++r) {
            const double z = dz[r];
            grad.input_hidden_bias[r] += z;
            grad.hidden_hidden_bias[r] += z;
            double* gwir = gwi + r * d;
            const double* wir = wi + r * d;
            for (std::size_t j = 0; j < d; ++j) gwir[j] += z * x[j];
            if (dxt) {
                for (std::size_t j = 0; j < d; ++j) dxt[j] += wir[j] * z;
            }
            double* gwhr = gwh + r * p;
            const double* whr = wh + r * p;
            for (std::size_t k = 0; k < p; ++k) {
                gwhr[k] += z * h_prev[k];
                dh_carry[k] += whr[k] * z;
            }
        }
        dh_next.swap(dh_carry);
    }
    for (std::size_t k = 0; k < p; ++k) {
        grad.initial_hidden[k] += dh_next[k];
        grad.initial_cell[k] += dc_next[k];
    }
}

}  // namespace detail

/**
 * Exact gradient of MSE(predictions, targets) + lambda/2 * ||theta||^2 with
 * respect to every learnable entry, by backpropagation through time.
 * The cache must come from network_forward on the same inputs with the
 * learnable initial state (so h0/c0 receive gradient).
 */
inline NetworkParams network_backward(const NetworkParams& net, const Matrix& inputs, std::span<const double> targets,
                                      const ForwardCache& cache, double lambda) {
    net.validate();
    const std::size_t T = inputs.rows;
    const std::size_t p = net.hidden_size();
    require(T > 0, "network_backward: empty sequence");
    require(targets.size() == T, "network_backward: targets length must equal sequence length");
    require(cache.layer1.steps == T && cache.layer2.steps == T && cache.head_preactivation.size() == T,
            "network_backward: cache does not match inputs");
    require(cache.layer1.hidden_size == p && inputs.cols == net.input_size(), "network_backward: cache shape mismatch");

    NetworkParams grad = net.zeros_like();
    Matrix dh2(T, p);
    const double scale = 2.0 / static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) {
        const double z = cache.head_preactivation[t];
        const double yhat = detail::apply_head(net.head, z);
        const double dz = scale * (yhat - targets[t]) *
                          (net.head.activation == HeadActivation::LeakyRelu ? lrelu_derivative(z) : 1.0);
        grad.head.bias += dz;
        auto h = cache.layer2.hidden.row(t);
        auto dh = dh2.row(t);
        for (std::size_t k = 0; k < p; ++k) {
            grad.head.weights[k] += dz * h[k];
            dh[k] = dz * net.head.weights[k];
        }
    }
    Matrix dh1;
    detail::layer_backward(net.layer2, net.candidate, cache.layer1.hidden, cache.layer2, dh2, grad.layer2, &dh1);
    detail::layer_backward(net.layer1, net.candidate, inputs, cache.layer1, dh1, grad.layer1, nullptr);

    if (lambda != 0.0) {
        auto gb = blocks(grad);
        auto pb = blocks(net);
        for (std::size_t b = 0; b < gb.size(); ++b) {
            for (std::size_t k = 0; k < gb[b].size(); ++k) gb[b][k] += lambda * pb[b][k];
        }
    }
    return grad;
}

/**
 * Uniform initialization in [-1/sqrt(p), 1/sqrt(p)] for all weights and
 * biases; learnable initial states start at zero.
 */
inline NetworkParams init_params(std::uint64_t seed, std::size_t input_size, std::size_t hidden_size) {
    require(input_size >= 1 && hidden_size >= 1, "init_params: sizes must be >= 1");
    NetworkParams net(input_size, hidden_size);
    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    // Map 53 random bits onto [-bound, bound] so the draw is identical across standard libraries.
    auto draw = [&] {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        return -bound + 2.0 * bound * u;
    };
    auto fill = [&](LstmLayerParams& lp) {
        for (double& w : lp.input_hidden_weights.data) w = draw();
        for (double& w : lp.hidden_hidden_weights.data) w = draw();
        for (double& w : lp.input_hidden_bias) w = draw();
        for (double& w : lp.hidden_hidden_bias) w = draw();
    };
    fill(net.layer1);
    fill(net.layer2);
    net.head.bias = draw();
    for (double& w : net.head.weights) w = draw();
    return net;
}

inline const char* to_string(CandidateActivation a) { return a == CandidateActivation::Tanh ? "tanh" : "sigmoid"; }
inline const char* to_string(HeadActivation a) { return a == HeadActivation::LeakyRelu ? "lrelu" : "identity"; }

inline CandidateActivation parse_candidate_activation(const std::string& s) {
    if (s == "tanh") return CandidateActivation::Tanh;
    if (s == "sigmoid") return CandidateActivation::Sigmoid;
    throw std::invalid_argument("unknown candidate activation '" + s + "' (expected tanh|sigmoid)");
}

inline HeadActivation parse_head_activation(const std::string& s) {
    if (s == "lrelu") return HeadActivation::LeakyRelu;
    if (s == "identity") return HeadActivation::Identity;
    throw std::invalid_argument("unknown head activation '" + s + "' (expected lrelu|identity)");
}

}  // namespace rrlstm
