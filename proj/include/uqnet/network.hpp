#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "uqnet/arch.hpp"
#include "uqnet/math.hpp"
#include "uqnet/prediction.hpp"
#include "uqnet/rng.hpp"
#include "uqnet/scoring.hpp"

namespace uqnet {

/// All weights and biases of one MLP member. weights[l] has shape
/// (fan_in x fan_out); layer l computes z = W^T a + b.
struct NetworkParams {
    ArchSpec arch;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    uint64_t rng_seed{0};
};

/// Train mode draws dropout masks from mask_seed; Eval mode disables dropout.
/// With inverted dropout the Eval pass needs no rescaling.
struct ForwardMode {
    bool train{false};
    uint64_t mask_seed{0};

    static ForwardMode eval() { return {false, 0}; }
    static ForwardMode train_with_mask(uint64_t seed) { return {true, seed}; }
};

/// Fan-in-scaled uniform init, biases zero. Weight draw order is row-major
/// per layer, which fixes the bit pattern for a given (spec, seed).
inline NetworkParams init_params(const ArchSpec& spec, uint64_t seed) {
    spec.validate();
    const auto dims = spec.layer_dims();
    NetworkParams p;
    p.arch = spec;
    p.rng_seed = seed;
    Rng rng(seed);
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Matrix w(fan_in, fan_out);
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(fan_out, 0.0);
    }
    return p;
}

namespace detail {

inline void check_input(const NetworkParams& params, std::span<const double> x) {
    if (static_cast<int>(x.size()) != params.arch.input_dim)
        throw std::invalid_argument("network: input dimension mismatch");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("network: non-finite input");
}

/// Everything backward needs from the paired forward pass: post-activation
/// values and the combined relu-times-dropout derivative per hidden unit.
struct ForwardTrace {
    std::vector<std::vector<double>> activations;  // [0]=input, [L]=raw outputs
    std::vector<std::vector<double>> hidden_deriv; // per hidden layer
};

inline ForwardTrace run_forward(const NetworkParams& params, std::span<const double> x,
                                ForwardMode mode) {
    const int num_layers = params.arch.num_layers();
    const double rate = params.arch.dropout_rate;
    const bool dropping = mode.train && rate > 0.0;
    Rng mask_rng(mode.mask_seed);

    ForwardTrace t;
    t.activations.reserve(num_layers + 1);
    t.activations.emplace_back(x.begin(), x.end());
    t.hidden_deriv.resize(num_layers - 1);

    for (int l = 0; l < num_layers; ++l) {
        const Matrix& w = params.weights[l];
        const std::vector<double>& b = params.biases[l];
        const std::vector<double>& a = t.activations.back();
        std::vector<double> z(b);
        for (int i = 0; i < w.rows; ++i) {
            const double ai = a[i];
            const auto row = w.row(i);
            for (int j = 0; j < w.cols; ++j) z[j] += ai * row[j];
        }
        if (l + 1 < num_layers) {
            auto& deriv = t.hidden_deriv[l];
            deriv.assign(z.size(), 0.0);
            for (size_t j = 0; j < z.size(); ++j) {
                double factor = z[j] > 0.0 ? 1.0 : 0.0;
                if (dropping) {
                    // one draw per unit, fixed order, so masks replay per seed
                    const bool dropped = mask_rng.bernoulli(rate);
                    factor *= dropped ? 0.0 : 1.0 / (1.0 - rate);
                }
                deriv[j] = factor;
                z[j] = z[j] > 0.0 ? z[j] * factor : 0.0;
            }
        }
        t.activations.push_back(std::move(z));
    }
    return t;
}

inline PredictiveDistribution head_distribution(const ArchSpec& arch,
                                                const std::vector<double>& raw) {
    if (arch.head.task == TaskKind::Regression) {
        GaussianOutput g;
        g.mean = raw[0];
        g.variance = softplus(raw[1]) + kVarianceFloor;
        return g;
    }
    return Categorical{softmax(raw)};
}

}  // namespace detail

inline PredictiveDistribution forward(const NetworkParams& params, std::span<const double> x,
                                      ForwardMode mode) {
    detail::check_input(params, x);
    const auto trace = detail::run_forward(params, x, mode);
    return detail::head_distribution(params.arch, trace.activations.back());
}

/// Process-wide backward() invocation count. Gradient evaluations per batch
/// are part of the training contract (adversarial augmentation doubles them),
/// so the count is observable.
inline std::atomic<uint64_t>& backward_call_counter() {
    static std::atomic<uint64_t> count{0};
    return count;
}

/// Exact reverse-mode gradients of the per-example loss w.r.t. every
/// parameter and w.r.t. the input, plus the loss value itself.
struct Gradients {
    std::vector<Matrix> weight_grads;
    std::vector<std::vector<double>> bias_grads;
    std::vector<double> input_grad;
    double loss{0.0};
};

namespace detail {

struct HeadGrad {
    double loss;
    std::vector<double> dz;  // dL/d(raw outputs)
};

inline HeadGrad regression_head_grad(const std::vector<double>& raw, double y, ScoringLoss loss) {
    const double mu = raw[0];
    const double var = softplus(raw[1]) + kVarianceFloor;
    HeadGrad hg{0.0, {0.0, 0.0}};
    if (loss == ScoringLoss::GaussianNLL) {
        const double r = y - mu;
        hg.loss = 0.5 * std::log(var) + r * r / (2.0 * var) + kHalfLog2Pi;
        hg.dz[0] = (mu - y) / var;
        const double dvar = 0.5 / var - r * r / (2.0 * var * var);
        hg.dz[1] = dvar * sigmoid(raw[1]);
    } else {  // MSE trains the mean only; the variance unit gets no signal
        const double r = y - mu;
        hg.loss = r * r;
        hg.dz[0] = 2.0 * (mu - y);
        hg.dz[1] = 0.0;
    }
    return hg;
}

inline HeadGrad classification_head_grad(const std::vector<double>& raw, int label,
                                         ScoringLoss loss) {
    const int k = static_cast<int>(raw.size());
    if (label < 0 || label >= k) throw std::invalid_argument("backward: label out of range");
    const auto p = softmax(raw);
    HeadGrad hg{0.0, std::vector<double>(raw.size(), 0.0)};
    if (loss == ScoringLoss::CrossEntropy) {
        hg.loss = cross_entropy_from_logits(raw, label);
        for (int i = 0; i < k; ++i) hg.dz[i] = p[i] - (i == label ? 1.0 : 0.0);
    } else {  // Brier: chain dL/dp through the softmax Jacobian
        double dot = 0.0;
        std::vector<double> dp(raw.size());
        for (int i = 0; i < k; ++i) {
            const double t = (i == label) ? 1.0 : 0.0;
            const double d = p[i] - t;
            hg.loss += d * d;
            dp[i] = 2.0 * d / k;
            dot += dp[i] * p[i];
        }
        hg.loss /= k;
        for (int i = 0; i < k; ++i) hg.dz[i] = p[i] * (dp[i] - dot);
    }
    return hg;
}

inline Gradients run_backward(const NetworkParams& params, std::span<const double> x,
                              const HeadGrad& hg, const ForwardTrace& trace) {
    const int num_layers = params.arch.num_layers();
    Gradients g;
    g.loss = hg.loss;
    g.weight_grads.resize(num_layers);
    g.bias_grads.resize(num_layers);

    std::vector<double> delta = hg.dz;
    for (int l = num_layers - 1; l >= 0; --l) {
        const Matrix& w = params.weights[l];
        const std::vector<double>& a = trace.activations[l];
        Matrix wg(w.rows, w.cols);
        for (int i = 0; i < w.rows; ++i) {
            const double ai = a[i];
            auto row = wg.row(i);
            for (int j = 0; j < w.cols; ++j) row[j] = ai * delta[j];
        }
        g.weight_grads[l] = std::move(wg);
        g.bias_grads[l] = delta;

        std::vector<double> back(w.rows, 0.0);
        for (int i = 0; i < w.rows; ++i) {
            const auto row = w.row(i);
            double s = 0.0;
            for (int j = 0; j < w.cols; ++j) s += row[j] * delta[j];
            back[i] = s;
        }
        if (l > 0) {
            const auto& deriv = trace.hidden_deriv[l - 1];
            for (size_t i = 0; i < back.size(); ++i) back[i] *= deriv[i];
            delta = std::move(back);
        } else {
            g.input_grad = std::move(back);
        }
    }
    (void)x;
    return g;
}

}  // namespace detail

/// Regression backward. The dropout mask is a pure function of mode.mask_seed,
/// so passing the same mode replays the paired forward pass exactly.
inline Gradients backward(const NetworkParams& params, std::span<const double> x, double y,
                          ScoringLoss loss, ForwardMode mode) {
    detail::check_input(params, x);
    backward_call_counter().fetch_add(1, std::memory_order_relaxed);
    if (!loss_matches_task(loss, TaskKind::Regression) ||
        params.arch.head.task != TaskKind::Regression)
        throw std::invalid_argument("backward: loss/head mismatch");
    const auto trace = detail::run_forward(params, x, mode);
    const auto hg = detail::regression_head_grad(trace.activations.back(), y, loss);
    return detail::run_backward(params, x, hg, trace);
}

/// Classification backward.
inline Gradients backward(const NetworkParams& params, std::span<const double> x, int label,
                          ScoringLoss loss, ForwardMode mode) {
    detail::check_input(params, x);
    backward_call_counter().fetch_add(1, std::memory_order_relaxed);
    if (!loss_matches_task(loss, TaskKind::Classification) ||
        params.arch.head.task != TaskKind::Classification)
        throw std::invalid_argument("backward: loss/head mismatch");
    const auto trace = detail::run_forward(params, x, mode);
    const auto hg = detail::classification_head_grad(trace.activations.back(), label, loss);
    return detail::run_backward(params, x, hg, trace);
}

}  // namespace uqnet
