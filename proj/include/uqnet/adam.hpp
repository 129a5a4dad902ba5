#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "uqnet/network.hpp"

namespace uqnet {

/// Adam with bias correction. Accumulators mirror the parameter shapes.
struct AdamState {
    double learning_rate{0.1};
    double beta1{0.9};
    double beta2{0.999};
    double epsilon{1e-8};
    long step{0};

    std::vector<Matrix> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;

    static AdamState for_params(const NetworkParams& params, double learning_rate) {
        AdamState s;
        s.learning_rate = learning_rate;
        for (const Matrix& w : params.weights) {
            s.m_w.emplace_back(w.rows, w.cols);
            s.v_w.emplace_back(w.rows, w.cols);
        }
        for (const auto& b : params.biases) {
            s.m_b.emplace_back(b.size(), 0.0);
            s.v_b.emplace_back(b.size(), 0.0);
        }
        return s;
    }
};

namespace detail {

inline void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                        std::vector<double>& m, std::vector<double>& v, const AdamState& s,
                        double bc1, double bc2) {
    for (size_t i = 0; i < param.size(); ++i) {
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
    }
}

}  // namespace detail

inline void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state) {
    if (grads.weight_grads.size() != params.weights.size() ||
        grads.bias_grads.size() != params.biases.size() ||
        state.m_w.size() != params.weights.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    for (size_t l = 0; l < params.weights.size(); ++l) {
        if (!grads.weight_grads[l].same_shape(params.weights[l]) ||
            grads.bias_grads[l].size() != params.biases[l].size())
            throw std::invalid_argument("adam_step: shape mismatch");
    }

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t l = 0; l < params.weights.size(); ++l) {
        detail::adam_update(params.weights[l].data, grads.weight_grads[l].data, state.m_w[l].data,
                            state.v_w[l].data, state, bc1, bc2);
        detail::adam_update(params.biases[l], grads.bias_grads[l], state.m_b[l], state.v_b[l],
                            state, bc1, bc2);
    }
}

}  // namespace uqnet
