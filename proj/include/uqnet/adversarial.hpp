#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "uqnet/data.hpp"
#include "uqnet/network.hpp"
#include "uqnet/rng.hpp"
#include "uqnet/scoring.hpp"

namespace uqnet {

enum class AdversarialMode { Off, FGSM, RandomSign };

/// Per-dimension max-norm perturbation budget. eps_vector is expressed in the
/// units of whatever feature space the training loop runs in; compute_eps
/// derives it from raw training-split ranges, and the trainer rescales it when
/// the features are standardized.
struct AdversarialConfig {
    AdversarialMode mode{AdversarialMode::Off};
    double eps_fraction{0.01};
    std::vector<double> eps_vector;
    // optional clamp of perturbed inputs back into a valid domain (off by
    // default); bounds are in the same units as the training features
    bool clip{false};
    double clip_lo{0.0};
    double clip_hi{0.0};

    void validate(int input_dim) const {
        if (mode == AdversarialMode::Off) return;
        if (!(eps_fraction > 0.0)) throw std::invalid_argument("AdversarialConfig: eps_fraction must be > 0");
        if (!eps_vector.empty() && static_cast<int>(eps_vector.size()) != input_dim)
            throw std::invalid_argument("AdversarialConfig: eps_vector length mismatch");
        for (double e : eps_vector)
            if (!(e >= 0.0)) throw std::invalid_argument("AdversarialConfig: eps entries must be >= 0");
        if (clip && !(clip_lo <= clip_hi))
            throw std::invalid_argument("AdversarialConfig: clip_lo must not exceed clip_hi");
    }
};

/// eps[d] = fraction * (max_d - min_d) over the training features; constant
/// dimensions get zero budget.
inline std::vector<double> compute_eps(const Dataset& train, double eps_fraction) {
    if (train.size() < 1) throw DataError("compute_eps: empty dataset");
    std::vector<double> eps(train.dim());
    for (int d = 0; d < train.dim(); ++d)
        eps[d] = eps_fraction * (train.feature_max[d] - train.feature_min[d]);
    return eps;
}

namespace detail {

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// x' = x + eps (.) sign(input_grad). Exposed so the trainer can reuse an
/// input gradient it already paid for.
inline std::vector<double> fgsm_from_grad(std::span<const double> x,
                                          std::span<const double> input_grad,
                                          std::span<const double> eps_vector) {
    if (x.size() != eps_vector.size() || x.size() != input_grad.size())
        throw std::invalid_argument("fgsm: dimension mismatch");
    std::vector<double> out(x.size());
    for (size_t d = 0; d < x.size(); ++d) out[d] = x[d] + eps_vector[d] * sign0(input_grad[d]);
    return out;
}

}  // namespace detail

/// Fast gradient sign attack on the per-example loss; sign(0) := 0 so flat
/// coordinates stay untouched.
inline std::vector<double> fgsm(const NetworkParams& params, std::span<const double> x, double y,
                                ScoringLoss loss, std::span<const double> eps_vector,
                                ForwardMode mode = ForwardMode::eval()) {
    const Gradients g = backward(params, x, y, loss, mode);
    return detail::fgsm_from_grad(x, g.input_grad, eps_vector);
}

inline std::vector<double> fgsm(const NetworkParams& params, std::span<const double> x, int label,
                                ScoringLoss loss, std::span<const double> eps_vector,
                                ForwardMode mode = ForwardMode::eval()) {
    const Gradients g = backward(params, x, label, loss, mode);
    return detail::fgsm_from_grad(x, g.input_grad, eps_vector);
}

/// Baseline that perturbs along a uniformly random signed vector.
inline std::vector<double> random_sign_perturb(std::span<const double> x,
                                               std::span<const double> eps_vector, uint64_t seed) {
    if (x.size() != eps_vector.size())
        throw std::invalid_argument("random_sign_perturb: dimension mismatch");
    Rng rng(seed);
    std::vector<double> out(x.size());
    for (size_t d = 0; d < x.size(); ++d) out[d] = x[d] + eps_vector[d] * rng.sign();
    return out;
}

}  // namespace uqnet
