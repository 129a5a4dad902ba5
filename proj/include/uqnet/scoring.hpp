#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "uqnet/arch.hpp"
#include "uqnet/math.hpp"
#include "uqnet/prediction.hpp"

namespace uqnet {

/// Training losses, all of which double as evaluation metrics. The first two
/// are strictly proper scoring rules (negated); Brier is proper; MSE is the
/// point-prediction baseline that ignores predictive variance.
enum class ScoringLoss { GaussianNLL, CrossEntropy, Brier, MSE };

inline bool loss_matches_task(ScoringLoss loss, TaskKind task) {
    switch (loss) {
        case ScoringLoss::GaussianNLL:
        case ScoringLoss::MSE: return task == TaskKind::Regression;
        case ScoringLoss::CrossEntropy:
        case ScoringLoss::Brier: return task == TaskKind::Classification;
    }
    return false;
}

inline std::string to_string(ScoringLoss loss) {
    switch (loss) {
        case ScoringLoss::GaussianNLL: return "gaussian_nll";
        case ScoringLoss::CrossEntropy: return "cross_entropy";
        case ScoringLoss::Brier: return "brier";
        case ScoringLoss::MSE: return "mse";
    }
    return "?";
}

/// Negative log density of y under N(mean, variance), constant included so
/// reported values are absolute: 0.5*ln(var) + (y-mean)^2/(2 var) + 0.5*ln(2 pi).
inline double gaussian_nll(const GaussianOutput& out, double y) {
    if (!(out.variance > 0.0)) throw std::invalid_argument("gaussian_nll: variance must be positive");
    const double r = y - out.mean;
    return 0.5 * std::log(out.variance) + r * r / (2.0 * out.variance) + kHalfLog2Pi;
}

/// Probability clamp used only when scoring externally supplied probability
/// vectors; training paths work on logits and never clamp.
inline constexpr double kProbClamp = 1e-12;

/// -log p[label] of an explicit probability vector (evaluation path).
inline double cross_entropy(std::span<const double> probs, int label) {
    if (label < 0 || label >= static_cast<int>(probs.size()))
        throw std::invalid_argument("cross_entropy: label out of range");
    return -std::log(std::max(probs[static_cast<size_t>(label)], kProbClamp));
}

/// Numerically stable -log softmax(logits)[label], the training-path variant.
inline double cross_entropy_from_logits(std::span<const double> logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw std::invalid_argument("cross_entropy_from_logits: label out of range");
    return log_sum_exp(logits) - logits[static_cast<size_t>(label)];
}

/// Brier score: K^-1 sum_k (onehot_k - p_k)^2.
inline double brier(std::span<const double> probs, int label) {
    if (label < 0 || label >= static_cast<int>(probs.size()))
        throw std::invalid_argument("brier: label out of range");
    double s = 0.0;
    for (size_t k = 0; k < probs.size(); ++k) {
        const double t = (static_cast<int>(k) == label) ? 1.0 : 0.0;
        const double d = t - probs[k];
        s += d * d;
    }
    return s / static_cast<double>(probs.size());
}

inline double mse(double mean, double y) {
    const double d = y - mean;
    return d * d;
}

}  // namespace uqnet
