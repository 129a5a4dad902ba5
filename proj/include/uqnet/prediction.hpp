#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace uqnet {

/// Minimum predicted variance, applied on the softplus variance head and
/// anywhere an empirical variance could degenerate to zero. Meaningful on
/// standardized targets.
inline constexpr double kVarianceFloor = 1e-6;

struct GaussianOutput {
    double mean{0.0};
    double variance{0.0};
};

struct Categorical {
    std::vector<double> probs;
};

/// The unit of all downstream evaluation: either a class-probability vector
/// or a predictive Gaussian.
using PredictiveDistribution = std::variant<Categorical, GaussianOutput>;

inline bool is_gaussian(const PredictiveDistribution& d) {
    return std::holds_alternative<GaussianOutput>(d);
}

inline const GaussianOutput& as_gaussian(const PredictiveDistribution& d) {
    if (!is_gaussian(d)) throw std::logic_error("prediction is not Gaussian");
    return std::get<GaussianOutput>(d);
}

inline const std::vector<double>& as_probs(const PredictiveDistribution& d) {
    if (is_gaussian(d)) throw std::logic_error("prediction is not categorical");
    return std::get<Categorical>(d).probs;
}

/// Index of the most probable class (lowest index wins ties).
inline int argmax_class(std::span<const double> probs) {
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

/// Confidence of the predicted label: max_k p(y=k|x).
inline double confidence(std::span<const double> probs) {
    return *std::max_element(probs.begin(), probs.end());
}

}  // namespace uqnet
