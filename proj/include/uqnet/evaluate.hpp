#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "uqnet/data.hpp"
#include "uqnet/ensemble.hpp"
#include "uqnet/math.hpp"
#include "uqnet/scoring.hpp"

namespace uqnet {

/// Predictive entropy in nats; 0*log(0) := 0.
inline double entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return std::max(h, 0.0);
}

struct CalibrationRow {
    double nominal{0.0};   // z level
    double observed{0.0};  // fraction of targets inside the z-interval
    int count{0};          // test-set size
};

struct CalibrationTable {
    std::vector<CalibrationRow> rows;

    double max_gap() const {
        double g = 0.0;
        for (const auto& r : rows) g = std::max(g, std::abs(r.observed - r.nominal));
        return g;
    }
};

inline std::vector<double> default_z_levels() {
    return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

/// Central prediction intervals from Gaussian quantiles: the z-level interval
/// is mean +- Phi^-1((1+z)/2) * sd; observed is the fraction of targets
/// strictly inside.
inline CalibrationTable calibration_curve(std::span<const GaussianOutput> preds,
                                          std::span<const double> targets,
                                          std::span<const double> z_levels) {
    if (preds.empty()) throw std::invalid_argument("calibration_curve: empty prediction set");
    if (preds.size() != targets.size())
        throw std::invalid_argument("calibration_curve: prediction/target mismatch");
    CalibrationTable table;
    for (double z : z_levels) {
        if (!(z > 0.0 && z < 1.0))
            throw std::invalid_argument("calibration_curve: z level must be in (0,1)");
        const double half_width = normal_quantile(0.5 * (1.0 + z));
        int inside = 0;
        for (size_t i = 0; i < preds.size(); ++i) {
            if (!(preds[i].variance > 0.0))
                throw std::invalid_argument("calibration_curve: variance must be positive");
            const double sd = std::sqrt(preds[i].variance);
            if (std::abs(targets[i] - preds[i].mean) < half_width * sd) ++inside;
        }
        table.rows.push_back(
            {z, static_cast<double>(inside) / static_cast<double>(preds.size()),
             static_cast<int>(preds.size())});
    }
    return table;
}

struct EntropyHistogram {
    std::vector<double> edges;   // bins+1 edges over [0, ln K]
    std::vector<double> masses;  // normalized, sums to 1
};

inline EntropyHistogram entropy_histogram(const std::vector<std::vector<double>>& probs,
                                          int bins, int num_classes) {
    if (probs.empty()) throw std::invalid_argument("entropy_histogram: empty input");
    if (bins < 1) throw std::invalid_argument("entropy_histogram: bins must be >= 1");
    if (num_classes < 2) throw std::invalid_argument("entropy_histogram: need K >= 2");
    const double hi = std::log(static_cast<double>(num_classes));
    EntropyHistogram hist;
    hist.edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) hist.edges[b] = hi * static_cast<double>(b) / bins;
    hist.masses.assign(bins, 0.0);
    for (const auto& p : probs) {
        const double h = std::min(entropy(p), hi);
        const int b = std::min(static_cast<int>(h / hi * bins), bins - 1);
        hist.masses[b] += 1.0;
    }
    for (double& m : hist.masses) m /= static_cast<double>(probs.size());
    return hist;
}

struct ConfidencePoint {
    double tau{0.0};
    double accuracy{0.0};  // NaN when nothing is retained
    int retained{0};
};

struct ConfidenceAccuracyCurve {
    std::vector<ConfidencePoint> points;
};

inline std::vector<double> default_tau_grid() {
    std::vector<double> taus;
    for (int i = 0; i <= 20; ++i) taus.push_back(0.05 * i);
    return taus;
}

/// Accuracy over examples whose confidence reaches each threshold. Labels may
/// be kUnknownClassLabel (out-of-distribution), which always scores as
/// incorrect.
inline ConfidenceAccuracyCurve confidence_accuracy_curve(
    const std::vector<std::vector<double>>& probs, std::span<const int> labels,
    std::span<const double> tau_grid) {
    if (tau_grid.empty()) throw std::invalid_argument("confidence_accuracy_curve: empty tau grid");
    if (probs.size() != labels.size())
        throw std::invalid_argument("confidence_accuracy_curve: prediction/label mismatch");
    ConfidenceAccuracyCurve curve;
    for (double tau : tau_grid) {
        int retained = 0, correct = 0;
        for (size_t i = 0; i < probs.size(); ++i) {
            if (confidence(probs[i]) < tau) continue;
            ++retained;
            if (labels[i] != kUnknownClassLabel && argmax_class(probs[i]) == labels[i]) ++correct;
        }
        ConfidencePoint pt;
        pt.tau = tau;
        pt.retained = retained;
        pt.accuracy = retained > 0
                          ? static_cast<double>(correct) / static_cast<double>(retained)
                          : std::numeric_limits<double>::quiet_NaN();
        curve.points.push_back(pt);
    }
    return curve;
}

struct EvalReport {
    TaskKind task{TaskKind::Regression};
    int n_examples{0};
    double nll{0.0};
    double mean_disagreement{0.0};
    // regression
    std::optional<double> rmse;
    std::optional<CalibrationTable> calibration;
    // classification
    std::optional<double> brier;
    std::optional<double> accuracy;
    std::optional<double> top_k_error;
    int top_k{0};
    std::optional<double> mean_entropy;
    std::optional<EntropyHistogram> entropy_hist;
    std::optional<ConfidenceAccuracyCurve> confidence_curve;
};

/// Scalar metrics for regression predictions, in the units of the inputs.
inline EvalReport evaluate(const std::vector<CombinedPrediction>& preds,
                           std::span<const double> targets) {
    if (preds.empty()) throw std::invalid_argument("evaluate: empty prediction set");
    if (preds.size() != targets.size())
        throw std::invalid_argument("evaluate: prediction/target mismatch");
    EvalReport rep;
    rep.task = TaskKind::Regression;
    rep.n_examples = static_cast<int>(preds.size());
    double nll = 0.0, sq = 0.0, dis = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
        const auto& g = as_gaussian(preds[i].distribution);
        nll += gaussian_nll(g, targets[i]);
        const double r = targets[i] - g.mean;
        sq += r * r;
        dis += preds[i].disagreement;
    }
    rep.nll = nll / preds.size();
    rep.rmse = std::sqrt(sq / preds.size());
    rep.mean_disagreement = dis / preds.size();
    return rep;
}

/// Scalar metrics for classification predictions. Also cross-checks the
/// mixture log-score against the mean member log-score (Jensen), which any
/// correct uniform-mixture implementation must satisfy.
inline EvalReport evaluate(const std::vector<CombinedPrediction>& preds,
                           std::span<const int> labels) {
    if (preds.empty()) throw std::invalid_argument("evaluate: empty prediction set");
    if (preds.size() != labels.size())
        throw std::invalid_argument("evaluate: prediction/label mismatch");
    EvalReport rep;
    rep.task = TaskKind::Classification;
    rep.n_examples = static_cast<int>(preds.size());

    const int k = static_cast<int>(as_probs(preds.front().distribution).size());
    rep.top_k = std::min(5, k);
    double nll = 0.0, member_nll = 0.0, br = 0.0, ent = 0.0, dis = 0.0;
    int correct = 0, top_k_miss = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        const int label = labels[i];
        if (label == kUnknownClassLabel)
            throw std::invalid_argument("evaluate: unknown-class sentinel cannot be scored");
        const auto& p = as_probs(preds[i].distribution);
        nll += cross_entropy(p, label);
        double m = 0.0;
        for (const auto& md : preds[i].member_distributions) m += cross_entropy(as_probs(md), label);
        member_nll += m / preds[i].member_distributions.size();
        br += brier(p, label);
        ent += entropy(p);
        dis += preds[i].disagreement;
        if (argmax_class(p) == label) ++correct;

        int above = 0;  // classes scoring strictly above the true label
        for (double q : p)
            if (q > p[label]) ++above;
        if (above >= rep.top_k) ++top_k_miss;
    }
    rep.nll = nll / preds.size();
    rep.brier = br / preds.size();
    rep.accuracy = static_cast<double>(correct) / preds.size();
    rep.top_k_error = static_cast<double>(top_k_miss) / preds.size();
    rep.mean_entropy = ent / preds.size();
    rep.mean_disagreement = dis / preds.size();

    if (rep.nll > member_nll / preds.size() + 1e-9)
        throw std::logic_error("evaluate: mixture NLL exceeds mean member NLL (Jensen violated)");
    return rep;
}

}  // namespace uqnet
