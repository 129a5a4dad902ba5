#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqnet/adversarial.hpp"
#include "uqnet/data.hpp"
#include "uqnet/ensemble.hpp"
#include "uqnet/evaluate.hpp"

namespace uqnet {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// The model variants exercised by the experiment commands. Each tag pins the
/// loss / augmentation / combination settings so they cannot drift apart:
///   ensemble-mse  M nets, MSE loss, empirical variance of the means
///   ml-1          single net, NLL (or cross-entropy) loss
///   ml-1+at       ml-1 plus FGSM adversarial augmentation
///   ml-M          M-net ensemble, proper scoring rule loss
///   ml-M+at       ml-M plus FGSM adversarial augmentation
///   random-sign   ml-M with random signed perturbations instead of FGSM
///   mc-dropout    single net trained with dropout, sampled at predict time
enum class Variant { EnsembleMse, Ml1, Ml1At, MlM, MlMAt, RandomSign, McDropout };

inline Variant parse_variant(const std::string& tag) {
    if (tag == "ensemble-mse") return Variant::EnsembleMse;
    if (tag == "ml-1") return Variant::Ml1;
    if (tag == "ml-1+at") return Variant::Ml1At;
    if (tag == "ml-M" || tag == "ml-m") return Variant::MlM;
    if (tag == "ml-M+at" || tag == "ml-m+at") return Variant::MlMAt;
    if (tag == "random-sign") return Variant::RandomSign;
    if (tag == "mc-dropout") return Variant::McDropout;
    // explicit member counts: ml-<n>, ml-<n>+at
    if (tag.rfind("ml-", 0) == 0) {
        const bool at = tag.size() > 3 && tag.substr(tag.size() - 3) == "+at";
        const std::string num = at ? tag.substr(3, tag.size() - 6) : tag.substr(3);
        if (!num.empty() && num.find_first_not_of("0123456789") == std::string::npos) {
            const int m = std::stoi(num);
            if (m == 1) return at ? Variant::Ml1At : Variant::Ml1;
            if (m > 1) return at ? Variant::MlMAt : Variant::MlM;
        }
    }
    throw ConfigError("unknown variant tag '" + tag + "'");
}

inline std::string variant_tag(Variant v, int members) {
    switch (v) {
        case Variant::EnsembleMse: return "ensemble-mse";
        case Variant::Ml1: return "ml-1";
        case Variant::Ml1At: return "ml-1+at";
        case Variant::MlM: return "ml-" + std::to_string(members);
        case Variant::MlMAt: return "ml-" + std::to_string(members) + "+at";
        case Variant::RandomSign: return "random-sign";
        case Variant::McDropout: return "mc-dropout";
    }
    return "?";
}

inline int variant_members(Variant v, int members) {
    switch (v) {
        case Variant::Ml1:
        case Variant::Ml1At:
        case Variant::McDropout: return 1;
        default: return members;
    }
}

/// Settings each command hands to fit_variant; the variant decides the rest.
struct FitSettings {
    std::vector<int> hidden_sizes{50};
    int members{5};
    int epochs{40};
    int batch_size{100};
    double learning_rate{0.1};
    double eps_fraction{0.01};
    double mc_dropout_rate{0.1};
    int mc_samples{5};  // predict-time sample count for mc-dropout
    DataSampling sampling{DataSampling::FullShuffled};
    uint64_t seed{0};
    int workers{1};
};

/// A trained model plus the standardization that produced it. Predictions go
/// back out in original target units.
struct FittedModel {
    EnsembleModel ensemble;
    Standardizer scaler;
    Variant variant{Variant::MlM};
    int mc_samples{0};  // > 0 means MC-dropout prediction
    uint64_t predict_seed{0};
};

inline EnsembleConfig build_ensemble_config(Variant variant, const Dataset& raw_train,
                                            const FitSettings& s) {
    const TaskKind task = raw_train.task;
    if (variant == Variant::EnsembleMse && task != TaskKind::Regression)
        throw ConfigError("ensemble-mse is a regression-only variant");

    EnsembleConfig cfg;
    cfg.arch.input_dim = raw_train.dim();
    cfg.arch.hidden_sizes = s.hidden_sizes;
    cfg.arch.head = task == TaskKind::Regression
                        ? Head::gaussian_regression()
                        : Head::softmax_classification(raw_train.num_classes);
    cfg.arch.dropout_rate = variant == Variant::McDropout ? s.mc_dropout_rate : 0.0;
    cfg.members = variant_members(variant, s.members);
    switch (variant) {
        case Variant::EnsembleMse: cfg.loss = ScoringLoss::MSE; break;
        default:
            cfg.loss = task == TaskKind::Regression ? ScoringLoss::GaussianNLL
                                                    : ScoringLoss::CrossEntropy;
    }
    cfg.adversarial.mode = AdversarialMode::Off;
    if (variant == Variant::Ml1At || variant == Variant::MlMAt)
        cfg.adversarial.mode = AdversarialMode::FGSM;
    if (variant == Variant::RandomSign) cfg.adversarial.mode = AdversarialMode::RandomSign;
    cfg.adversarial.eps_fraction = s.eps_fraction;
    cfg.epochs = s.epochs;
    cfg.batch_size = s.batch_size;
    cfg.learning_rate = s.learning_rate;
    cfg.base_seed = s.seed;
    cfg.sampling = s.sampling;
    return cfg;
}

/// Standardize on the raw training split, move the epsilon budget into
/// standardized units, train, and wrap with the inverse transform.
/// Epsilon is defined on raw training-data ranges before standardization.
inline FittedModel fit_variant(Variant variant, const Dataset& raw_train, const FitSettings& s) {
    EnsembleConfig cfg = build_ensemble_config(variant, raw_train, s);

    const Standardizer scaler = Standardizer::fit(raw_train);
    const Dataset train = scaler.apply(raw_train);
    if (cfg.adversarial.mode != AdversarialMode::Off) {
        std::vector<double> eps = compute_eps(raw_train, cfg.adversarial.eps_fraction);
        for (size_t d = 0; d < eps.size(); ++d) eps[d] /= scaler.feature_scale[d];
        cfg.adversarial.eps_vector = std::move(eps);
    }

    FittedModel fm;
    fm.ensemble = train_ensemble(cfg, train, s.workers);
    fm.scaler = scaler;
    fm.variant = variant;
    if (variant == Variant::McDropout) {
        fm.mc_samples = s.mc_samples;
        fm.predict_seed = derive_seed(s.seed, tag_hash("mc-predict"));
    }
    return fm;
}

namespace detail {

inline void to_original_units(CombinedPrediction& pred, const Standardizer& scaler) {
    for (auto& d : pred.member_distributions)
        d = scaler.target_to_original(as_gaussian(d));
    pred.distribution = scaler.target_to_original(as_gaussian(pred.distribution));
    // Gaussian KL is invariant under the shared affine map, so disagreement stands.
}

}  // namespace detail

/// Predict on a raw-unit input; example_tag keys the MC-dropout sample stream
/// so batch evaluation is reproducible example by example.
inline CombinedPrediction predict_units(const FittedModel& fm, std::span<const double> raw_x,
                                        uint64_t example_tag = 0) {
    const std::vector<double> x = fm.scaler.transform_features(raw_x);
    CombinedPrediction pred =
        fm.mc_samples > 0
            ? mc_dropout_combined(fm.ensemble.members.front(), x, fm.mc_samples,
                                  derive_seed(fm.predict_seed, example_tag))
            : predict(fm.ensemble, x);
    if (fm.ensemble.task == TaskKind::Regression) detail::to_original_units(pred, fm.scaler);
    return pred;
}

inline std::vector<CombinedPrediction> predict_all(const FittedModel& fm, const Dataset& raw) {
    std::vector<CombinedPrediction> preds;
    preds.reserve(raw.size());
    for (int i = 0; i < raw.size(); ++i)
        preds.push_back(predict_units(fm, raw.features.row(i), static_cast<uint64_t>(i)));
    return preds;
}

/// Scalar metrics of a fitted model on a raw-unit dataset (regression scores
/// in original target units).
inline EvalReport evaluate_on(const FittedModel& fm, const Dataset& raw_test) {
    const auto preds = predict_all(fm, raw_test);
    if (raw_test.task == TaskKind::Regression)
        return evaluate(preds, raw_test.targets_real);
    return evaluate(preds, raw_test.targets_class);
}

}  // namespace uqnet
