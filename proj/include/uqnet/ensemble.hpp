#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqnet/adam.hpp"
#include "uqnet/adversarial.hpp"
#include "uqnet/data.hpp"
#include "uqnet/network.hpp"
#include "uqnet/rng.hpp"
#include "uqnet/scoring.hpp"
#include "uqnet/threadpool.hpp"

namespace uqnet {

enum class DataSampling { FullShuffled, Bootstrap };

struct EnsembleConfig {
    int members{5};
    ArchSpec arch;
    ScoringLoss loss{ScoringLoss::GaussianNLL};
    AdversarialConfig adversarial{};
    int epochs{40};
    int batch_size{100};
    double learning_rate{0.1};
    uint64_t base_seed{0};
    DataSampling sampling{DataSampling::FullShuffled};

    void validate() const {
        arch.validate();
        if (members < 1) throw std::invalid_argument("EnsembleConfig: members must be >= 1");
        if (epochs < 1) throw std::invalid_argument("EnsembleConfig: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("EnsembleConfig: batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("EnsembleConfig: learning_rate must be > 0");
        if (!loss_matches_task(loss, arch.head.task))
            throw std::invalid_argument("EnsembleConfig: loss does not match head");
        adversarial.validate(arch.input_dim);
    }

    /// Stable fingerprint of every training-relevant field, for the manifest.
    uint64_t hash() const {
        std::ostringstream os;
        os << members << '|' << arch.input_dim << '|';
        for (int h : arch.hidden_sizes) os << h << ',';
        os << '|' << static_cast<int>(arch.head.task) << '|' << arch.head.num_classes << '|'
           << arch.dropout_rate << '|' << static_cast<int>(loss) << '|'
           << static_cast<int>(adversarial.mode) << '|' << adversarial.eps_fraction << '|';
        for (double e : adversarial.eps_vector) os << e << ',';
        os << '|' << epochs << '|' << batch_size << '|' << learning_rate << '|' << base_seed
           << '|' << static_cast<int>(sampling);
        return tag_hash(os.str());
    }
};

/// How member predictions are reduced to one Gaussian on regression tasks.
/// MSE-trained ensembles have no usable variance head, so they fall back to
/// the empirical variance of the member means.
enum class CombineRule { MomentMatchedMixture, EmpiricalVariance };

struct TrainingManifest {
    std::vector<uint64_t> member_seeds;
    uint64_t config_hash{0};
};

struct EnsembleModel {
    std::vector<NetworkParams> members;
    ArchSpec arch;
    TaskKind task{TaskKind::Regression};
    CombineRule combine{CombineRule::MomentMatchedMixture};
    TrainingManifest manifest;

    int size() const { return static_cast<int>(members.size()); }
};

struct CombinedPrediction {
    PredictiveDistribution distribution;
    std::vector<PredictiveDistribution> member_distributions;
    double disagreement{0.0};  // nats
};

// ---------------------------------------------------------------------------
// Prediction combination
// ---------------------------------------------------------------------------

inline std::vector<double> combine_classification(
    const std::vector<std::vector<double>>& member_probs) {
    if (member_probs.empty()) throw std::invalid_argument("combine_classification: no members");
    const size_t k = member_probs.front().size();
    std::vector<double> mean(k, 0.0);
    for (const auto& p : member_probs) {
        if (p.size() != k) throw std::invalid_argument("combine_classification: ragged inputs");
        for (size_t i = 0; i < k; ++i) mean[i] += p[i];
    }
    for (double& v : mean) v /= static_cast<double>(member_probs.size());
    return mean;
}

/// Gaussian moment matching of the uniform mixture:
///   mu* = M^-1 sum mu_m
///   var* = M^-1 sum (var_m + mu_m^2) - mu*^2
/// computed in the centered form M^-1 sum var_m + M^-1 sum (mu_m - mu*)^2,
/// which is algebraically identical and immune to cancellation.
inline GaussianOutput combine_regression(std::span<const GaussianOutput> members) {
    if (members.empty()) throw std::invalid_argument("combine_regression: no members");
    double mu = 0.0;
    for (const auto& g : members) {
        if (!(g.variance > 0.0))
            throw std::invalid_argument("combine_regression: member variance must be positive");
        mu += g.mean;
    }
    mu /= static_cast<double>(members.size());
    double var = 0.0;
    for (const auto& g : members) {
        const double d = g.mean - mu;
        var += g.variance + d * d;
    }
    var /= static_cast<double>(members.size());
    return {mu, var};
}

/// Empirical variance of the member means (MSE-trained ensembles), floored so
/// the result stays a valid Gaussian even when members agree exactly.
inline GaussianOutput combine_empirical_variance(std::span<const GaussianOutput> members) {
    if (members.empty()) throw std::invalid_argument("combine_empirical_variance: no members");
    double mu = 0.0;
    for (const auto& g : members) mu += g.mean;
    mu /= static_cast<double>(members.size());
    double var = 0.0;
    for (const auto& g : members) {
        const double d = g.mean - mu;
        var += d * d;
    }
    var /= static_cast<double>(members.size());
    return {mu, std::max(var, kVarianceFloor)};
}

/// sum_m KL(p_m || p_E) in nats, where p_E is the member mean. Zero iff all
/// members coincide.
inline double disagreement(const std::vector<std::vector<double>>& member_probs) {
    const auto mean = combine_classification(member_probs);
    double total = 0.0;
    for (const auto& p : member_probs) total += kl_divergence(p, mean);
    return std::max(total, 0.0);
}

/// Gaussian analogue against the combined distribution.
inline double disagreement(std::span<const GaussianOutput> members, const GaussianOutput& combined) {
    double total = 0.0;
    for (const auto& g : members) {
        const double d = g.mean - combined.mean;
        total += 0.5 * std::log(combined.variance / g.variance) +
                 (g.variance + d * d) / (2.0 * combined.variance) - 0.5;
    }
    return std::max(total, 0.0);
}

// ---------------------------------------------------------------------------
// Training (Algorithm: M independent nets, random init, per-epoch reshuffle,
// optional adversarial minibatch augmentation, uniform mixture at predict time)
// ---------------------------------------------------------------------------

namespace detail {

inline void accumulate(Gradients& acc, const Gradients& g) {
    for (size_t l = 0; l < acc.weight_grads.size(); ++l) {
        auto& aw = acc.weight_grads[l].data;
        const auto& gw = g.weight_grads[l].data;
        for (size_t i = 0; i < aw.size(); ++i) aw[i] += gw[i];
        auto& ab = acc.bias_grads[l];
        const auto& gb = g.bias_grads[l];
        for (size_t i = 0; i < ab.size(); ++i) ab[i] += gb[i];
    }
    acc.loss += g.loss;
}

inline void scale(Gradients& acc, double factor) {
    for (auto& w : acc.weight_grads)
        for (double& v : w.data) v *= factor;
    for (auto& b : acc.bias_grads)
        for (double& v : b) v *= factor;
    acc.loss *= factor;
}

inline Gradients zero_like(const NetworkParams& params) {
    Gradients g;
    for (const Matrix& w : params.weights) g.weight_grads.emplace_back(w.rows, w.cols);
    for (const auto& b : params.biases) g.bias_grads.emplace_back(b.size(), 0.0);
    return g;
}

inline Gradients example_backward(const NetworkParams& params, std::span<const double> x,
                                  const Dataset& data, int row, ScoringLoss loss,
                                  ForwardMode mode) {
    if (data.task == TaskKind::Regression)
        return backward(params, x, data.targets_real[row], loss, mode);
    return backward(params, x, data.targets_class[row], loss, mode);
}

}  // namespace detail

inline uint64_t member_seed(uint64_t base_seed, int member_index) {
    return derive_seed(base_seed, static_cast<uint64_t>(member_index));
}

/// Train one ensemble member. Fully deterministic given (config, dataset,
/// member_index); every random stream is derived from the member seed, so
/// members never interact and can run on any schedule.
inline NetworkParams train_member(const EnsembleConfig& config, const Dataset& data,
                                  int member_index) {
    config.validate();
    data.validate();
    if (data.dim() != config.arch.input_dim)
        throw std::invalid_argument("train_member: dataset dimension does not match arch");
    if (config.arch.head.task != data.task)
        throw std::invalid_argument("train_member: dataset task does not match head");
    if (data.task == TaskKind::Classification && data.num_classes != config.arch.head.num_classes)
        throw std::invalid_argument("train_member: class count does not match head");

    const uint64_t seed = member_seed(config.base_seed, member_index);
    NetworkParams params = init_params(config.arch, derive_seed(seed, tag_hash("init")));
    AdamState adam = AdamState::for_params(params, config.learning_rate);

    const auto adv_mode = config.adversarial.mode;
    std::vector<double> eps = config.adversarial.eps_vector;
    if (adv_mode != AdversarialMode::Off && eps.empty())
        eps = compute_eps(data, config.adversarial.eps_fraction);

    std::vector<int> pool;
    if (config.sampling == DataSampling::Bootstrap) {
        pool = bootstrap_indices(data.size(), derive_seed(seed, tag_hash("bootstrap")));
    } else {
        pool.resize(data.size());
        for (int i = 0; i < data.size(); ++i) pool[i] = i;
    }

    uint64_t visit = 0;  // global example-visit counter; keys mask/perturb streams
    std::vector<double> x(data.dim());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(seed, tag_hash("shuffle"), static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(pool);

        for (size_t start = 0; start < pool.size(); start += config.batch_size) {
            const size_t stop = std::min(pool.size(), start + config.batch_size);
            Gradients acc = detail::zero_like(params);
            for (size_t b = start; b < stop; ++b) {
                const int row = pool[b];
                const auto feat = data.features.row(row);
                x.assign(feat.begin(), feat.end());
                const ForwardMode mode =
                    config.arch.dropout_rate > 0.0
                        ? ForwardMode::train_with_mask(derive_seed(seed, tag_hash("mask"), visit))
                        : ForwardMode{true, 0};

                Gradients g = detail::example_backward(params, x, data, row, config.loss, mode);
                if (!std::isfinite(g.loss))
                    throw std::runtime_error("train_member: non-finite loss at epoch " +
                                             std::to_string(epoch) + ", batch " +
                                             std::to_string(start / config.batch_size) +
                                             " (member " + std::to_string(member_index) + ")");
                if (adv_mode != AdversarialMode::Off) {
                    std::vector<double> xp =
                        adv_mode == AdversarialMode::FGSM
                            ? detail::fgsm_from_grad(x, g.input_grad, eps)
                            : random_sign_perturb(x, eps,
                                                  derive_seed(seed, tag_hash("perturb"), visit));
                    if (config.adversarial.clip)
                        for (double& v : xp)
                            v = std::clamp(v, config.adversarial.clip_lo,
                                           config.adversarial.clip_hi);
                    // same mask as the clean pass: both terms see one network
                    Gradients gp =
                        detail::example_backward(params, xp, data, row, config.loss, mode);
                    if (!std::isfinite(gp.loss))
                        throw std::runtime_error(
                            "train_member: non-finite adversarial loss at epoch " +
                            std::to_string(epoch) + ", batch " +
                            std::to_string(start / config.batch_size) + " (member " +
                            std::to_string(member_index) + ")");
                    detail::accumulate(g, gp);
                }
                detail::accumulate(acc, g);
                ++visit;
            }
            detail::scale(acc, 1.0 / static_cast<double>(stop - start));
            adam_step(params, acc, adam);
        }
    }
    return params;
}

/// Train all M members (embarrassingly parallel) and assemble the model.
inline EnsembleModel train_ensemble(const EnsembleConfig& config, const Dataset& data,
                                    int workers = 1) {
    config.validate();
    EnsembleModel model;
    model.arch = config.arch;
    model.task = config.arch.head.task;
    model.combine = (config.loss == ScoringLoss::MSE) ? CombineRule::EmpiricalVariance
                                                      : CombineRule::MomentMatchedMixture;
    model.manifest.config_hash = config.hash();
    model.members.resize(config.members);
    for (int m = 0; m < config.members; ++m)
        model.manifest.member_seeds.push_back(member_seed(config.base_seed, m));

    parallel_for_index(config.members, workers,
                       [&](int m) { model.members[m] = train_member(config, data, m); });
    return model;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

inline CombinedPrediction combine_members(const std::vector<PredictiveDistribution>& members,
                                          TaskKind task, CombineRule rule) {
    if (members.empty()) throw std::invalid_argument("combine_members: no members");
    CombinedPrediction out;
    out.member_distributions = members;
    if (task == TaskKind::Classification) {
        std::vector<std::vector<double>> probs;
        probs.reserve(members.size());
        for (const auto& d : members) probs.push_back(as_probs(d));
        out.distribution = Categorical{combine_classification(probs)};
        out.disagreement = disagreement(probs);
    } else {
        std::vector<GaussianOutput> gs;
        gs.reserve(members.size());
        for (const auto& d : members) gs.push_back(as_gaussian(d));
        const GaussianOutput combined = rule == CombineRule::EmpiricalVariance
                                            ? combine_empirical_variance(gs)
                                            : combine_regression(gs);
        out.distribution = combined;
        out.disagreement = disagreement(gs, combined);
    }
    return out;
}

inline CombinedPrediction predict(const EnsembleModel& model, std::span<const double> x) {
    std::vector<PredictiveDistribution> members;
    members.reserve(model.members.size());
    for (const auto& params : model.members)
        members.push_back(forward(params, x, ForwardMode::eval()));
    return combine_members(members, model.task, model.combine);
}

/// MC-dropout: average S stochastic forward passes with dropout live.
/// Classification averages probabilities; regression moment-matches the S
/// Gaussians exactly like an S-member ensemble.
inline CombinedPrediction mc_dropout_combined(const NetworkParams& params,
                                              std::span<const double> x, int samples,
                                              uint64_t seed) {
    if (params.arch.dropout_rate <= 0.0)
        throw std::invalid_argument("mc_dropout: dropout_rate must be > 0");
    if (samples < 1) throw std::invalid_argument("mc_dropout: need at least one sample");
    std::vector<PredictiveDistribution> passes;
    passes.reserve(samples);
    for (int s = 0; s < samples; ++s) {
        const uint64_t mask_seed = derive_seed(seed, static_cast<uint64_t>(s));
        passes.push_back(forward(params, x, ForwardMode::train_with_mask(mask_seed)));
    }
    return combine_members(passes, params.arch.head.task, CombineRule::MomentMatchedMixture);
}

inline PredictiveDistribution mc_dropout_predict(const NetworkParams& params,
                                                 std::span<const double> x, int samples,
                                                 uint64_t seed) {
    return mc_dropout_combined(params, x, samples, seed).distribution;
}

}  // namespace uqnet
