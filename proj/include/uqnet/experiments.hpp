#pragma once

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqnet/csv.hpp"
#include "uqnet/pipeline.hpp"
#include "uqnet/report_io.hpp"
#include "uqnet/serialize.hpp"

namespace uqnet {

inline std::string fmt_mean_sd(double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", mean, sd);
    return buf;
}

namespace detail {

struct MeanSd {
    double mean{0.0};
    double sd{0.0};  // sample standard deviation
};

inline MeanSd mean_sd(const std::vector<double>& v) {
    MeanSd r;
    for (double x : v) r.mean += x;
    r.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double s = 0.0;
        for (double x : v) s += (x - r.mean) * (x - r.mean);
        r.sd = std::sqrt(s / static_cast<double>(v.size() - 1));
    }
    return r;
}

inline nlohmann::json mean_sd_json(const MeanSd& m) {
    return {{"mean", m.mean}, {"sd", m.sd}, {"formatted", fmt_mean_sd(m.mean, m.sd)}};
}

inline void ensure_out_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
}

/// Split one dataset into (train, test) with a seeded shuffle.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_fraction,
                                                    uint64_t seed) {
    FoldSpec spec;
    spec.n_folds = 1;
    spec.test_fraction = test_fraction;
    spec.seed = seed;
    const auto fold = make_folds(ds, spec).front();
    return {subset(ds, fold.train), subset(ds, fold.test)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// toy: one-dimensional cubic regression, four model variants on a dense grid
// ---------------------------------------------------------------------------

struct ToyOptions {
    int n_train{20};
    double noise_sd{3.0};
    double train_lo{-4.0}, train_hi{4.0};
    double grid_lo{-6.0}, grid_hi{6.0};
    int grid_points{241};
    int n_test{1000};
    std::vector<int> hidden_sizes{100};
    int members{5};
    int epochs{10000};
    int batch_size{20};
    double learning_rate{0.02};
    double eps_fraction{0.01};
    uint64_t seed{42};
    int workers{1};
    std::filesystem::path out_dir{"out"};

    nlohmann::json to_json() const {
        return {{"command", "toy"},       {"n_train", n_train},
                {"noise_sd", noise_sd},   {"train_lo", train_lo},
                {"train_hi", train_hi},   {"grid_lo", grid_lo},
                {"grid_hi", grid_hi},     {"grid_points", grid_points},
                {"n_test", n_test},       {"hidden_sizes", hidden_sizes},
                {"members", members},     {"epochs", epochs},
                {"batch_size", batch_size}, {"learning_rate", learning_rate},
                {"eps_fraction", eps_fraction}, {"seed", seed}};
    }
};

struct ToyVariantSummary {
    std::string tag;
    double nll_fresh{0.0};            // Gaussian NLL on fresh in-range data
    double sigma_at_lo{0.0};          // predictive sd at the grid edges
    double sigma_at_hi{0.0};
    double mean_sigma_in_range{0.0};  // mean predictive sd over the training range
};

struct ToyResult {
    std::vector<ToyVariantSummary> variants;
};

inline ToyResult run_toy(const ToyOptions& opts) {
    detail::ensure_out_dir(opts.out_dir);
    const Dataset train = toy_cubic(opts.n_train, opts.noise_sd, opts.train_lo, opts.train_hi,
                                    derive_seed(opts.seed, tag_hash("toy-train")));
    const Dataset fresh = toy_cubic(opts.n_test, opts.noise_sd, opts.train_lo, opts.train_hi,
                                    derive_seed(opts.seed, tag_hash("toy-test")));

    FitSettings s;
    s.hidden_sizes = opts.hidden_sizes;
    s.members = opts.members;
    s.epochs = opts.epochs;
    s.batch_size = opts.batch_size;
    s.learning_rate = opts.learning_rate;
    s.eps_fraction = opts.eps_fraction;
    s.workers = opts.workers;

    const std::vector<Variant> variants{Variant::EnsembleMse, Variant::Ml1, Variant::Ml1At,
                                        Variant::MlM};
    ToyResult result;
    nlohmann::json jvariants = nlohmann::json::array();
    for (Variant v : variants) {
        const std::string tag = variant_tag(v, opts.members);
        s.seed = derive_seed(opts.seed, tag_hash(tag));
        const FittedModel fm = fit_variant(v, train, s);

        CsvTable grid;
        grid.header = {"x", "mean", "stddev"};
        ToyVariantSummary sum;
        sum.tag = tag;
        int in_range = 0;
        for (int i = 0; i < opts.grid_points; ++i) {
            const double x = opts.grid_lo + (opts.grid_hi - opts.grid_lo) * i /
                                                static_cast<double>(opts.grid_points - 1);
            const double xv[1] = {x};
            const auto g = as_gaussian(predict_units(fm, xv, static_cast<uint64_t>(i)).distribution);
            const double sd = std::sqrt(g.variance);
            grid.rows.push_back({fmt_double(x), fmt_double(g.mean), fmt_double(sd)});
            if (i == 0) sum.sigma_at_lo = sd;
            if (i == opts.grid_points - 1) sum.sigma_at_hi = sd;
            if (x >= opts.train_lo && x <= opts.train_hi) {
                sum.mean_sigma_in_range += sd;
                ++in_range;
            }
        }
        sum.mean_sigma_in_range /= std::max(in_range, 1);
        write_csv(opts.out_dir / ("grid_" + tag + ".csv"), grid);

        sum.nll_fresh = evaluate_on(fm, fresh).nll;
        result.variants.push_back(sum);
        jvariants.push_back({{"variant", tag},
                             {"nll_fresh_test", sum.nll_fresh},
                             {"sigma_at_grid_lo", sum.sigma_at_lo},
                             {"sigma_at_grid_hi", sum.sigma_at_hi},
                             {"mean_sigma_in_train_range", sum.mean_sigma_in_range}});
    }

    write_json(opts.out_dir / "report.json",
               {{"config", opts.to_json()}, {"variants", jvariants}});
    return result;
}

// ---------------------------------------------------------------------------
// regress: repeated random train/test folds on a tabular regression dataset
// ---------------------------------------------------------------------------

struct RegressOptions {
    Variant variant{Variant::MlM};
    int members{5};
    int n_folds{20};
    double test_fraction{0.1};
    std::vector<int> hidden_sizes{50};
    int epochs{40};
    int batch_size{100};
    double learning_rate{0.01};
    double eps_fraction{0.01};
    DataSampling sampling{DataSampling::FullShuffled};
    uint64_t seed{42};
    int workers{1};
    std::filesystem::path out_dir{"out"};

    nlohmann::json to_json() const {
        return {{"command", "regress"},
                {"variant", variant_tag(variant, members)},
                {"members", members},
                {"n_folds", n_folds},
                {"test_fraction", test_fraction},
                {"hidden_sizes", hidden_sizes},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"learning_rate", learning_rate},
                {"eps_fraction", eps_fraction},
                {"bootstrap", sampling == DataSampling::Bootstrap},
                {"seed", seed}};
    }
};

struct RegressResult {
    std::vector<double> fold_nll, fold_rmse;
    detail::MeanSd nll, rmse;
};

namespace detail {

inline RegressResult regress_over_splits(const std::vector<std::pair<Dataset, Dataset>>& splits,
                                         const RegressOptions& opts) {
    detail::ensure_out_dir(opts.out_dir);
    FitSettings s;
    s.hidden_sizes = opts.hidden_sizes;
    s.members = opts.members;
    s.epochs = opts.epochs;
    s.batch_size = opts.batch_size;
    s.learning_rate = opts.learning_rate;
    s.eps_fraction = opts.eps_fraction;
    s.sampling = opts.sampling;
    s.workers = opts.workers;

    RegressResult result;
    CsvTable table;
    table.header = {"fold", "nll", "rmse"};
    for (size_t f = 0; f < splits.size(); ++f) {
        s.seed = derive_seed(opts.seed, tag_hash("fit"), static_cast<uint64_t>(f));
        const FittedModel fm = fit_variant(opts.variant, splits[f].first, s);
        const EvalReport rep = evaluate_on(fm, splits[f].second);
        result.fold_nll.push_back(rep.nll);
        result.fold_rmse.push_back(*rep.rmse);
        table.rows.push_back({std::to_string(f), fmt_double(rep.nll), fmt_double(*rep.rmse)});
    }
    write_csv(opts.out_dir / "folds.csv", table);

    result.nll = detail::mean_sd(result.fold_nll);
    result.rmse = detail::mean_sd(result.fold_rmse);
    write_json(opts.out_dir / "report.json",
               {{"config", opts.to_json()},
                {"folds", static_cast<int>(splits.size())},
                {"nll", detail::mean_sd_json(result.nll)},
                {"rmse", detail::mean_sd_json(result.rmse)}});
    return result;
}

}  // namespace detail

inline RegressResult run_regress(const Dataset& ds, const RegressOptions& opts) {
    if (ds.task != TaskKind::Regression)
        throw ConfigError("regress: requires a regression dataset");
    FoldSpec fold_spec;
    fold_spec.n_folds = opts.n_folds;
    fold_spec.test_fraction = opts.test_fraction;
    fold_spec.seed = derive_seed(opts.seed, tag_hash("folds"));
    const auto folds = make_folds(ds, fold_spec);

    std::vector<std::pair<Dataset, Dataset>> splits;
    splits.reserve(folds.size());
    for (const auto& f : folds) splits.emplace_back(subset(ds, f.train), subset(ds, f.test));
    return detail::regress_over_splits(splits, opts);
}

/// Fixed user-provided train/test split (single fold), for datasets whose
/// protocol prescribes one split instead of repeated random folds.
inline RegressResult run_regress_fixed(const Dataset& train, const Dataset& test,
                                       const RegressOptions& opts) {
    if (train.task != TaskKind::Regression || test.task != TaskKind::Regression)
        throw ConfigError("regress: requires regression datasets");
    if (train.dim() != test.dim())
        throw ConfigError("regress: train/test feature dimensions differ");
    std::vector<std::pair<Dataset, Dataset>> splits;
    splits.emplace_back(train, test);
    return detail::regress_over_splits(splits, opts);
}

// ---------------------------------------------------------------------------
// classify: accuracy/NLL/Brier as a function of ensemble size M
// ---------------------------------------------------------------------------

struct ClassifyOptions {
    std::vector<int> m_grid{1, 2, 3, 4, 5};
    double test_fraction{0.2};
    std::vector<int> hidden_sizes{64};
    int epochs{20};
    int batch_size{100};
    double learning_rate{0.01};
    double eps_fraction{0.01};
    double mc_dropout_rate{0.1};
    uint64_t seed{42};
    int workers{1};
    std::filesystem::path out_dir{"out"};

    nlohmann::json to_json() const {
        return {{"command", "classify"},
                {"m_grid", m_grid},
                {"test_fraction", test_fraction},
                {"hidden_sizes", hidden_sizes},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"learning_rate", learning_rate},
                {"eps_fraction", eps_fraction},
                {"mc_dropout_rate", mc_dropout_rate},
                {"seed", seed}};
    }
};

struct ClassifyRow {
    std::string variant;
    int m{0};
    double accuracy{0.0}, nll{0.0}, brier{0.0};
};

struct ClassifyResult {
    std::vector<ClassifyRow> rows;
};

namespace detail {

/// Per-example member (or MC-sample) predictions, computed once at the
/// largest M. Prefix ensembles reuse them: member m's stream never depends
/// on how many members exist, so the first M members of the maximal model
/// are exactly the M-member model.
inline std::vector<std::vector<PredictiveDistribution>> member_predictions(
    const FittedModel& fm, const Dataset& raw_test, int max_m) {
    std::vector<std::vector<PredictiveDistribution>> out(raw_test.size());
    for (int i = 0; i < raw_test.size(); ++i) {
        const auto x = fm.scaler.transform_features(raw_test.features.row(i));
        auto& dists = out[i];
        if (fm.mc_samples > 0) {
            const uint64_t ex_seed = derive_seed(fm.predict_seed, static_cast<uint64_t>(i));
            for (int s = 0; s < max_m; ++s)
                dists.push_back(forward(fm.ensemble.members.front(), x,
                                        ForwardMode::train_with_mask(
                                            derive_seed(ex_seed, static_cast<uint64_t>(s)))));
        } else {
            for (const auto& params : fm.ensemble.members)
                dists.push_back(forward(params, x, ForwardMode::eval()));
        }
    }
    return out;
}

inline std::vector<CombinedPrediction> combine_prefix(
    const std::vector<std::vector<PredictiveDistribution>>& member_preds, int m, TaskKind task,
    CombineRule rule) {
    std::vector<CombinedPrediction> out;
    out.reserve(member_preds.size());
    for (const auto& dists : member_preds) {
        std::vector<PredictiveDistribution> sub(dists.begin(), dists.begin() + m);
        out.push_back(combine_members(sub, task, rule));
    }
    return out;
}

}  // namespace detail

inline ClassifyResult run_classify(const Dataset& ds, const ClassifyOptions& opts) {
    if (ds.task != TaskKind::Classification)
        throw ConfigError("classify: requires a classification dataset");
    if (opts.m_grid.empty()) throw ConfigError("classify: empty M grid");
    detail::ensure_out_dir(opts.out_dir);

    const auto [train, test] =
        detail::train_test_split(ds, opts.test_fraction, derive_seed(opts.seed, tag_hash("split")));
    const int max_m = *std::max_element(opts.m_grid.begin(), opts.m_grid.end());

    FitSettings s;
    s.hidden_sizes = opts.hidden_sizes;
    s.members = max_m;
    s.epochs = opts.epochs;
    s.batch_size = opts.batch_size;
    s.learning_rate = opts.learning_rate;
    s.eps_fraction = opts.eps_fraction;
    s.mc_dropout_rate = opts.mc_dropout_rate;
    s.mc_samples = max_m;
    s.workers = opts.workers;

    const std::vector<std::pair<std::string, Variant>> family{
        {"ensemble", Variant::MlM},
        {"ensemble+at", Variant::MlMAt},
        {"ensemble+random-sign", Variant::RandomSign},
        {"mc-dropout", Variant::McDropout}};

    ClassifyResult result;
    CsvTable table;
    table.header = {"variant", "m", "accuracy", "nll", "brier"};
    for (const auto& [name, variant] : family) {
        s.seed = derive_seed(opts.seed, tag_hash(name));
        const FittedModel fm = fit_variant(variant, train, s);
        const auto member_preds = detail::member_predictions(fm, test, max_m);
        for (int m : opts.m_grid) {
            if (m < 1 || m > max_m) throw ConfigError("classify: invalid M in grid");
            const auto preds =
                detail::combine_prefix(member_preds, m, TaskKind::Classification,
                                       CombineRule::MomentMatchedMixture);
            const EvalReport rep = evaluate(preds, test.targets_class);
            ClassifyRow row{name, m, *rep.accuracy, rep.nll, *rep.brier};
            result.rows.push_back(row);
            table.rows.push_back({name, std::to_string(m), fmt_double(row.accuracy),
                                  fmt_double(row.nll), fmt_double(row.brier)});
        }
    }
    write_csv(opts.out_dir / "metrics_vs_m.csv", table);

    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& r : result.rows)
        jrows.push_back({{"variant", r.variant},
                         {"m", r.m},
                         {"accuracy", r.accuracy},
                         {"nll", r.nll},
                         {"brier", r.brier}});
    write_json(opts.out_dir / "report.json",
               {{"config", opts.to_json()},
                {"train_examples", train.size()},
                {"test_examples", test.size()},
                {"rows", jrows}});
    return result;
}

// ---------------------------------------------------------------------------
// ood: entropy histograms on known vs unknown classes + accuracy-vs-confidence
// ---------------------------------------------------------------------------

struct OodOptions {
    std::set<int> known_classes{0, 1, 2, 3, 4};
    std::vector<int> m_grid{1, 5};
    double test_fraction{0.2};
    int histogram_bins{50};
    std::vector<int> hidden_sizes{64};
    int epochs{20};
    int batch_size{100};
    double learning_rate{0.01};
    double eps_fraction{0.01};
    double mc_dropout_rate{0.1};
    uint64_t seed{42};
    int workers{1};
    std::filesystem::path out_dir{"out"};

    nlohmann::json to_json() const {
        return {{"command", "ood"},
                {"known_classes", std::vector<int>(known_classes.begin(), known_classes.end())},
                {"m_grid", m_grid},
                {"test_fraction", test_fraction},
                {"histogram_bins", histogram_bins},
                {"hidden_sizes", hidden_sizes},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"learning_rate", learning_rate},
                {"eps_fraction", eps_fraction},
                {"mc_dropout_rate", mc_dropout_rate},
                {"seed", seed}};
    }
};

struct OodEntry {
    std::string variant;
    int m{0};
    double mean_entropy_known{0.0};
    double mean_entropy_unknown{0.0};
};

struct OodResult {
    std::vector<OodEntry> entries;
};

/// Core protocol: train on known classes, histogram predictive entropy on
/// known/unknown test sets, and score the mixed set by confidence threshold.
inline OodResult run_ood_core(const Dataset& train, const Dataset& known_test,
                              const Dataset& unknown_test, const OodOptions& opts) {
    if (opts.m_grid.empty()) throw ConfigError("ood: empty M grid");
    detail::ensure_out_dir(opts.out_dir);
    const int max_m = *std::max_element(opts.m_grid.begin(), opts.m_grid.end());
    const int k = train.num_classes;

    FitSettings s;
    s.hidden_sizes = opts.hidden_sizes;
    s.members = max_m;
    s.epochs = opts.epochs;
    s.batch_size = opts.batch_size;
    s.learning_rate = opts.learning_rate;
    s.eps_fraction = opts.eps_fraction;
    s.mc_dropout_rate = opts.mc_dropout_rate;
    s.mc_samples = max_m;
    s.workers = opts.workers;

    const std::vector<std::pair<std::string, Variant>> family{
        {"ensemble", Variant::MlM},
        {"ensemble+at", Variant::MlMAt},
        {"mc-dropout", Variant::McDropout}};

    OodResult result;
    nlohmann::json jentries = nlohmann::json::array();
    for (const auto& [name, variant] : family) {
        s.seed = derive_seed(opts.seed, tag_hash(name));
        const FittedModel fm = fit_variant(variant, train, s);
        const auto known_preds = detail::member_predictions(fm, known_test, max_m);
        const auto unknown_preds = detail::member_predictions(fm, unknown_test, max_m);

        for (int m : opts.m_grid) {
            if (m < 1 || m > max_m) throw ConfigError("ood: invalid M in grid");
            auto probs_of = [&](const std::vector<std::vector<PredictiveDistribution>>& mp) {
                std::vector<std::vector<double>> probs;
                probs.reserve(mp.size());
                for (const auto& preds : detail::combine_prefix(
                         mp, m, TaskKind::Classification, CombineRule::MomentMatchedMixture))
                    probs.push_back(as_probs(preds.distribution));
                return probs;
            };
            const auto known_probs = probs_of(known_preds);
            const auto unknown_probs = probs_of(unknown_preds);

            const auto hist_known = entropy_histogram(known_probs, opts.histogram_bins, k);
            const auto hist_unknown = entropy_histogram(unknown_probs, opts.histogram_bins, k);
            const std::string stem = name + "_m" + std::to_string(m);
            write_csv(opts.out_dir / ("hist_" + stem + "_known.csv"), histogram_to_csv(hist_known));
            write_csv(opts.out_dir / ("hist_" + stem + "_unknown.csv"),
                      histogram_to_csv(hist_unknown));

            OodEntry e;
            e.variant = name;
            e.m = m;
            for (const auto& p : known_probs) e.mean_entropy_known += entropy(p);
            e.mean_entropy_known /= known_probs.size();
            for (const auto& p : unknown_probs) e.mean_entropy_unknown += entropy(p);
            e.mean_entropy_unknown /= unknown_probs.size();
            result.entries.push_back(e);
            jentries.push_back({{"variant", e.variant},
                                {"m", e.m},
                                {"mean_entropy_known", e.mean_entropy_known},
                                {"mean_entropy_unknown", e.mean_entropy_unknown}});

            // mixed-set accuracy-vs-confidence at the largest M
            if (m == max_m) {
                std::vector<std::vector<double>> mixed = known_probs;
                mixed.insert(mixed.end(), unknown_probs.begin(), unknown_probs.end());
                std::vector<int> labels = known_test.targets_class;
                labels.insert(labels.end(), unknown_test.targets_class.begin(),
                              unknown_test.targets_class.end());
                const auto taus = default_tau_grid();
                const auto curve = confidence_accuracy_curve(mixed, labels, taus);
                write_csv(opts.out_dir / ("curve_" + name + ".csv"), curve_to_csv(curve));
            }
        }
    }
    write_json(opts.out_dir / "report.json",
               {{"config", opts.to_json()},
                {"num_classes", k},
                {"train_examples", train.size()},
                {"known_test_examples", known_test.size()},
                {"unknown_test_examples", unknown_test.size()},
                {"entries", jentries}});
    return result;
}

/// Known/unknown drawn from one dataset via class membership.
inline OodResult run_ood(const Dataset& ds, const OodOptions& opts) {
    auto [known, unknown] = class_split(ds, opts.known_classes);
    const auto [train, known_test] = detail::train_test_split(
        known, opts.test_fraction, derive_seed(opts.seed, tag_hash("split")));
    return run_ood_core(train, known_test, unknown, opts);
}

/// Known/unknown from two separate sources; the unknown set is relabeled with
/// the sentinel so it can only count as incorrect.
inline OodResult run_ood_two_sources(const Dataset& known_ds, const Dataset& unknown_ds,
                                     const OodOptions& opts) {
    if (known_ds.task != TaskKind::Classification || unknown_ds.task != TaskKind::Classification)
        throw ConfigError("ood: classification datasets required");
    if (known_ds.dim() != unknown_ds.dim())
        throw ConfigError("ood: known/unknown feature dimensions differ");
    const auto [train, known_test] = detail::train_test_split(
        known_ds, opts.test_fraction, derive_seed(opts.seed, tag_hash("split")));
    Dataset unknown = unknown_ds;
    for (int& c : unknown.targets_class) c = kUnknownClassLabel;
    unknown.num_classes = known_ds.num_classes;
    return run_ood_core(train, known_test, unknown, opts);
}

// ---------------------------------------------------------------------------
// calibrate: nominal-vs-observed interval coverage, learned vs empirical
// variance
// ---------------------------------------------------------------------------

struct CalibrateOptions {
    double test_fraction{0.3};
    int members{5};
    std::vector<int> hidden_sizes{50};
    int epochs{40};
    int batch_size{100};
    double learning_rate{0.01};
    double eps_fraction{0.01};
    uint64_t seed{42};
    int workers{1};
    std::filesystem::path out_dir{"out"};

    nlohmann::json to_json() const {
        return {{"command", "calibrate"},
                {"test_fraction", test_fraction},
                {"members", members},
                {"hidden_sizes", hidden_sizes},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"learning_rate", learning_rate},
                {"eps_fraction", eps_fraction},
                {"seed", seed}};
    }
};

struct CalibrateResult {
    CalibrationTable predicted;  // NLL-trained, learned variance
    CalibrationTable empirical;  // MSE-trained, member-spread variance
};

inline CalibrateResult run_calibrate(const Dataset& ds, const CalibrateOptions& opts) {
    if (ds.task != TaskKind::Regression)
        throw ConfigError("calibrate: requires a regression dataset");
    detail::ensure_out_dir(opts.out_dir);
    const auto [train, test] =
        detail::train_test_split(ds, opts.test_fraction, derive_seed(opts.seed, tag_hash("split")));

    FitSettings s;
    s.hidden_sizes = opts.hidden_sizes;
    s.members = opts.members;
    s.epochs = opts.epochs;
    s.batch_size = opts.batch_size;
    s.learning_rate = opts.learning_rate;
    s.eps_fraction = opts.eps_fraction;
    s.workers = opts.workers;

    const auto z = default_z_levels();
    auto table_for = [&](Variant v, const char* tag) {
        s.seed = derive_seed(opts.seed, tag_hash(tag));
        const FittedModel fm = fit_variant(v, train, s);
        std::vector<GaussianOutput> preds;
        preds.reserve(test.size());
        for (int i = 0; i < test.size(); ++i)
            preds.push_back(as_gaussian(
                predict_units(fm, test.features.row(i), static_cast<uint64_t>(i)).distribution));
        return calibration_curve(preds, test.targets_real, z);
    };

    CalibrateResult result;
    result.predicted = table_for(Variant::MlM, "predicted");
    result.empirical = table_for(Variant::EnsembleMse, "empirical");
    write_csv(opts.out_dir / "calibration_predicted.csv", calibration_to_csv(result.predicted));
    write_csv(opts.out_dir / "calibration_empirical.csv", calibration_to_csv(result.empirical));

    write_json(opts.out_dir / "report.json",
               {{"config", opts.to_json()},
                {"test_examples", test.size()},
                {"max_gap_predicted", result.predicted.max_gap()},
                {"max_gap_empirical", result.empirical.max_gap()}});
    return result;
}

// ---------------------------------------------------------------------------
// train: fit a variant on a full dataset and persist the model container
// ---------------------------------------------------------------------------

struct TrainOptions {
    Variant variant{Variant::MlM};
    int members{5};
    std::vector<int> hidden_sizes{50};
    int epochs{40};
    int batch_size{100};
    double learning_rate{0.1};
    double eps_fraction{0.01};
    double mc_dropout_rate{0.1};
    bool bootstrap{false};
    uint64_t seed{42};
    int workers{1};
    std::filesystem::path out_dir{"out"};

    nlohmann::json to_json() const {
        return {{"command", "train"},
                {"variant", variant_tag(variant, members)},
                {"members", members},
                {"hidden_sizes", hidden_sizes},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"learning_rate", learning_rate},
                {"eps_fraction", eps_fraction},
                {"mc_dropout_rate", mc_dropout_rate},
                {"bootstrap", bootstrap},
                {"seed", seed}};
    }
};

inline FittedModel run_train(const Dataset& ds, const TrainOptions& opts) {
    detail::ensure_out_dir(opts.out_dir);
    FitSettings s;
    s.hidden_sizes = opts.hidden_sizes;
    s.members = opts.members;
    s.epochs = opts.epochs;
    s.batch_size = opts.batch_size;
    s.learning_rate = opts.learning_rate;
    s.eps_fraction = opts.eps_fraction;
    s.mc_dropout_rate = opts.mc_dropout_rate;
    s.sampling = opts.bootstrap ? DataSampling::Bootstrap : DataSampling::FullShuffled;
    s.seed = derive_seed(opts.seed, tag_hash("fit"));
    s.workers = opts.workers;

    const FittedModel fm = fit_variant(opts.variant, ds, s);
    save_model(fm.ensemble, (opts.out_dir / "model.json").string(), fm.scaler);

    write_json(opts.out_dir / "report.json",
               {{"config", opts.to_json()},
                {"train_examples", ds.size()},
                {"model_file", "model.json"},
                {"member_seeds", fm.ensemble.manifest.member_seeds},
                {"config_hash", fm.ensemble.manifest.config_hash}});
    return fm;
}

}  // namespace uqnet
