// Acceptance suite: ten end-to-end checks with stated tolerances and runtime
// budgets, printed one pass/fail line per criterion. Exits nonzero if any
// criterion fails. Arguments: [cli-binary] [data-dir] [scratch-dir].

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "uqnet/csv.hpp"
#include "uqnet/experiments.hpp"
#include "uqnet/idx.hpp"

using namespace uqnet;
namespace fs = std::filesystem;

namespace {

struct Context {
    fs::path cli;
    fs::path data_dir{"data"};
    fs::path tmp{"acceptance_out"};
};

struct Outcome {
    bool pass{false};
    std::string detail;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1
Outcome gradient_correctness(const Context&) {
    Rng rng(818);
    double worst = 0.0;
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
        const bool cls = i % 2 == 0;
        const bool dropout = (i / 2) % 2 == 0;
        const double rate = dropout ? 0.25 : 0.0;
        const int dim = 2 + static_cast<int>(rng.next_below(5));
        std::vector<int> hidden{4 + static_cast<int>(rng.next_below(17))};
        const int extra_layers = static_cast<int>(rng.next_below(3));
        for (int l = 0; l < extra_layers; ++l)
            hidden.push_back(3 + static_cast<int>(rng.next_below(10)));

        ArchSpec arch;
        arch.input_dim = dim;
        arch.hidden_sizes = hidden;
        arch.dropout_rate = rate;
        arch.head = cls ? Head::softmax_classification(2 + static_cast<int>(rng.next_below(5)))
                        : Head::gaussian_regression();
        auto params = init_params(arch, 40000 + i);
        // nonzero biases keep pre-activations off exact ReLU kinks, where
        // central differences are invalid
        for (auto& b : params.biases)
            for (double& v : b) v = rng.uniform(-0.3, 0.3);

        ForwardMode mode = ForwardMode::eval();
        std::vector<double> x(dim);
        bool found = false;
        for (int mask = 0; mask < 5 && !found; ++mask) {
            mode = rate > 0 ? ForwardMode::train_with_mask(900 + i + 131 * mask)
                            : ForwardMode::eval();
            for (int attempt = 0; attempt < 200 && !found; ++attempt) {
                for (double& v : x) v = rng.normal();
                found = oracles::ref_min_hidden_margin(params, x, mode) > 1e-3;
            }
        }
        if (!found) return {false, "could not find a kink-free evaluation point"};

        oracles::Target t;
        std::vector<ScoringLoss> losses;
        if (cls) {
            t.label = static_cast<int>(rng.next_below(arch.head.num_classes));
            losses = {ScoringLoss::CrossEntropy, ScoringLoss::Brier};
        } else {
            t.y = rng.normal();
            losses = {ScoringLoss::GaussianNLL, ScoringLoss::MSE};
        }
        for (const auto loss : losses) {
            worst = std::max(worst, oracles::grad_check(params, x, t, loss, mode).max_rel_err);
            ++checked;
        }
    }
    return {worst < 1e-5,
            "max relative error " + fmt(worst) + " over " + std::to_string(checked) +
                " loss/net combinations (tolerance 1e-5)"};
}

// ---------------------------------------------------------------- criterion 2
Outcome mixture_moment_matching(const Context&) {
    Rng rng(505);
    double worst = 0.0;
    for (int set = 0; set < 20; ++set) {
        const int m = 1 + static_cast<int>(rng.next_below(10));
        std::vector<GaussianOutput> members;
        for (int i = 0; i < m; ++i)
            members.push_back({rng.uniform(5.0, 15.0), rng.uniform(0.05, 4.0)});
        const auto combined = combine_regression(members);

        const int n = 1000000;
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto& g = members[rng.next_below(static_cast<uint64_t>(m))];
            const double draw = g.mean + std::sqrt(g.variance) * rng.normal();
            s += draw;
            s2 += draw * draw;
        }
        const double mc_mean = s / n;
        const double mc_var = s2 / n - mc_mean * mc_mean;
        worst = std::max(worst, std::abs(combined.mean - mc_mean) / std::abs(mc_mean));
        worst = std::max(worst, std::abs(combined.variance - mc_var) / mc_var);
    }
    return {worst < 0.01, "max relative deviation from the 1e6-draw Monte Carlo oracle " +
                              fmt(worst) + " over 20 member sets (tolerance 1%)"};
}

// ---------------------------------------------------------------- criterion 3
Outcome bootstrap_unique_fraction(const Context&) {
    double lo = 1.0, hi = 0.0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const auto idx = bootstrap_indices(10000, derive_seed(777, seed));
        const std::set<int> unique(idx.begin(), idx.end());
        const double f = unique.size() / 10000.0;
        lo = std::min(lo, f);
        hi = std::max(hi, f);
    }
    return {lo >= 0.622 && hi <= 0.642,
            "unique fraction range [" + fmt(lo) + ", " + fmt(hi) + "] over 20 seeds (must sit in [0.622, 0.642])"};
}

// ---------------------------------------------------------------- criterion 4
Outcome toy_extrapolation(const Context&) {
    int good = 0;
    std::string per_seed;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset train = toy_cubic(20, 3.0, -4.0, 4.0, derive_seed(1000, seed));
        const Dataset fresh = toy_cubic(1000, 3.0, -4.0, 4.0, derive_seed(2000, seed));

        FitSettings s;
        s.hidden_sizes = {100};
        s.members = 5;
        s.epochs = 10000;
        s.batch_size = 20;
        s.learning_rate = 0.02;
        s.workers = 5;

        s.seed = derive_seed(3000, seed);
        const FittedModel ml5 = fit_variant(Variant::MlM, train, s);
        s.seed = derive_seed(4000, seed);
        const FittedModel mse = fit_variant(Variant::EnsembleMse, train, s);

        auto sd_at = [&](const FittedModel& fm, double x) {
            const double xv[1] = {x};
            return std::sqrt(as_gaussian(predict_units(fm, xv).distribution).variance);
        };
        double in_range = 0.0;
        int n_in = 0;
        for (double x = -4.0; x <= 4.0 + 1e-9; x += 0.1) {
            in_range += sd_at(ml5, x);
            ++n_in;
        }
        in_range /= n_in;
        const double edge = std::min(sd_at(ml5, -6.0), sd_at(ml5, 6.0));

        const double nll_ml5 = evaluate_on(ml5, fresh).nll;
        const double nll_mse = evaluate_on(mse, fresh).nll;

        const bool ok = edge >= 2.0 * in_range && nll_ml5 < nll_mse;
        good += ok ? 1 : 0;
        per_seed += (per_seed.empty() ? "" : ", ") + std::string(ok ? "y" : "n") + "(ratio " +
                    fmt(edge / in_range) + ", nll " + fmt(nll_ml5) + " vs " + fmt(nll_mse) + ")";
    }
    return {good >= 4, "edge-sigma >= 2x in-range sigma and NLL(ml-5) < NLL(ensemble-mse) on " +
                           std::to_string(good) + "/5 seeds: " + per_seed};
}

// ---------------------------------------------------------------- criterion 5
Outcome regression_benchmark(const Context& ctx) {
    const fs::path boston = ctx.data_dir / "boston.csv";
    const bool have_boston = fs::exists(boston);
    Dataset ds;
    if (have_boston) {
        ds = load_csv(boston.string(), {"medv", TaskKind::Regression});
    } else {
        ds = load_csv((ctx.data_dir / "synthetic_heteroscedastic.csv").string(),
                      {"y", TaskKind::Regression});
    }

    RegressOptions o;
    o.members = 5;
    o.n_folds = 20;
    o.hidden_sizes = {50};
    o.epochs = 40;
    o.batch_size = 100;
    o.learning_rate = 0.01;
    o.seed = 42;
    o.workers = 6;

    o.variant = Variant::MlM;
    o.out_dir = ctx.tmp / "regress_ml5";
    const auto ml5 = run_regress(ds, o);
    o.variant = Variant::Ml1;
    o.out_dir = ctx.tmp / "regress_ml1";
    const auto ml1 = run_regress(ds, o);  // same seed => identical folds

    const bool directional = ml5.nll.mean <= ml1.nll.mean;
    if (have_boston) {
        const bool in_band = ml5.nll.mean >= 2.41 - 0.50 && ml5.nll.mean <= 2.41 + 0.50;
        return {directional && in_band,
                "boston: ml-5 NLL " + fmt(ml5.nll.mean) + " (band 2.41 +- 0.50), ml-1 NLL " +
                    fmt(ml1.nll.mean)};
    }
    return {directional, "bundled synthetic dataset (boston.csv absent): ml-5 NLL " +
                             fmt(ml5.nll.mean) + " <= ml-1 NLL " + fmt(ml1.nll.mean) +
                             " over 20 identical folds"};
}

// ------------------------------------------------------- criteria 6/7 helpers
Dataset load_digits(const Context& ctx, int limit = 1000000) {
    return load_idx((ctx.data_dir / "digits-images.idx3-ubyte").string(),
                    (ctx.data_dir / "digits-labels.idx1-ubyte").string(), limit);
}

struct PrefixEval {
    EvalReport at_m1;
    EvalReport at_max;
};

// ---------------------------------------------------------------- criterion 6
Outcome classification_trend(const Context& ctx) {
    const Dataset digits = load_digits(ctx);
    int good = 0;
    std::string per_seed;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const auto [train, test] =
            detail::train_test_split(digits, 0.5, derive_seed(600, seed));

        FitSettings s;
        s.hidden_sizes = {64};
        s.members = 5;
        s.epochs = 10;
        s.batch_size = 100;
        s.learning_rate = 0.01;
        s.mc_samples = 5;
        s.workers = 5;

        s.seed = derive_seed(610, seed);
        const FittedModel ens = fit_variant(Variant::MlM, train, s);
        const auto member_preds = detail::member_predictions(ens, test, 5);
        const auto ens5 = evaluate(detail::combine_prefix(member_preds, 5,
                                                          TaskKind::Classification,
                                                          CombineRule::MomentMatchedMixture),
                                   test.targets_class);
        const auto ens1 = evaluate(detail::combine_prefix(member_preds, 1,
                                                          TaskKind::Classification,
                                                          CombineRule::MomentMatchedMixture),
                                   test.targets_class);

        s.seed = derive_seed(620, seed);
        const FittedModel mcd = fit_variant(Variant::McDropout, train, s);
        const auto mcd5 = evaluate_on(mcd, test);

        const bool ok = ens5.nll < ens1.nll && *ens5.brier < *ens1.brier &&
                        ens5.nll < mcd5.nll && *ens5.brier < *mcd5.brier;
        good += ok ? 1 : 0;
        per_seed += (per_seed.empty() ? "" : ", ") + std::string(ok ? "y" : "n") + "(nll " +
                    fmt(ens5.nll) + "/" + fmt(ens1.nll) + "/" + fmt(mcd5.nll) + ")";
    }
    return {good >= 4, "M=5 ensemble beats M=1 and MC-dropout(S=5) on NLL+Brier for " +
                           std::to_string(good) + "/5 seeds: " + per_seed};
}

// ---------------------------------------------------------------- criterion 7
Outcome ood_entropy(const Context& ctx) {
    const Dataset digits = load_digits(ctx);
    const auto [known, unknown] = class_split(digits, {0, 1, 2, 3, 4});
    int good = 0;
    std::string per_seed;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const auto [train, known_test] =
            detail::train_test_split(known, 0.2, derive_seed(700, seed));

        FitSettings s;
        s.hidden_sizes = {64};
        s.members = 5;
        s.epochs = 20;
        s.batch_size = 100;
        s.learning_rate = 0.01;
        s.workers = 5;
        s.seed = derive_seed(710, seed);
        const FittedModel ens = fit_variant(Variant::MlM, train, s);

        auto mean_entropy = [&](const Dataset& set, int m) {
            const auto member_preds = detail::member_predictions(ens, set, 5);
            double h = 0.0;
            for (const auto& pred : detail::combine_prefix(member_preds, m,
                                                           TaskKind::Classification,
                                                           CombineRule::MomentMatchedMixture))
                h += entropy(as_probs(pred.distribution));
            return h / set.size();
        };
        const double known5 = mean_entropy(known_test, 5);
        const double unknown5 = mean_entropy(unknown, 5);
        const double unknown1 = mean_entropy(unknown, 1);

        const bool ok = unknown5 > known5 && unknown5 > unknown1;
        good += ok ? 1 : 0;
        per_seed += (per_seed.empty() ? "" : ", ") + std::string(ok ? "y" : "n") + "(H " +
                    fmt(known5) + " known, " + fmt(unknown5) + " unknown@5, " + fmt(unknown1) +
                    " unknown@1)";
    }
    return {good >= 4, "unknown-class entropy exceeds known and grows with M for " +
                           std::to_string(good) + "/5 seeds: " + per_seed};
}

// ---------------------------------------------------------------- criterion 8
Outcome calibration_gap(const Context&) {
    const Dataset train = oracles::make_hetero(1500, 808);
    const Dataset test = oracles::make_hetero(1500, 809);

    FitSettings s;
    s.hidden_sizes = {50};
    s.members = 5;
    s.epochs = 40;
    s.batch_size = 100;
    s.learning_rate = 0.01;
    s.workers = 5;

    auto table_for = [&](Variant v, uint64_t seed) {
        s.seed = seed;
        const FittedModel fm = fit_variant(v, train, s);
        std::vector<GaussianOutput> preds;
        for (int i = 0; i < test.size(); ++i)
            preds.push_back(as_gaussian(
                predict_units(fm, test.features.row(i), static_cast<uint64_t>(i)).distribution));
        return calibration_curve(preds, test.targets_real, default_z_levels());
    };
    const auto predicted = table_for(Variant::MlM, 81);
    const auto empirical = table_for(Variant::EnsembleMse, 82);

    double emp_at_08 = 1.0;
    for (const auto& r : empirical.rows)
        if (std::abs(r.nominal - 0.8) < 1e-9) emp_at_08 = r.observed;

    const bool ok = predicted.max_gap() < empirical.max_gap() && emp_at_08 < 0.8;
    return {ok, "coverage gap " + fmt(predicted.max_gap()) + " (learned variance) vs " +
                    fmt(empirical.max_gap()) + " (empirical variance); empirical covers " +
                    fmt(emp_at_08) + " at the 0.8 interval (undercoverage required)"};
}

// ---------------------------------------------------------------- criterion 9
Outcome scoring_identities(const Context&) {
    const std::vector<double> uniform(10, 0.1);
    const double ce = cross_entropy(uniform, 3);
    const double bs = brier(uniform, 3);
    const double nll = gaussian_nll({0.0, 1.0}, 0.0);
    const double dis = disagreement({{1.0, 0.0}, {0.0, 1.0}});

    const bool ok = std::abs(ce - std::log(10.0)) < 1e-6 && std::abs(bs - 0.09) < 1e-6 &&
                    std::abs(nll - 0.5 * std::log(2.0 * M_PI)) < 1e-6 &&
                    std::abs(dis - 2.0 * std::log(2.0)) < 1e-6;
    return {ok, "ln10=" + fmt(ce) + ", brier=" + fmt(bs) + ", half-ln-2pi=" + fmt(nll) +
                    ", 2ln2=" + fmt(dis) + " (all to 1e-6)"};
}

// --------------------------------------------------------------- criterion 10
int run_cli(const Context& ctx, const std::string& args, const fs::path& log) {
    const std::string cmd = ctx.cli.string() + " " + args + " > " + log.string() + " 2>&1";
    return std::system(cmd.c_str());
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[fs::relative(e.path(), dir).string()] =
            std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return out;
}

Outcome cli_determinism(const Context& ctx) {
    if (ctx.cli.empty() || !fs::exists(ctx.cli))
        return {false, "CLI binary not found at '" + ctx.cli.string() + "'"};
    const fs::path base = ctx.tmp / "determinism";
    fs::remove_all(base);
    fs::create_directories(base);

    const fs::path toy_cfg = base / "toy.json";
    std::ofstream(toy_cfg) << R"({"epochs": 60, "grid_points": 25, "n_test": 50,)"
                           << R"( "hidden_sizes": [16], "members": 3})";
    for (const auto& [name, workers] :
         std::vector<std::pair<std::string, int>>{{"a", 1}, {"b", 4}, {"c", 1}}) {
        const int rc = run_cli(ctx,
                               "toy --config " + toy_cfg.string() + " --seed 3 --out " +
                                   (base / ("toy_" + name)).string() + " --workers " +
                                   std::to_string(workers),
                               base / ("toy_" + name + ".log"));
        if (rc != 0) return {false, "toy run '" + name + "' exited with " + std::to_string(rc)};
    }
    if (dir_contents(base / "toy_a") != dir_contents(base / "toy_b"))
        return {false, "toy outputs differ between --workers 1 and --workers 4"};
    if (dir_contents(base / "toy_a") != dir_contents(base / "toy_c"))
        return {false, "toy outputs differ across identical reruns"};

    const fs::path cls_cfg = base / "classify.json";
    std::ofstream(cls_cfg) << R"({"epochs": 3, "hidden_sizes": [16], "m_grid": [1, 2],)"
                           << R"( "test_fraction": 0.3})";
    const std::string dataset_args = " --images " +
                                     (ctx.data_dir / "digits-images.idx3-ubyte").string() +
                                     " --labels " +
                                     (ctx.data_dir / "digits-labels.idx1-ubyte").string() +
                                     " --limit 400";
    for (const auto& [name, workers] :
         std::vector<std::pair<std::string, int>>{{"a", 1}, {"b", 2}}) {
        const int rc = run_cli(ctx,
                               "classify --config " + cls_cfg.string() + dataset_args +
                                   " --seed 5 --out " + (base / ("cls_" + name)).string() +
                                   " --workers " + std::to_string(workers),
                               base / ("cls_" + name + ".log"));
        if (rc != 0)
            return {false, "classify run '" + name + "' exited with " + std::to_string(rc)};
    }
    if (dir_contents(base / "cls_a") != dir_contents(base / "cls_b"))
        return {false, "classify outputs differ between --workers 1 and --workers 2"};

    // --print-config echoes the resolved config without running anything
    for (const char* name : {"pc_a.log", "pc_b.log"}) {
        const int rc = run_cli(ctx, "toy --config " + toy_cfg.string() + " --seed 3 --print-config",
                               base / name);
        if (rc != 0) return {false, "--print-config exited nonzero"};
    }
    std::ifstream pa(base / "pc_a.log"), pb(base / "pc_b.log");
    const std::string sa((std::istreambuf_iterator<char>(pa)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(pb)), std::istreambuf_iterator<char>());
    if (sa != sb || sa.find("\"command\": \"toy\"") == std::string::npos)
        return {false, "--print-config output unstable or missing the resolved command"};

    // failures exit nonzero with a single-line machine-parseable error
    const int bad_rc = run_cli(ctx,
                               "regress --csv " + (base / "no_such.csv").string() +
                                   " --target y --out " + (base / "bad").string(),
                               base / "bad.log");
    if (bad_rc == 0) return {false, "missing-file run unexpectedly succeeded"};
    std::ifstream bl(base / "bad.log");
    std::string first_line;
    std::getline(bl, first_line);
    if (first_line.rfind("error: ", 0) != 0)
        return {false, "error output is not a single 'error: ...' line"};

    return {true, "toy and classify reruns byte-identical (workers varied); --print-config and "
                  "error paths behave"};
}

}  // namespace

int main(int argc, char** argv) {
    Context ctx;
    if (argc > 1) ctx.cli = argv[1];
    if (argc > 2) ctx.data_dir = argv[2];
    if (argc > 3) ctx.tmp = argv[3];
    fs::create_directories(ctx.tmp);

    struct Criterion {
        int id;
        std::string name;
        double budget_seconds;
        std::function<Outcome(const Context&)> run;
    };
    const std::vector<Criterion> criteria{
        {1, "gradient correctness vs finite differences", 30, gradient_correctness},
        {2, "regression mixture moment matching vs Monte Carlo", 60, mixture_moment_matching},
        {3, "bootstrap unique-sample fraction", 60, bootstrap_unique_fraction},
        {4, "toy cubic extrapolation bands and NLL ordering", 300, toy_extrapolation},
        {5, "regression benchmark folds (ml-5 vs ml-1)", 900, regression_benchmark},
        {6, "classification trend across ensemble size", 1200, classification_trend},
        {7, "out-of-distribution predictive entropy", 600, ood_entropy},
        {8, "interval calibration: learned vs empirical variance", 300, calibration_gap},
        {9, "scoring-rule closed-form identities", 10, scoring_identities},
        {10, "CLI rerun determinism (workers varied)", 300, cli_determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run(ctx);
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_budget = elapsed < c.budget_seconds;
        const bool pass = out.pass && in_budget;
        if (!pass) ++failures;
        std::printf("[%s] criterion %d: %s — %s [%.1fs%s]\n", pass ? "PASS" : "FAIL", c.id,
                    c.name.c_str(), out.detail.c_str(), elapsed,
                    in_budget ? "" : ", over budget");
        std::fflush(stdout);
    }
    if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
    return failures;
}
