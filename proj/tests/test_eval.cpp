#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "uqnet/evaluate.hpp"

using namespace uqnet;

namespace {

CombinedPrediction categorical_pred(std::vector<double> probs) {
    CombinedPrediction p;
    p.member_distributions = {Categorical{probs}};
    p.distribution = Categorical{std::move(probs)};
    p.disagreement = 0.0;
    return p;
}

CombinedPrediction gaussian_pred(double mean, double var) {
    CombinedPrediction p;
    p.member_distributions = {GaussianOutput{mean, var}};
    p.distribution = GaussianOutput{mean, var};
    p.disagreement = 0.0;
    return p;
}

}  // namespace

TEST_CASE("entropy closed forms") {
    CHECK(entropy(std::vector<double>{0.0, 1.0, 0.0}) == 0.0);
    CHECK(entropy(std::vector<double>(10, 0.1)) ==
          Catch::Approx(2.302585092994046).margin(1e-9));
    CHECK(entropy(std::vector<double>{0.5, 0.25, 0.25}) ==
          Catch::Approx(1.0397207708399179).margin(1e-9));
}

TEST_CASE("evaluate: perfect and uniform classifiers") {
    std::vector<CombinedPrediction> perfect;
    std::vector<int> labels;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> probs(10, 0.0);
        probs[i % 10] = 1.0;
        perfect.push_back(categorical_pred(probs));
        labels.push_back(i % 10);
    }
    const auto rep = evaluate(perfect, labels);
    CHECK(rep.nll == Catch::Approx(0.0).margin(1e-9));
    CHECK(*rep.brier == Catch::Approx(0.0).margin(1e-12));
    CHECK(*rep.accuracy == 1.0);
    CHECK(*rep.top_k_error == 0.0);

    std::vector<CombinedPrediction> uniform(4, categorical_pred(std::vector<double>(10, 0.1)));
    const std::vector<int> ulabels{0, 3, 7, 9};
    const auto urep = evaluate(uniform, ulabels);
    CHECK(urep.nll == Catch::Approx(std::log(10.0)).margin(1e-9));
    CHECK(*urep.brier == Catch::Approx(0.09).margin(1e-12));
    CHECK(*urep.mean_entropy == Catch::Approx(std::log(10.0)).margin(1e-9));
}

TEST_CASE("evaluate: Gaussian predictions centered on the targets") {
    std::vector<CombinedPrediction> preds;
    std::vector<double> targets;
    for (int i = 0; i < 7; ++i) {
        const double y = 0.5 * i - 1.0;
        preds.push_back(gaussian_pred(y, 1.0));
        targets.push_back(y);
    }
    const auto rep = evaluate(preds, targets);
    CHECK(rep.nll == Catch::Approx(0.9189385332046727).margin(1e-9));
    CHECK(*rep.rmse == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("evaluate cross-checks against the scoring module") {
    Rng rng(15);
    std::vector<CombinedPrediction> preds;
    std::vector<int> labels;
    double expect_nll = 0.0, expect_brier = 0.0;
    for (int i = 0; i < 40; ++i) {
        std::vector<double> logits(4);
        for (double& z : logits) z = rng.normal();
        const auto probs = softmax(logits);
        const int label = static_cast<int>(rng.next_below(4));
        expect_nll += cross_entropy(probs, label);
        expect_brier += brier(probs, label);
        preds.push_back(categorical_pred(probs));
        labels.push_back(label);
    }
    const auto rep = evaluate(preds, labels);
    CHECK(rep.nll == Catch::Approx(expect_nll / 40).margin(1e-12));
    CHECK(*rep.brier == Catch::Approx(expect_brier / 40).margin(1e-12));
}

TEST_CASE("evaluate input validation") {
    CHECK_THROWS_AS(evaluate({}, std::vector<double>{}), std::invalid_argument);
    std::vector<CombinedPrediction> preds{categorical_pred({0.5, 0.5})};
    const std::vector<int> sentinel{kUnknownClassLabel};
    CHECK_THROWS_AS(evaluate(preds, sentinel), std::invalid_argument);
    const std::vector<int> short_labels{};
    CHECK_THROWS_AS(evaluate(preds, short_labels), std::invalid_argument);
}

TEST_CASE("calibration_curve: self-consistency on well-specified Gaussians") {
    Rng rng(21);
    const int n = 10000;
    std::vector<GaussianOutput> preds;
    std::vector<double> targets;
    for (int i = 0; i < n; ++i) {
        const double mu = rng.uniform(-3.0, 3.0);
        const double sd = rng.uniform(0.2, 2.0);
        preds.push_back({mu, sd * sd});
        targets.push_back(mu + sd * rng.normal());
    }
    const auto z = default_z_levels();
    const auto table = calibration_curve(preds, targets, z);
    REQUIRE(table.rows.size() == 9);
    for (size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        CHECK(r.count == n);
        // binomial 3-sigma envelope around the nominal coverage
        const double bound = 3.0 * std::sqrt(r.nominal * (1.0 - r.nominal) / n);
        CHECK(std::abs(r.observed - r.nominal) < bound);
        if (i > 0) CHECK(r.observed >= table.rows[i - 1].observed);
    }
    CHECK(table.max_gap() < 0.03);
}

TEST_CASE("calibration_curve: degenerate predictions cover nothing") {
    std::vector<GaussianOutput> preds(100, GaussianOutput{0.0, kVarianceFloor});
    std::vector<double> targets(100, 1.0);  // far outside every tiny interval
    const auto table = calibration_curve(preds, targets, default_z_levels());
    for (const auto& r : table.rows) CHECK(r.observed == 0.0);
}

TEST_CASE("calibration_curve: z=0.9 interval of a standard normal contains 0") {
    const std::vector<GaussianOutput> preds(50, GaussianOutput{0.0, 1.0});
    const std::vector<double> targets(50, 0.0);
    const std::vector<double> z{0.9};
    const auto table = calibration_curve(preds, targets, z);
    // inside iff |0 - 0| < 1.6449 * 1
    CHECK(table.rows[0].observed == 1.0);
}

TEST_CASE("entropy_histogram boundary cases") {
    std::vector<std::vector<double>> onehots(6, {1.0, 0.0, 0.0, 0.0});
    const auto h1 = entropy_histogram(onehots, 10, 4);
    CHECK(h1.masses[0] == Catch::Approx(1.0));

    std::vector<std::vector<double>> uniforms(6, std::vector<double>(4, 0.25));
    const auto h2 = entropy_histogram(uniforms, 10, 4);
    CHECK(h2.masses[9] == Catch::Approx(1.0));

    std::vector<std::vector<double>> mixed = onehots;
    mixed.insert(mixed.end(), uniforms.begin(), uniforms.end());
    const auto h3 = entropy_histogram(mixed, 10, 4);
    CHECK(h3.masses[0] == Catch::Approx(0.5));
    CHECK(h3.masses[9] == Catch::Approx(0.5));

    double total = 0.0;
    for (double m : h3.masses) total += m;
    CHECK(total == Catch::Approx(1.0).margin(1e-9));
    CHECK(h3.edges.front() == 0.0);
    CHECK(h3.edges.back() == Catch::Approx(std::log(4.0)));

    CHECK_THROWS_AS(entropy_histogram({}, 10, 4), std::invalid_argument);
}

TEST_CASE("confidence_accuracy_curve protocols") {
    const auto taus = default_tau_grid();

    // all confident and correct
    std::vector<std::vector<double>> confident(8, {0.99, 0.01});
    const std::vector<int> zeros(8, 0);
    for (const auto& pt : confidence_accuracy_curve(confident, zeros, taus).points)
        if (pt.retained > 0) CHECK(pt.accuracy == 1.0);

    // out-of-distribution examples at full confidence are always wrong
    const std::vector<int> unknowns(8, kUnknownClassLabel);
    for (const auto& pt : confidence_accuracy_curve(confident, unknowns, taus).points)
        if (pt.retained > 0) CHECK(pt.accuracy == 0.0);

    // half correct at 0.95 confidence, half unknown at 0.55
    std::vector<std::vector<double>> mixed;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
        if (i % 2 == 0) {
            mixed.push_back({0.95, 0.05});
            labels.push_back(0);
        } else {
            mixed.push_back({0.55, 0.45});
            labels.push_back(kUnknownClassLabel);
        }
    }
    const std::vector<double> grid{0.5, 0.9};
    const auto curve = confidence_accuracy_curve(mixed, labels, grid);
    CHECK(curve.points[0].accuracy == Catch::Approx(0.5));
    CHECK(curve.points[0].retained == 10);
    CHECK(curve.points[1].accuracy == Catch::Approx(1.0));
    CHECK(curve.points[1].retained == 5);

    // retained counts never increase with tau
    const auto full = confidence_accuracy_curve(mixed, labels, taus);
    for (size_t i = 1; i < full.points.size(); ++i)
        CHECK(full.points[i].retained <= full.points[i - 1].retained);

    CHECK_THROWS_AS(confidence_accuracy_curve(mixed, labels, std::vector<double>{}),
                    std::invalid_argument);
}
