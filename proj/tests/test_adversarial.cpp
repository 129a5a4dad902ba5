#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "uqnet/adversarial.hpp"
#include "uqnet/ensemble.hpp"

using namespace uqnet;

TEST_CASE("compute_eps follows per-dimension training ranges") {
    Dataset ds;
    ds.task = TaskKind::Regression;
    ds.features = Matrix(3, 3);
    // column 0 spans [0,255], column 1 constant, column 2 spans [-1,3]
    const double rows[3][3] = {{0.0, 7.0, -1.0}, {100.0, 7.0, 1.0}, {255.0, 7.0, 3.0}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) ds.features(i, j) = rows[i][j];
    ds.targets_real = {0.0, 0.0, 0.0};
    recompute_ranges(ds);

    const auto eps = compute_eps(ds, 0.01);
    CHECK(eps[0] == Catch::Approx(2.55).margin(1e-12));
    CHECK(eps[1] == 0.0);
    CHECK(eps[2] == Catch::Approx(0.04).margin(1e-12));
}

TEST_CASE("fgsm: zero input gradient leaves x untouched (sign(0)=0)") {
    auto p = init_params(ArchSpec{2, {3}, Activation::ReLU, Head::gaussian_regression(), 0.0}, 4);
    for (auto& w : p.weights) w.fill(0.0);
    const std::vector<double> x{1.0, -2.0};
    const std::vector<double> eps{0.5, 0.5};
    const auto xp = fgsm(p, x, 3.0, ScoringLoss::MSE, eps);
    CHECK(xp == x);
}

TEST_CASE("fgsm: positive-slope 1-D model pushes x upward by epsilon") {
    // mu = w * x with w>0 on the active branch; for wx > y the loss gradient
    // in x is positive, so x' = x + eps
    auto p = init_params(ArchSpec{1, {1}, Activation::ReLU, Head::gaussian_regression(), 0.0}, 4);
    p.weights[0](0, 0) = 1.0;
    p.biases[0][0] = 0.0;
    p.weights[1](0, 0) = 2.0;
    p.weights[1](0, 1) = 0.0;
    p.biases[1] = {0.0, 0.0};

    const std::vector<double> x{1.0};  // mu = 2, take y = 0.5 so wx > y
    const std::vector<double> eps{0.25};
    const auto xp = fgsm(p, x, 0.5, ScoringLoss::MSE, eps);
    CHECK(xp[0] == Catch::Approx(1.25).margin(1e-12));
}

TEST_CASE("fgsm perturbation never exceeds the per-dimension budget") {
    Rng rng(5);
    const auto p =
        init_params(ArchSpec{4, {6}, Activation::ReLU, Head::gaussian_regression(), 0.0}, 8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(4), eps(4);
        for (double& v : x) v = rng.normal();
        for (double& e : eps) e = rng.uniform(0.0, 0.3);
        const auto xp = fgsm(p, x, rng.normal(), ScoringLoss::GaussianNLL, eps);
        double max_eps = 0.0, max_delta = 0.0;
        for (int d = 0; d < 4; ++d) {
            max_eps = std::max(max_eps, eps[d]);
            max_delta = std::max(max_delta, std::abs(xp[d] - x[d]));
            CHECK(std::abs(xp[d] - x[d]) <= eps[d] + 1e-15);
        }
        CHECK(max_delta <= max_eps + 1e-15);
    }
}

TEST_CASE("fgsm dimension mismatch is rejected") {
    const auto p =
        init_params(ArchSpec{2, {3}, Activation::ReLU, Head::gaussian_regression(), 0.0}, 8);
    const std::vector<double> x{1.0, 2.0};
    const std::vector<double> eps{0.1};
    CHECK_THROWS_AS(fgsm(p, x, 0.0, ScoringLoss::MSE, eps), std::invalid_argument);
}

TEST_CASE("random_sign_perturb: zero eps, determinism, zero mean") {
    const std::vector<double> x{0.5, -0.5, 2.0};
    const std::vector<double> zero_eps{0.0, 0.0, 0.0};
    CHECK(random_sign_perturb(x, zero_eps, 9) == x);

    const std::vector<double> eps{0.2, 0.2, 0.2};
    CHECK(random_sign_perturb(x, eps, 11) == random_sign_perturb(x, eps, 11));

    // signs are zero-mean: the average over many seeds recovers x within 3
    // sigma of the Monte Carlo error eps/sqrt(n)
    const int n = 10000;
    std::vector<double> mean(3, 0.0);
    for (int s = 0; s < n; ++s) {
        const auto xp = random_sign_perturb(x, eps, 1000 + s);
        for (int d = 0; d < 3; ++d) mean[d] += xp[d];
    }
    const double tol = 3.0 * 0.2 / std::sqrt(static_cast<double>(n));
    for (int d = 0; d < 3; ++d) CHECK(mean[d] / n == Catch::Approx(x[d]).margin(tol));
}

TEST_CASE("fgsm raises the loss on most points of a trained network") {
    // statistical property, fixed seed: on a trained smooth-region model the
    // gradient-sign direction increases the loss for >= 90% of test inputs
    const Dataset train = toy_cubic(64, 1.0, -2.0, 2.0, 77);
    const Standardizer scaler = Standardizer::fit(train);
    const Dataset strain = scaler.apply(train);

    EnsembleConfig cfg;
    cfg.members = 1;
    cfg.arch = ArchSpec{1, {32}, Activation::ReLU, Head::gaussian_regression(), 0.0};
    cfg.loss = ScoringLoss::GaussianNLL;
    cfg.epochs = 300;
    cfg.batch_size = 64;
    cfg.learning_rate = 0.01;
    cfg.base_seed = 5;
    const auto params = train_member(cfg, strain, 0);

    const auto eps_raw = compute_eps(train, 0.01);
    std::vector<double> eps{eps_raw[0] / scaler.feature_scale[0]};

    const Dataset test = toy_cubic(200, 1.0, -2.0, 2.0, 78);
    const Dataset stest = scaler.apply(test);
    int increased = 0;
    for (int i = 0; i < stest.size(); ++i) {
        const std::vector<double> x{stest.features(i, 0)};
        const double y = stest.targets_real[i];
        const auto g0 = backward(params, x, y, ScoringLoss::GaussianNLL, ForwardMode::eval());
        const auto xp = detail::fgsm_from_grad(x, g0.input_grad, eps);
        const auto g1 = backward(params, xp, y, ScoringLoss::GaussianNLL, ForwardMode::eval());
        if (g1.loss >= g0.loss) ++increased;
    }
    CHECK(increased >= 180);  // >= 90% of 200
}
