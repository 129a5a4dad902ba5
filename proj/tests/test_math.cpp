#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "uqnet/math.hpp"
#include "uqnet/rng.hpp"

using namespace uqnet;

namespace {

// Quadrature oracle for the standard normal CDF: composite Simpson over
// [0, |x|], 2e5 panels, error far below 1e-12.
double cdf_by_quadrature(double x) {
    const double ax = std::abs(x);
    const int n = 200000;
    const double h = ax / n;
    auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); };
    double s = pdf(0.0) + pdf(ax);
    for (int i = 1; i < n; ++i) s += pdf(i * h) * (i % 2 ? 4.0 : 2.0);
    const double integral = s * h / 3.0;
    return x >= 0.0 ? 0.5 + integral : 0.5 - integral;
}

}  // namespace

TEST_CASE("softplus closed forms and stability") {
    CHECK(softplus(0.0) == Catch::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(softplus(50.0) == Catch::Approx(50.0).epsilon(1e-12));
    CHECK(softplus(-50.0) == Catch::Approx(std::exp(-50.0)).epsilon(1e-9));
    CHECK(std::isfinite(softplus(1e4)));
    CHECK(std::isfinite(softplus(-1e4)));
    CHECK(softplus(-1e4) >= 0.0);
}

TEST_CASE("sigmoid is stable and matches softplus derivative identity") {
    CHECK(sigmoid(0.0) == Catch::Approx(0.5));
    CHECK(sigmoid(1000.0) == Catch::Approx(1.0));
    CHECK(sigmoid(-1000.0) == Catch::Approx(0.0).margin(1e-300));
    for (double x : {-3.0, -0.5, 0.0, 0.7, 4.0}) {
        const double h = 1e-6;
        const double fd = (softplus(x + h) - softplus(x - h)) / (2 * h);
        CHECK(sigmoid(x) == Catch::Approx(fd).epsilon(1e-8));
    }
}

TEST_CASE("softmax handles extreme logits and stays on the simplex") {
    const std::vector<double> zeros(10, 0.0);
    for (double p : softmax(zeros)) CHECK(p == Catch::Approx(0.1).epsilon(1e-12));

    const std::vector<double> extreme{1e4, -1e4, 0.0, 5e3};
    const auto p = softmax(extreme);
    double sum = 0.0;
    for (double v : p) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
        sum += v;
    }
    CHECK(sum == Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("log_sum_exp agrees with the naive computation on benign inputs") {
    const std::vector<double> v{0.3, -1.2, 2.5};
    double naive = 0.0;
    for (double x : v) naive += std::exp(x);
    CHECK(log_sum_exp(v) == Catch::Approx(std::log(naive)).epsilon(1e-13));
    const std::vector<double> big{1e4, 1e4 - 1.0};
    CHECK(log_sum_exp(big) == Catch::Approx(1e4 + std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("normal_cdf matches quadrature") {
    for (double x : {-2.5, -1.0, -0.3, 0.0, 0.5, 1.6448536269514722, 3.0})
        CHECK(normal_cdf(x) == Catch::Approx(cdf_by_quadrature(x)).margin(1e-12));
}

TEST_CASE("normal_quantile inverts the CDF to well below 1.2e-8") {
    for (double p : {0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975, 0.99, 0.999}) {
        const double x = normal_quantile(p);
        CHECK(std::abs(cdf_by_quadrature(x) - p) < 1.2e-8);
    }
    CHECK(normal_quantile(0.95) == Catch::Approx(1.6448536269514722).margin(1e-9));
    CHECK(normal_quantile(0.5) == Catch::Approx(0.0).margin(1e-12));
    CHECK(normal_quantile(0.975) == Catch::Approx(1.959963984540054).margin(1e-9));
    CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}

TEST_CASE("kl_divergence basics") {
    const std::vector<double> p{1.0, 0.0};
    const std::vector<double> q{0.5, 0.5};
    CHECK(kl_divergence(p, p) == Catch::Approx(0.0).margin(1e-15));
    CHECK(kl_divergence(p, q) == Catch::Approx(std::log(2.0)).epsilon(1e-13));
    CHECK(kl_divergence(q, q) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("rng streams are deterministic and seed-sensitive") {
    Rng a(123), b(123), c(124);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const uint64_t va = a.next(), vb = b.next(), vc = c.next();
        all_equal = all_equal && (va == vb);
        any_diff = any_diff || (va != vc);
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform01 lands in [0,1) with the right mean") {
    Rng rng(7);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / 100000 == Catch::Approx(0.5).margin(0.005));
}

TEST_CASE("normal draws have the right first two moments") {
    Rng rng(11);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s += z;
        s2 += z * z;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(mean == Catch::Approx(0.0).margin(3.0 / std::sqrt(double(n))));
    CHECK(var == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("shuffle is a seeded permutation") {
    std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<int> v2 = v1;
    Rng a(99), b(99);
    a.shuffle(v1);
    b.shuffle(v2);
    CHECK(v1 == v2);
    CHECK(std::set<int>(v1.begin(), v1.end()).size() == 10);
}

TEST_CASE("derive_seed splits independently of sibling order") {
    const uint64_t base = 42;
    CHECK(derive_seed(base, 0) != derive_seed(base, 1));
    CHECK(derive_seed(base, tag_hash("init")) != derive_seed(base, tag_hash("shuffle")));
    // member k's seed does not depend on how many members exist
    const uint64_t m3 = derive_seed(base, 3);
    CHECK(m3 == derive_seed(base, 3));
}

TEST_CASE("matrix shape and access") {
    Matrix m(2, 3);
    CHECK(m.rows == 2);
    CHECK(m.cols == 3);
    m(1, 2) = 5.0;
    CHECK(m.data[5] == 5.0);
    CHECK(m.row(1)[2] == 5.0);
}
