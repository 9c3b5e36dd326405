#include "metrack/linalg.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace metrack;

namespace {

MetricMatrix spd_metric(Eigen::Index d, Rng& rng) {
    return MetricMatrix(oracle::random_spd(d, 0.5, 2.0, rng));
}

}  // namespace

TEST_CASE("MetricMatrix rejects malformed input") {
    CHECK_THROWS_AS(MetricMatrix(Mat::Ones(2, 3)), InputError);
    Mat asym = Mat::Identity(3, 3);
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(MetricMatrix{asym}, InputError);
    Mat nan = Mat::Identity(2, 2);
    nan(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(MetricMatrix{nan}, InputError);
}

TEST_CASE("rank-two update stays exactly symmetric") {
    Rng rng(3);
    MetricMatrix m = spd_metric(12, rng);
    for (int i = 0; i < 50; ++i) {
        const Vec a = oracle::random_gaussian(12, 1, rng);
        const Vec b = oracle::random_gaussian(12, 1, rng);
        m.add_rank_two(0.37, a, b);
    }
    CHECK(m.matrix() == m.matrix().transpose());

    const Mat before = m.matrix();
    const Vec a = oracle::random_gaussian(12, 1, rng);
    m.add_rank_two(0.8, a, a);
    CHECK(m.matrix() == before);
}

TEST_CASE("solve_regression: exact reconstruction and orthogonal target") {
    Rng rng(5);
    const Mat basis = oracle::random_gaussian(10, 4, rng);
    const MetricMatrix metric = spd_metric(10, rng);
    const RegressionCache cache = RegressionCache::build(basis, metric, 8);

    const Vec x = oracle::random_gaussian(4, 1, rng);
    const RegressionSolution s = solve_regression(cache, metric, basis * x);
    CHECK(s.residual == doctest::Approx(0.0).epsilon(1e-10));
    CHECK((s.coeffs - x).norm() < 1e-9);

    // Identity metric, target orthogonal to every column: residual is ||y||^2.
    Mat e = Mat::Zero(6, 2);
    e(0, 0) = 1.0;
    e(1, 1) = 1.0;
    const MetricMatrix id = MetricMatrix::identity(6);
    Vec y = Vec::Zero(6);
    y[3] = 2.0;
    y[5] = -1.0;
    const RegressionSolution o = solve_regression(RegressionCache::build(e, id, 2), id, y);
    CHECK(o.residual == doctest::Approx(5.0));
    CHECK(o.coeffs.norm() < 1e-14);
}

TEST_CASE("solve_regression matches the whitened least-squares oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const Eigen::Index d = 5 + trial % 20;
        const Eigen::Index n = 1 + trial % (d - 1);
        const Mat basis = oracle::random_gaussian(d, n, rng);
        const Mat m = oracle::random_spd(d, 0.2, 3.0, rng);
        const MetricMatrix metric(m);
        const Vec y = oracle::random_gaussian(d, 1, rng);
        const RegressionSolution s =
            solve_regression(RegressionCache::build(basis, metric, n), metric, y);
        const oracle::OlsSolution o = oracle::whitened_ols(basis, m, y);
        CHECK(s.residual >= 0.0);
        CHECK(std::abs(s.residual - o.residual) <= 1e-8 * std::max(1.0, o.residual));
        CHECK((s.coeffs - o.coeffs).norm() <= 1e-8 * std::max(1.0, o.coeffs.norm()));

        const RegressionSolution dense = solve_regression_dense(basis, metric, y);
        CHECK(std::abs(dense.residual - o.residual) <= 1e-8 * std::max(1.0, o.residual));
    }
}

TEST_CASE("duplicate columns fall back to the pseudoinverse") {
    Rng rng(2);
    Mat basis = oracle::random_gaussian(8, 3, rng);
    basis.col(2) = basis.col(0);
    const MetricMatrix metric = MetricMatrix::identity(8);
    const RegressionCache cache = RegressionCache::build(basis, metric, 5);
    CHECK(cache.singular());
    const Vec y = oracle::random_gaussian(8, 1, rng);
    const RegressionSolution s = solve_regression(cache, metric, y);
    const oracle::OlsSolution o = oracle::whitened_ols(basis, metric.matrix(), y);
    CHECK(s.residual == doctest::Approx(o.residual).epsilon(1e-9));
    CHECK(std::isfinite(s.coeffs.norm()));
}

TEST_CASE("append / remove / replace track the dense inverse") {
    Rng rng(17);
    const Eigen::Index d = 15;
    const MetricMatrix metric = spd_metric(d, rng);
    RegressionCache cache = RegressionCache::build(oracle::random_gaussian(d, 3, rng), metric, 10);

    SUBCASE("append") {
        const Vec col = oracle::random_gaussian(d, 1, rng);
        CHECK(cache.append(metric, col) == UpdatePath::Online);
        CHECK(cache.size() == 4);
        CHECK(oracle::relative_frobenius(cache.inverse(),
                                         oracle::dense_inverse(cache.basis(), metric.matrix())) <
              1e-10);
    }
    SUBCASE("remove compacts later columns") {
        const Mat before = cache.basis();
        CHECK(cache.remove(metric, 1) == UpdatePath::Online);
        CHECK(cache.basis().col(0) == before.col(0));
        CHECK(cache.basis().col(1) == before.col(2));
        CHECK(oracle::relative_frobenius(cache.inverse(),
                                         oracle::dense_inverse(cache.basis(), metric.matrix())) <
              1e-10);
    }
    SUBCASE("replace moves the new column to the end") {
        const Mat before = cache.basis();
        const Vec col = oracle::random_gaussian(d, 1, rng);
        cache.replace(metric, 0, col);
        CHECK(cache.size() == 3);
        CHECK(cache.basis().col(0) == before.col(1));
        CHECK(cache.basis().col(2) == col);
        CHECK(oracle::relative_frobenius(cache.inverse(),
                                         oracle::dense_inverse(cache.basis(), metric.matrix())) <
              1e-10);
    }
    SUBCASE("capacity and index errors") {
        CHECK_THROWS_AS(cache.remove(metric, 7), InputError);
        for (int i = 0; i < 7; ++i) cache.append(metric, oracle::random_gaussian(d, 1, rng));
        CHECK_THROWS_AS(cache.append(metric, oracle::random_gaussian(d, 1, rng)), InputError);
    }
}

TEST_CASE("appending a dependent column takes the dense fallback") {
    Rng rng(8);
    const MetricMatrix metric = MetricMatrix::identity(6);
    const Mat basis = oracle::random_gaussian(6, 2, rng);
    RegressionCache cache = RegressionCache::build(basis, metric, 4);
    CHECK(cache.append(metric, basis.col(0) + 2.0 * basis.col(1)) == UpdatePath::DenseFallback);
    CHECK(cache.singular());
    // Removing the dependent column restores full rank.
    cache.remove(metric, 2);
    CHECK_FALSE(cache.singular());
    CHECK(cache.inverse_error(metric) < 1e-10);
}

TEST_CASE("Sherman-Morrison flags a singular denominator") {
    const Mat j_inv = Mat::Identity(3, 3);
    Vec u = Vec::Zero(3);
    Vec v = Vec::Zero(3);
    u[0] = 1.0;
    v[0] = -1.0;  // 1 + v^T J^-1 u = 0
    CHECK_THROWS_AS(rank_one_inverse_update(j_inv, u, v), SingularUpdate);

    Rng rng(4);
    const Mat j = oracle::random_spd(5, 1.0, 2.0, rng);
    const Vec a = oracle::random_gaussian(5, 1, rng);
    const Vec b = oracle::random_gaussian(5, 1, rng);
    const Mat updated = rank_one_inverse_update(j.inverse(), a, b);
    CHECK(oracle::relative_frobenius(updated, (j + a * b.transpose()).inverse()) < 1e-10);
}

TEST_CASE("metric perturbation keeps H consistent with the updated metric") {
    Rng rng(23);
    const Eigen::Index d = 12;
    MetricMatrix metric = spd_metric(d, rng);
    RegressionCache cache = RegressionCache::build(oracle::random_gaussian(d, 6, rng), metric, 6);
    for (int i = 0; i < 20; ++i) {
        const Vec am = 0.3 * oracle::random_gaussian(d, 1, rng);
        const Vec ap = 0.3 * oracle::random_gaussian(d, 1, rng);
        metric.add_rank_two(0.2, am, ap);
        cache.perturb(metric, am, ap, 0.2);
        CHECK(oracle::relative_frobenius(cache.inverse(),
                                         oracle::dense_inverse(cache.basis(), metric.matrix())) <
              1e-8);
    }
    CHECK_THROWS_AS(cache.perturb(metric, Vec::Zero(d), Vec::Zero(d), -1.0), InputError);
}

TEST_CASE("periodic rebuild after many online edits") {
    Rng rng(29);
    const MetricMatrix metric = MetricMatrix::identity(10);
    RegressionCache cache = RegressionCache::build(oracle::random_gaussian(10, 5, rng), metric, 6);
    bool rebuilt = false;
    for (int i = 0; i < kEditsBetweenRebuilds; ++i) {
        const UpdatePath p = (i % 2 == 0) ? cache.append(metric, oracle::random_gaussian(10, 1, rng))
                                          : cache.remove(metric, 0);
        rebuilt = rebuilt || p == UpdatePath::Rebuild;
    }
    CHECK(rebuilt);
    CHECK(cache.inverse_error(metric) < 1e-9);
}
