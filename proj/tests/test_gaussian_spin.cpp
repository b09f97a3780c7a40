#include "doctest.h"

#include <cmath>
#include <numbers>

#include "disrbm/data.hpp"
#include "disrbm/gaussian_spin.hpp"
#include "helpers.hpp"

using namespace disrbm;

namespace {

// exactly isotropic labeled data with zero class separation: rows +-a e_i,
// each sign pair split across both classes so q vanishes identically
std::pair<MatrixXd, VectorXi> exact_isotropic(Index dim) {
    MatrixXd data(4 * dim, dim);
    VectorXi labels(4 * dim);
    data.setZero();
    const double a = std::sqrt(double(dim));  // unit column variance
    for (Index i = 0; i < dim; ++i) {
        data(4 * i + 0, i) = a;
        data(4 * i + 1, i) = -a;
        data(4 * i + 2, i) = a;
        data(4 * i + 3, i) = -a;
        labels[4 * i + 0] = 0;
        labels[4 * i + 1] = 0;
        labels[4 * i + 2] = 1;
        labels[4 * i + 3] = 1;
    }
    return {data, labels};
}

std::pair<MatrixXd, VectorXi> separated_classes(Index n, double separation,
                                                double spread, Rng& rng) {
    VectorXd mean0 = VectorXd::Zero(5), mean1 = VectorXd::Zero(5);
    mean1[0] = separation;
    // correlated within-class structure: after scaling by the per-unit data
    // std only cross-correlations can push eigenvalues above one
    VectorXd u = VectorXd::Zero(5);
    u[1] = u[2] = 1.0 / std::numbers::sqrt2;
    const MatrixXd cov = spread * spread *
                         (MatrixXd::Identity(5, 5) + 6.0 * u * u.transpose());
    const LabeledDataset ds =
        synthetic_gaussian_mixture(n, {mean0, mean1}, {cov, cov}, rng);
    return {ds.configurations, ds.labels};
}

}  // namespace

TEST_CASE("build_ctilde: q = 0 leaves the scaled covariance untouched") {
    const auto [data, labels] = exact_isotropic(4);
    const VectorXd sigma = VectorXd::Ones(4);
    const MatrixXd ctilde = build_ctilde(data, labels, sigma);
    // exactly the identity: columns have unit variance and no separation
    CHECK((ctilde - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("build_ctilde: hand-assembled two-point-per-class value") {
    MatrixXd data(4, 2);
    data.row(0) << 1.0, 0.0;
    data.row(1) << 3.0, 1.0;  // class 1 mean (2.0, 0.5)
    data.row(2) << -1.0, 1.0;
    data.row(3) << -3.0, 0.0;  // class 0 mean (-2.0, 0.5)
    VectorXi labels(4);
    labels << 1, 1, 0, 0;
    VectorXd sigma(2);
    sigma << 2.0, 0.5;

    const VectorXd v_mean = data.colwise().mean().transpose();
    MatrixXd c = MatrixXd::Zero(2, 2);
    for (Index b = 0; b < 4; ++b) {
        const VectorXd d = data.row(b).transpose() - v_mean;
        c += d * d.transpose() / 4.0;
    }
    VectorXd q(2);
    q << 2.0, 0.0;  // half the class-mean difference
    MatrixXd expected = c - q * q.transpose();
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j)
            expected(i, j) /= sigma[i] * sigma[j];

    const MatrixXd ctilde = build_ctilde(data, labels, sigma);
    CHECK((ctilde - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ctilde - ctilde.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gs_fit: exactly isotropic data has no usable eigenvalues") {
    const auto [data, labels] = exact_isotropic(4);
    const auto [model, fit] = gs_fit(data, labels, 3, GsRegime::Unconstrained);
    CHECK(fit.eigenvalues.size() == 0);
    CHECK(fit.reduced_rank);
    CHECK(fit.likelihood == doctest::Approx(0.0));
    CHECK(model.w_star.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gs_fit: recovers class means and the top within-class direction") {
    Rng rng(501);
    const auto [data, labels] = separated_classes(20000, 6.0, 1.0, rng);
    const auto [model, fit] = gs_fit(data, labels, 3, GsRegime::Unconstrained);

    VectorXd mean0 = VectorXd::Zero(5), mean1 = VectorXd::Zero(5);
    Index n0 = 0, n1 = 0;
    for (Index b = 0; b < data.rows(); ++b) {
        if (labels[b] == 1) {
            mean1 += data.row(b).transpose();
            ++n1;
        } else {
            mean0 += data.row(b).transpose();
            ++n0;
        }
    }
    mean0 /= double(n0);
    mean1 /= double(n1);

    const VectorXd fit_mean1 = model.class_mean(+1);
    const VectorXd fit_mean0 = model.class_mean(-1);
    CHECK((fit_mean1 - mean1).norm() < 0.15);
    CHECK((fit_mean0 - mean0).norm() < 0.15);

    // the correlated within-class direction (units 1+2) carries lambda > 1
    REQUIRE(fit.eigenvalues.size() >= 1);
    CHECK(fit.eigenvalues[0] > 1.3);
    CHECK(std::abs(fit.eigenvectors.col(0)[1]) > 0.6);
    CHECK(std::abs(fit.eigenvectors.col(0)[2]) > 0.6);
}

TEST_CASE("gs_fit: released regime annihilates the class direction") {
    Rng rng(503);
    const auto [data, labels] = separated_classes(5000, 4.0, 1.0, rng);
    const VectorXd sigma = estimate_sigma(data);
    const VectorXd q = gs_class_direction(data, labels);
    const VectorXd q_scaled = q.cwiseQuotient(sigma);

    const MatrixXd ctilde = build_ctilde(data, labels, sigma);
    const InterlacingReport report = poincare_check(ctilde, q_scaled);
    CHECK(report.holds);
    CHECK(std::abs(report.projected[report.projected.size() - 1]) < 1e-9);
}

TEST_CASE("gs_likelihood: formula evaluator") {
    SpectralFit fit;
    fit.eigenvalues = VectorXd();
    CHECK(gs_likelihood(fit, VectorXd::Zero(2), VectorXd::Zero(2)) ==
          doctest::Approx(0.0));

    fit.eigenvalues = VectorXd::Constant(1, 2.0);
    const double value =
        gs_likelihood(fit, VectorXd::Zero(2), VectorXd::Zero(2));
    CHECK(value == doctest::Approx(0.5 * (1.0 - std::log(2.0))).epsilon(1e-12));
    CHECK(value == doctest::Approx(0.15342640972).epsilon(1e-9));

    SpectralFit bigger = fit;
    bigger.eigenvalues[0] = 2.5;
    CHECK(gs_likelihood(bigger, VectorXd::Zero(2), VectorXd::Zero(2)) > value);

    VectorXd g(2), q(2);
    g << 1.0, 0.0;
    q << 3.0, 0.0;
    CHECK(gs_likelihood(fit, g, q) ==
          doctest::Approx(value - std::log(std::cosh(3.0))).epsilon(1e-12));

    SpectralFit bad;
    bad.eigenvalues = VectorXd::Constant(1, -1.0);
    CHECK_THROWS_AS(gs_likelihood(bad, g, q), std::invalid_argument);
}

TEST_CASE("poincare_check: eigenvector direction removes exactly one eigenvalue") {
    MatrixXd m = MatrixXd::Zero(3, 3);
    m.diagonal() << 5.0, 3.0, 1.0;
    VectorXd q = VectorXd::Zero(3);
    q[1] = 1.0;  // eigenvector of eigenvalue 3
    const InterlacingReport report = poincare_check(m, q);
    CHECK(report.holds);
    CHECK(report.projected[0] == doctest::Approx(5.0));
    CHECK(report.projected[1] == doctest::Approx(1.0));
    CHECK(report.projected[2] == doctest::Approx(0.0));
}

TEST_CASE("poincare_check: random PSD matrices interlace") {
    Rng rng(509);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        MatrixXd a(10, 12);
        for (Index i = 0; i < a.rows(); ++i)
            for (Index j = 0; j < a.cols(); ++j) a(i, j) = gauss(rng);
        const MatrixXd psd = a * a.transpose() / 12.0;
        VectorXd q(10);
        for (Index i = 0; i < 10; ++i) q[i] = gauss(rng);
        const InterlacingReport report = poincare_check(psd, q);
        CHECK(report.holds);
        CHECK(report.max_violation <= 1e-9 * std::max(1.0, psd.cwiseAbs().maxCoeff()));
    }
    CHECK_THROWS_AS(
        poincare_check(MatrixXd::Identity(3, 3), VectorXd::Zero(3)),
        std::invalid_argument);
    MatrixXd asym = MatrixXd::Identity(3, 3);
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(poincare_check(asym, VectorXd::Ones(3)),
                    std::invalid_argument);
}

TEST_CASE("gs_cost_table: zero separation costs nothing") {
    const auto [data, labels] = exact_isotropic(4);
    const GsCostTable table = gs_cost_table(data, labels, 3);
    CHECK(table.erasure_cost == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(table.disentanglement_cost == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(table.l_unconstrained == doctest::Approx(table.l_constrained));
}

TEST_CASE("gs_cost_table: separated classes pay for erasure, not disentanglement") {
    Rng rng(521);
    const auto [data, labels] = separated_classes(8000, 8.0, 1.0, rng);
    const GsCostTable table = gs_cost_table(data, labels, 3);
    CHECK(table.erasure_cost > 0.3);
    CHECK(table.disentanglement_cost >= 0.0);
    CHECK(table.disentanglement_cost < 0.2 * table.erasure_cost);
    CHECK(table.l_unconstrained >= table.l_released);
    CHECK(table.l_released >= table.l_constrained);
}

TEST_CASE("gs_cost_table: ordering holds across random datasets") {
    Rng rng(523);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.5, 3.0);
    for (int rep = 0; rep < 10; ++rep) {
        const Index dim = 3 + rep % 4;
        VectorXd mean0(dim), mean1(dim);
        for (Index i = 0; i < dim; ++i) {
            mean0[i] = gauss(rng);
            mean1[i] = gauss(rng);
        }
        MatrixXd a(dim, dim + 2);
        for (Index i = 0; i < a.rows(); ++i)
            for (Index j = 0; j < a.cols(); ++j) a(i, j) = gauss(rng);
        const MatrixXd cov =
            unif(rng) * (a * a.transpose() / double(dim + 2) +
                         0.2 * MatrixXd::Identity(dim, dim));
        LabeledDataset ds = synthetic_gaussian_mixture(
            3000, {mean0, mean1}, {cov, cov}, rng);
        const GsCostTable table =
            gs_cost_table(ds.configurations, ds.labels, 1 + dim / 2);
        CHECK(table.l_unconstrained >= table.l_released - 1e-10);
        CHECK(table.l_released >= table.l_constrained - 1e-10);
    }
}
