#include "disrbm/gaussian_spin.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "disrbm/rbm.hpp"

namespace disrbm {

namespace {

constexpr double kSigmaFloor = 1e-3;
constexpr double kConditionLimit = 1e8;

void check_binary_labels(const VectorXi& labels, Index n) {
    if (labels.size() != n)
        throw std::invalid_argument("label count does not match data rows");
    bool has0 = false, has1 = false;
    for (Index b = 0; b < n; ++b) {
        if (labels[b] == 0) has0 = true;
        else if (labels[b] == 1) has1 = true;
        else throw std::invalid_argument("labels must be 0 or 1");
    }
    if (!has0 || !has1)
        throw std::invalid_argument("both classes must be present");
}

MatrixXd covariance(const MatrixXd& data) {
    const VectorXd mean = data.colwise().mean().transpose();
    const MatrixXd centered = data.rowwise() - mean.transpose();
    return centered.transpose() * centered / double(data.rows());
}

// deterministic eigenvector sign: largest-magnitude component positive
void fix_sign(Eigen::Ref<VectorXd> v) {
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
}

}  // namespace

const char* to_string(GsRegime regime) {
    switch (regime) {
        case GsRegime::Unconstrained: return "unconstrained";
        case GsRegime::Constrained: return "constrained";
        case GsRegime::Released: return "released";
    }
    return "?";
}

VectorXd GaussianSpinModel::class_mean(int h1) const {
    const MatrixXd sig = sigma_matrix();
    return sig * g + double(h1) * sig * w_star;
}

MatrixXd GaussianSpinModel::sigma_matrix() const {
    const Index n = n_visible();
    MatrixXd precision = -weights * weights.transpose();
    for (Index i = 0; i < n; ++i) precision(i, i) += 1.0 / (sigma[i] * sigma[i]);
    Eigen::LLT<MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success)
        throw NumericalError("GaussianSpinModel: D - W W' is not positive definite");
    return llt.solve(MatrixXd::Identity(n, n));
}

VectorXd estimate_sigma(const MatrixXd& data) {
    const VectorXd mean = data.colwise().mean().transpose();
    VectorXd sigma(data.cols());
    for (Index i = 0; i < data.cols(); ++i) {
        const double var =
            (data.col(i).array() - mean[i]).square().sum() / double(data.rows());
        sigma[i] = std::max(std::sqrt(var), kSigmaFloor);
    }
    return sigma;
}

VectorXd gs_class_direction(const MatrixXd& data, const VectorXi& labels) {
    check_binary_labels(labels, data.rows());
    const double n = double(data.rows());
    VectorXd h(data.rows());
    for (Index b = 0; b < data.rows(); ++b) h[b] = labels[b] == 1 ? 1.0 : -1.0;
    const double h_mean = h.mean();
    const VectorXd v_mean = data.colwise().mean().transpose();
    return data.transpose() * h / n - h_mean * v_mean;
}

MatrixXd build_ctilde(const MatrixXd& data, const VectorXi& labels,
                      const VectorXd& sigma) {
    check_binary_labels(labels, data.rows());
    if (sigma.size() != data.cols())
        throw std::invalid_argument("build_ctilde: sigma size mismatch");
    if (sigma.minCoeff() <= 0.0)
        throw std::invalid_argument("build_ctilde: sigma must be positive");

    Index n1 = 0;
    for (Index b = 0; b < labels.size(); ++b) n1 += labels[b];
    const double balance = double(n1) / double(labels.size());
    if (balance < 0.4 || balance > 0.6)
        std::cerr << "[disrbm] warning: classes unbalanced (" << balance
                  << "), Gaussian-Spin fit assumes balance\n";

    const VectorXd q = gs_class_direction(data, labels);
    const MatrixXd within = covariance(data) - q * q.transpose();
    const VectorXd inv_sigma = sigma.cwiseInverse();
    MatrixXd ctilde =
        inv_sigma.asDiagonal() * within * inv_sigma.asDiagonal();
    return 0.5 * (ctilde + ctilde.transpose());
}

std::pair<GaussianSpinModel, SpectralFit> gs_fit(const MatrixXd& data,
                                                 const VectorXi& labels,
                                                 Index m_hidden,
                                                 GsRegime regime) {
    if (m_hidden < 1)
        throw std::invalid_argument("gs_fit: need at least one hidden unit");
    check_binary_labels(labels, data.rows());
    const Index n = data.cols();

    const VectorXd sigma = estimate_sigma(data);
    const VectorXd inv_sigma = sigma.cwiseInverse();
    const VectorXd q = gs_class_direction(data, labels);
    const VectorXd q_scaled = q.cwiseProduct(inv_sigma);
    const VectorXd v_mean = data.colwise().mean().transpose();

    MatrixXd matrix = build_ctilde(data, labels, sigma);
    if (regime != GsRegime::Unconstrained && q_scaled.norm() > 0.0) {
        // compression orthogonal to the (scaled) class direction
        const VectorXd u = q_scaled / q_scaled.norm();
        const MatrixXd p = MatrixXd::Identity(n, n) - u * u.transpose();
        matrix = p * matrix * p;
        matrix = 0.5 * (matrix + matrix.transpose());
    }

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(matrix);
    if (es.info() != Eigen::Success)
        throw NumericalError("gs_fit: eigendecomposition failed");

    SpectralFit fit;
    fit.regime = regime;
    const Index want = m_hidden - 1;  // one unit is the spin
    std::vector<Index> selected;
    for (Index i = n - 1; i >= 0 && Index(selected.size()) < want; --i) {
        if (es.eigenvalues()[i] > 1.0) selected.push_back(i);
    }
    fit.reduced_rank = Index(selected.size()) < want;
    fit.eigenvalues = VectorXd(selected.size());
    fit.eigenvectors = MatrixXd(n, selected.size());
    for (std::size_t k = 0; k < selected.size(); ++k) {
        fit.eigenvalues[k] = es.eigenvalues()[selected[k]];
        fit.eigenvectors.col(k) = es.eigenvectors().col(selected[k]);
        fix_sign(fit.eigenvectors.col(k));
    }
    if (fit.eigenvalues.size() > 0 && fit.eigenvalues[0] > kConditionLimit)
        fit.ill_conditioned = true;

    GaussianSpinModel model;
    model.sigma = sigma;
    // scaled weight columns sqrt(1 - 1/lambda) u, mapped back by 1/sigma
    model.weights = MatrixXd(n, fit.eigenvalues.size());
    for (Index k = 0; k < fit.eigenvalues.size(); ++k)
        model.weights.col(k) = std::sqrt(1.0 - 1.0 / fit.eigenvalues[k]) *
                               fit.eigenvectors.col(k).cwiseProduct(inv_sigma);

    // Sigma^{-1} = D - W W' applied directly: w* = Sigma^{-1} q, g = Sigma^{-1} v_mean
    auto apply_precision = [&](const VectorXd& x) {
        VectorXd y = x.cwiseProduct(inv_sigma).cwiseProduct(inv_sigma);
        y -= model.weights * (model.weights.transpose() * x);
        return y;
    };
    const VectorXd q_effective =
        regime == GsRegime::Constrained ? VectorXd::Zero(n).eval() : q;
    model.w_star = apply_precision(q_effective);
    model.g = apply_precision(v_mean);
    // the spin bias balances the classes: <h1> = tanh(theta + g' Sigma w*) = 0
    model.theta = -model.g.dot(q_effective);

    // likelihood per configuration, common data-dependent constant dropped:
    // 1/2 sum_sel (lambda - 1 - log lambda), minus the unmodeled separation
    // 1/2 q' D q when the spin unit is silenced
    double l = 0.0;
    for (Index k = 0; k < fit.eigenvalues.size(); ++k)
        l += 0.5 * (fit.eigenvalues[k] - 1.0 - std::log(fit.eigenvalues[k]));
    fit.separation_term = 0.5 * q_scaled.squaredNorm();
    if (regime == GsRegime::Constrained) l -= fit.separation_term;
    fit.likelihood = l;

    return {std::move(model), std::move(fit)};
}

double gs_likelihood(const SpectralFit& fit, const VectorXd& g,
                     const VectorXd& q1) {
    double l = 0.0;
    for (Index k = 0; k < fit.eigenvalues.size(); ++k) {
        const double lambda = fit.eigenvalues[k];
        if (lambda <= 0.0)
            throw std::invalid_argument("gs_likelihood: eigenvalue <= 0");
        l += 0.5 * (lambda - 1.0 - std::log(lambda));
    }
    if (g.size() != q1.size())
        throw std::invalid_argument("gs_likelihood: size mismatch");
    return l - (log2cosh(g.dot(q1)) - std::log(2.0));  // log cosh(g.q)
}

InterlacingReport poincare_check(const MatrixXd& matrix,
                                 const VectorXd& direction,
                                 double tolerance) {
    if (matrix.rows() != matrix.cols())
        throw std::invalid_argument("poincare_check: matrix must be square");
    const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw std::invalid_argument("poincare_check: matrix not symmetric");
    if (direction.size() != matrix.rows() || direction.norm() <= 0.0)
        throw std::invalid_argument("poincare_check: bad direction");

    const Index n = matrix.rows();
    const VectorXd u = direction / direction.norm();
    MatrixXd projected =
        (MatrixXd::Identity(n, n) - u * u.transpose()) * matrix *
        (MatrixXd::Identity(n, n) - u * u.transpose());
    projected = 0.5 * (projected + projected.transpose());

    Eigen::SelfAdjointEigenSolver<MatrixXd> es_orig(matrix);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es_proj(projected);

    InterlacingReport report;
    report.original = es_orig.eigenvalues().reverse();
    report.projected = es_proj.eigenvalues().reverse();
    report.gaps = report.original - report.projected;

    const double tol = tolerance * scale;
    report.max_violation = 0.0;
    for (Index i = 0; i < n; ++i) {
        report.max_violation =
            std::max(report.max_violation, report.projected[i] - report.original[i]);
        if (i + 1 < n)
            report.max_violation = std::max(
                report.max_violation, report.original[i + 1] - report.projected[i]);
    }
    // the compression annihilates the direction: smallest projected eigenvalue 0
    report.max_violation =
        std::max(report.max_violation, std::abs(report.projected[n - 1]));
    report.holds = report.max_violation <= tol;
    return report;
}

GsCostTable gs_cost_table(const MatrixXd& data, const VectorXi& labels,
                          Index m_hidden) {
    GsCostTable table;
    table.l_unconstrained =
        gs_fit(data, labels, m_hidden, GsRegime::Unconstrained).second.likelihood;
    table.l_constrained =
        gs_fit(data, labels, m_hidden, GsRegime::Constrained).second.likelihood;
    table.l_released =
        gs_fit(data, labels, m_hidden, GsRegime::Released).second.likelihood;
    table.erasure_cost = table.l_unconstrained - table.l_constrained;
    table.disentanglement_cost = table.l_unconstrained - table.l_released;
    return table;
}

}  // namespace disrbm
