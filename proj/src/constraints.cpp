#include "disrbm/constraints.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <iostream>
#include <map>
#include <stdexcept>

namespace disrbm {

namespace {

constexpr double kDependentDirectionTol = 1e-10;

VectorXd normalized_weights(const VectorXd& weights, Index n) {
    if (weights.size() == 0) return VectorXd::Constant(n, 1.0 / double(n));
    if (weights.size() != n)
        throw std::invalid_argument("sample weight size mismatch");
    const double total = weights.sum();
    if (total <= 0.0) throw std::invalid_argument("sample weights must sum > 0");
    return weights / total;
}

void check_labels(const VectorXi& labels, Index n) {
    if (labels.size() != n)
        throw std::invalid_argument("label count does not match data rows");
}

}  // namespace

bool LinearConstraint::applies(Index unit) const {
    if (applies_to_all) return true;
    return std::binary_search(applies_to.begin(), applies_to.end(), unit);
}

bool QuadraticConstraint::applies(Index unit) const {
    if (applies_to_all) return true;
    return std::binary_search(applies_to.begin(), applies_to.end(), unit);
}

MatrixXd QuadraticConstraint::dense() const {
    if (rank() == 0)
        return MatrixXd::Zero(eigenvectors.rows(), eigenvectors.rows());
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

MatrixXd QuadraticConstraint::apply(const MatrixXd& x) const {
    if (rank() == 0) return MatrixXd::Zero(x.rows(), x.cols());
    return eigenvectors * (eigenvalues.asDiagonal() *
                           (eigenvectors.transpose() * x));
}

QuadraticConstraint QuadraticConstraint::from_dense(const MatrixXd& matrix,
                                                    double chi2) {
    if (matrix.rows() != matrix.cols())
        throw std::invalid_argument("quadratic constraint matrix must be square");
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("quadratic constraint matrix must be symmetric");
    QuadraticConstraint out;
    out.penalty_weight = chi2;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(matrix);
    const VectorXd evals = es.eigenvalues();
    const double scale = evals.cwiseAbs().maxCoeff();
    if (scale <= 0.0) {
        out.inert = true;
        out.eigenvalues = VectorXd();
        out.eigenvectors = MatrixXd(matrix.rows(), 0);
        return out;
    }
    // keep numerically nonzero eigenpairs, largest |lambda| first
    std::vector<Index> order(matrix.rows());
    for (Index i = 0; i < matrix.rows(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return std::abs(evals[a]) > std::abs(evals[b]);
    });
    std::vector<Index> kept;
    for (Index i : order)
        if (std::abs(evals[i]) > 1e-12 * scale) kept.push_back(i);
    out.original_scale = scale;
    out.eigenvalues = VectorXd(kept.size());
    out.eigenvectors = MatrixXd(matrix.rows(), kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k) {
        out.eigenvalues[k] = evals[kept[k]] / scale;  // unit spectral norm
        out.eigenvectors.col(k) = es.eigenvectors().col(kept[k]);
    }
    return out;
}

ConstraintSet ConstraintSet::single_linear(
    const VectorXd& q, const std::vector<Index>& released_units,
    Index n_hidden) {
    if (q.norm() <= 0.0)
        throw std::invalid_argument("linear constraint direction is zero");
    LinearConstraint c;
    c.direction = q;
    if (released_units.empty()) {
        c.applies_to_all = true;
    } else {
        c.applies_to_all = false;
        for (Index mu = 0; mu < n_hidden; ++mu)
            if (std::find(released_units.begin(), released_units.end(), mu) ==
                released_units.end())
                c.applies_to.push_back(mu);
    }
    ConstraintSet set;
    set.linear.push_back(std::move(c));
    set.released = released_units;
    std::sort(set.released.begin(), set.released.end());
    return set;
}

ConstraintSet ConstraintSet::multiclass(
    const std::vector<VectorXd>& directions,
    const std::vector<Index>& released_units, Index n_hidden) {
    if (!released_units.empty() && released_units.size() != directions.size())
        throw std::invalid_argument(
            "multiclass: need one released unit per direction (or none)");
    ConstraintSet set;
    for (std::size_t d = 0; d < directions.size(); ++d) {
        if (directions[d].norm() <= 0.0)
            throw std::invalid_argument("multiclass: zero direction");
        LinearConstraint c;
        c.direction = directions[d];
        if (released_units.empty()) {
            c.applies_to_all = true;
        } else {
            // released unit d stays free along direction d only
            c.applies_to_all = false;
            for (Index mu = 0; mu < n_hidden; ++mu)
                if (mu != released_units[d]) c.applies_to.push_back(mu);
        }
        set.linear.push_back(std::move(c));
    }
    set.released = released_units;
    std::sort(set.released.begin(), set.released.end());
    return set;
}

VectorXd q1_vector(const MatrixXd& data, const VectorXi& labels,
                   const VectorXd& weights) {
    check_labels(labels, data.rows());
    if (data.rows() < 2)
        throw std::invalid_argument("q1_vector: need at least two samples");
    const VectorXd w = normalized_weights(weights, data.rows());
    double u_mean = 0.0;
    bool has0 = false, has1 = false;
    for (Index b = 0; b < labels.size(); ++b) {
        if (labels[b] == 0) has0 = true;
        else if (labels[b] == 1) has1 = true;
        else throw std::invalid_argument("q1_vector: labels must be 0 or 1");
        u_mean += w[b] * labels[b];
    }
    if (!has0 || !has1)
        throw std::invalid_argument("q1_vector: both label values must be present");
    VectorXd uv = VectorXd::Zero(data.cols());
    VectorXd v_mean = VectorXd::Zero(data.cols());
    for (Index b = 0; b < data.rows(); ++b) {
        v_mean += w[b] * data.row(b).transpose();
        if (labels[b] == 1) uv += w[b] * data.row(b).transpose();
    }
    return uv - u_mean * v_mean;
}

MulticlassDirections q1_multiclass(const MatrixXd& data, const VectorXi& labels,
                                   const VectorXd& weights) {
    check_labels(labels, data.rows());
    const int n_classes = labels.maxCoeff() + 1;
    if (labels.minCoeff() < 0)
        throw std::invalid_argument("q1_multiclass: negative label");
    if (n_classes < 2)
        throw std::invalid_argument("q1_multiclass: need at least two classes");
    const VectorXd w = normalized_weights(weights, data.rows());

    VectorXd class_weight = VectorXd::Zero(n_classes);
    MatrixXd class_sum = MatrixXd::Zero(n_classes, data.cols());
    VectorXd v_mean = VectorXd::Zero(data.cols());
    for (Index b = 0; b < data.rows(); ++b) {
        class_weight[labels[b]] += w[b];
        class_sum.row(labels[b]) += w[b] * data.row(b);
        v_mean += w[b] * data.row(b).transpose();
    }
    for (int d = 0; d < n_classes; ++d)
        if (class_weight[d] <= 0.0)
            throw std::invalid_argument("q1_multiclass: class " +
                                        std::to_string(d) + " missing");
    MulticlassDirections out;
    VectorXd total = VectorXd::Zero(data.cols());
    for (int d = 0; d < n_classes; ++d) {
        VectorXd q_d = class_sum.row(d).transpose() - class_weight[d] * v_mean;
        total += q_d;
        out.all.push_back(std::move(q_d));
    }
    if (total.cwiseAbs().maxCoeff() > 1e-12 * (1.0 + v_mean.cwiseAbs().maxCoeff()))
        throw NumericalError("q1_multiclass: directions do not sum to zero");
    return out;
}

MatrixXd q2_matrix(const MatrixXd& data, const VectorXi& labels,
                   const VectorXd& weights) {
    check_labels(labels, data.rows());
    const VectorXd w = normalized_weights(weights, data.rows());
    double u_mean = 0.0;
    bool has0 = false, has1 = false;
    for (Index b = 0; b < labels.size(); ++b) {
        if (labels[b] == 0) has0 = true;
        else if (labels[b] == 1) has1 = true;
        else throw std::invalid_argument("q2_matrix: labels must be 0 or 1");
        u_mean += w[b] * labels[b];
    }
    if (!has0 || !has1)
        throw std::invalid_argument("q2_matrix: both label values must be present");
    // <(u - <u>) v v'> as one weighted Gram product
    VectorXd coeff(data.rows());
    for (Index b = 0; b < data.rows(); ++b)
        coeff[b] = w[b] * (labels[b] - u_mean);
    MatrixXd q2 = data.transpose() * coeff.asDiagonal() * data;
    return 0.5 * (q2 + q2.transpose());  // enforce exact symmetry
}

std::pair<double, double> marchenko_pastur_edges(double ratio) {
    if (ratio <= 0.0)
        throw std::invalid_argument("marchenko_pastur_edges: ratio must be > 0");
    const double s = std::sqrt(ratio);
    return {(1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s)};
}

QuadraticConstraint mp_truncate(const MatrixXd& matrix, Index n_samples,
                                double chi2) {
    if (n_samples <= 0)
        throw std::invalid_argument("mp_truncate: n_samples must be positive");
    if (matrix.rows() != matrix.cols())
        throw std::invalid_argument("mp_truncate: matrix must be square");
    const double lambda_plus =
        marchenko_pastur_edges(double(matrix.rows()) / double(n_samples)).second;

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (matrix + matrix.transpose()));
    std::vector<Index> kept;
    for (Index i = 0; i < matrix.rows(); ++i)
        if (es.eigenvalues()[i] > lambda_plus) kept.push_back(i);
    std::sort(kept.begin(), kept.end(), [&](Index a, Index b) {
        return es.eigenvalues()[a] > es.eigenvalues()[b];
    });

    QuadraticConstraint out;
    out.penalty_weight = chi2;
    if (kept.empty()) {
        out.inert = true;
        out.eigenvalues = VectorXd();
        out.eigenvectors = MatrixXd(matrix.rows(), 0);
        return out;
    }
    const double scale = es.eigenvalues()[kept.front()];
    out.original_scale = scale;
    out.eigenvalues = VectorXd(kept.size());
    out.eigenvectors = MatrixXd(matrix.rows(), kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k) {
        out.eigenvalues[k] = es.eigenvalues()[kept[k]] / scale;
        out.eigenvectors.col(k) = es.eigenvectors().col(kept[k]);
    }
    return out;
}

namespace {

void check_spins(const MatrixXd& samples) {
    for (Index b = 0; b < samples.rows(); ++b)
        for (Index i = 0; i < samples.cols(); ++i)
            if (samples(b, i) != 1.0 && samples(b, i) != -1.0)
                throw std::invalid_argument("ising_q2: samples must be +/-1 spins");
}

// Periodic autocorrelation a(dr,dc) = sum_{r,c} v(r,c) v(r+dr,c+dc) of one
// grid, flat row-major site order (site = r*L + c).
MatrixXd grid_autocorrelation_fft(const VectorXd& flat, int L) {
    using Cplx = std::complex<double>;
    Eigen::MatrixXcd f(L, L);
    Eigen::FFT<double> fft;
    std::vector<Cplx> line(L), out(L);
    // rows then columns
    for (int r = 0; r < L; ++r) {
        for (int c = 0; c < L; ++c) line[c] = Cplx(flat[r * L + c], 0.0);
        fft.fwd(out, line);
        for (int c = 0; c < L; ++c) f(r, c) = out[c];
    }
    for (int c = 0; c < L; ++c) {
        for (int r = 0; r < L; ++r) line[r] = f(r, c);
        fft.fwd(out, line);
        for (int r = 0; r < L; ++r) f(r, c) = out[r];
    }
    // power spectrum, then inverse transform
    for (int r = 0; r < L; ++r)
        for (int c = 0; c < L; ++c) f(r, c) = Cplx(std::norm(f(r, c)), 0.0);
    for (int r = 0; r < L; ++r) {
        for (int c = 0; c < L; ++c) line[c] = f(r, c);
        fft.inv(out, line);
        for (int c = 0; c < L; ++c) f(r, c) = out[c];
    }
    MatrixXd a(L, L);
    for (int c = 0; c < L; ++c) {
        for (int r = 0; r < L; ++r) line[r] = f(r, c);
        fft.inv(out, line);
        for (int r = 0; r < L; ++r) a(r, c) = out[r].real();
    }
    return a;
}

MatrixXd grid_autocorrelation_direct(const VectorXd& flat, int L) {
    MatrixXd a = MatrixXd::Zero(L, L);
    for (int dr = 0; dr < L; ++dr)
        for (int dc = 0; dc < L; ++dc) {
            double s = 0.0;
            for (int r = 0; r < L; ++r)
                for (int c = 0; c < L; ++c)
                    s += flat[r * L + c] *
                         flat[((r + dr) % L) * L + (c + dc) % L];
            a(dr, dc) = s;
        }
    return a;
}

template <typename AutocorrFn>
MatrixXd ising_q2_averaged(const MatrixXd& samples, int L, AutocorrFn&& autocorr) {
    if (samples.cols() != Index(L) * L)
        throw std::invalid_argument("ising_q2: sample width != L*L");
    check_spins(samples);
    const Index B = samples.rows();
    const Index N = samples.cols();
    VectorXd c(B);
    for (Index b = 0; b < B; ++b) c[b] = std::abs(samples.row(b).sum());
    const double c_mean = c.mean();

    MatrixXd qbar = MatrixXd::Zero(L, L);
    VectorXd flat(N);
    for (Index b = 0; b < B; ++b) {
        flat = samples.row(b).transpose();
        qbar += (c[b] - c_mean) * autocorr(flat, L);
    }
    qbar /= double(B) * double(N);

    MatrixXd q2(N, N);
    for (Index i = 0; i < N; ++i) {
        const int ri = int(i) / L, ci = int(i) % L;
        for (Index j = 0; j < N; ++j) {
            const int rj = int(j) / L, cj = int(j) % L;
            q2(i, j) = qbar(((rj - ri) % L + L) % L, ((cj - ci) % L + L) % L);
        }
    }
    return 0.5 * (q2 + q2.transpose());
}

}  // namespace

MatrixXd ising_q2(const MatrixXd& samples, int L) {
    return ising_q2_averaged(samples, L, grid_autocorrelation_fft);
}

MatrixXd ising_q2_direct(const MatrixXd& samples, int L) {
    return ising_q2_averaged(samples, L, grid_autocorrelation_direct);
}

MatrixXd ising_q2_raw(const MatrixXd& samples, int L) {
    if (samples.cols() != Index(L) * L)
        throw std::invalid_argument("ising_q2_raw: sample width != L*L");
    check_spins(samples);
    const Index B = samples.rows();
    VectorXd c(B);
    for (Index b = 0; b < B; ++b) c[b] = std::abs(samples.row(b).sum());
    const double c_mean = c.mean();
    VectorXd coeff = (c.array() - c_mean).matrix() / double(B);
    MatrixXd q2 = samples.transpose() * coeff.asDiagonal() * samples;
    return 0.5 * (q2 + q2.transpose());
}

namespace {

// Orthonormal basis of the span of `dirs` by modified Gram-Schmidt;
// dependent directions are dropped with a warning.
MatrixXd orthonormal_basis(const std::vector<const VectorXd*>& dirs) {
    const Index n = dirs.front()->size();
    MatrixXd basis(n, dirs.size());
    Index kept = 0;
    for (const VectorXd* d : dirs) {
        VectorXd v = *d;
        const double norm0 = v.norm();
        if (norm0 <= 0.0)
            throw std::invalid_argument("projection: zero direction");
        for (Index k = 0; k < kept; ++k)
            v -= basis.col(k).dot(v) * basis.col(k);
        // second pass for numerical orthogonality
        for (Index k = 0; k < kept; ++k)
            v -= basis.col(k).dot(v) * basis.col(k);
        if (v.norm() <= kDependentDirectionTol * norm0) {
            std::cerr << "[disrbm] warning: dropping linearly dependent "
                         "constraint direction\n";
            continue;
        }
        basis.col(kept++) = v / v.norm();
    }
    return basis.leftCols(kept);
}

}  // namespace

MatrixXd project_weights(const MatrixXd& weights,
                         const ConstraintSet& constraints) {
    for (const auto& c : constraints.linear)
        if (c.direction.size() != weights.rows())
            throw std::invalid_argument("project_weights: direction size mismatch");
    if (constraints.linear.empty()) return weights;

    // group hidden units by which directions apply to them
    std::map<std::vector<int>, std::vector<Index>> groups;
    for (Index mu = 0; mu < weights.cols(); ++mu) {
        std::vector<int> sig;
        for (std::size_t k = 0; k < constraints.linear.size(); ++k)
            if (constraints.linear[k].applies(mu)) sig.push_back(int(k));
        if (!sig.empty()) groups[sig].push_back(mu);
    }

    MatrixXd out = weights;
    for (const auto& [sig, units] : groups) {
        std::vector<const VectorXd*> dirs;
        for (int k : sig) dirs.push_back(&constraints.linear[k].direction);
        const MatrixXd basis = orthonormal_basis(dirs);
        if (basis.cols() == 0) continue;
        for (Index mu : units)
            out.col(mu) -= basis * (basis.transpose() * out.col(mu));
    }
    return out;
}

QuadraticPenalty quadratic_penalty_gradient(const MatrixXd& weights,
                                            const QuadraticConstraint& quad) {
    QuadraticPenalty result;
    result.gradient = MatrixXd::Zero(weights.rows(), weights.cols());
    if (quad.inert || quad.rank() == 0) return result;
    if (quad.eigenvectors.rows() != weights.rows())
        throw std::invalid_argument("quadratic_penalty_gradient: size mismatch");

    std::vector<Index> cols;
    for (Index mu = 0; mu < weights.cols(); ++mu)
        if (quad.applies(mu)) cols.push_back(mu);
    if (cols.empty()) return result;

    MatrixXd wc(weights.rows(), cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) wc.col(k) = weights.col(cols[k]);

    const MatrixXd qw = quad.apply(wc);            // q2 Wc
    const MatrixXd m = wc.transpose() * qw;        // Wc' q2 Wc
    result.penalty = quad.penalty_weight * m.squaredNorm();
    const MatrixXd grad = (4.0 * quad.penalty_weight) * (qw * m);
    for (std::size_t k = 0; k < cols.size(); ++k)
        result.gradient.col(cols[k]) = grad.col(k);
    return result;
}

ResidualReport constraint_residuals(const RbmModel& model,
                                    const ConstraintSet& constraints,
                                    const MatrixXd& data, const VectorXi& labels,
                                    const VectorXd& weights) {
    if (data.rows() == 0)
        throw std::invalid_argument("constraint_residuals: no labeled data");
    check_labels(labels, data.rows());
    const VectorXd w = normalized_weights(weights, data.rows());

    ResidualReport report;
    const MatrixXd inputs = hidden_inputs(model, data);
    const Index m = model.n_hidden;

    double u_mean = 0.0;
    for (Index b = 0; b < data.rows(); ++b) u_mean += w[b] * labels[b];
    const double u_var = [&] {
        double s = 0.0;
        for (Index b = 0; b < data.rows(); ++b)
            s += w[b] * (labels[b] - u_mean) * (labels[b] - u_mean);
        return s;
    }();

    report.pearson = VectorXd::Zero(m);
    report.degenerate.assign(m, false);
    VectorXd i_mean = inputs.transpose() * w;
    for (Index mu = 0; mu < m; ++mu) {
        double var = 0.0, cov = 0.0;
        for (Index b = 0; b < data.rows(); ++b) {
            const double di = inputs(b, mu) - i_mean[mu];
            var += w[b] * di * di;
            cov += w[b] * di * (labels[b] - u_mean);
        }
        if (var <= 1e-14 || u_var <= 1e-14) {
            report.degenerate[mu] = true;
            report.pearson[mu] = 0.0;
        } else {
            report.pearson[mu] = cov / std::sqrt(var * u_var);
        }
    }

    for (const auto& c : constraints.linear) {
        const double qn = c.direction.norm();
        for (Index mu = 0; mu < m; ++mu) {
            if (!c.applies(mu)) continue;
            const double wn = model.weights.col(mu).norm();
            if (wn <= 0.0 || qn <= 0.0) continue;
            const double res =
                std::abs(c.direction.dot(model.weights.col(mu))) / (qn * wn);
            report.max_linear_residual = std::max(report.max_linear_residual, res);
        }
    }

    // second-order input-label correlations over constrained pairs (Frobenius)
    std::vector<Index> constrained;
    for (Index mu = 0; mu < m; ++mu) {
        bool is_constrained = false;
        for (const auto& c : constraints.linear)
            if (c.applies(mu)) is_constrained = true;
        if (constraints.quadratic && constraints.quadratic->applies(mu))
            is_constrained = true;
        if (is_constrained || constraints.empty()) constrained.push_back(mu);
    }
    if (!constrained.empty()) {
        MatrixXd ic(data.rows(), constrained.size());
        for (std::size_t k = 0; k < constrained.size(); ++k)
            ic.col(k) = inputs.col(constrained[k]);
        VectorXd coeff(data.rows());
        for (Index b = 0; b < data.rows(); ++b)
            coeff[b] = w[b] * (labels[b] - u_mean);
        const MatrixXd c_mat = ic.transpose() * coeff.asDiagonal() * ic;
        report.input_label_norm = c_mat.norm();
    }

    if (constraints.quadratic && !constraints.quadratic->inert) {
        std::vector<Index> cols;
        for (Index mu = 0; mu < m; ++mu)
            if (constraints.quadratic->applies(mu)) cols.push_back(mu);
        if (!cols.empty()) {
            MatrixXd wc(model.weights.rows(), cols.size());
            for (std::size_t k = 0; k < cols.size(); ++k)
                wc.col(k) = model.weights.col(cols[k]);
            report.quadratic_norm =
                (wc.transpose() * constraints.quadratic->apply(wc)).norm();
        }
    }
    return report;
}

}  // namespace disrbm
