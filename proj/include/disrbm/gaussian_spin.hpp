#pragma once

#include <utility>

#include "disrbm/types.hpp"

namespace disrbm {

/// Tractable mixture model: one +-1 hidden unit carrying the class split and
/// M-1 Gaussian hidden units carrying within-class covariance. The visible
/// layer is Gaussian with per-unit scales sigma. Normalizable iff
/// Sigma^{-1} = D - W W' is positive definite (D = diag(1/sigma^2)).
struct GaussianSpinModel {
    VectorXd sigma;    // per-visible standard deviations, > 0
    MatrixXd weights;  // N x (M-1) couplings to the Gaussian hidden units
    VectorXd w_star;   // couplings to the spin unit
    VectorXd g;        // visible fields
    double theta = 0.0;  // spin unit bias

    Index n_visible() const { return sigma.size(); }
    /// Conditional class mean <v | h1> = Sigma g + h1 Sigma w_star.
    VectorXd class_mean(int h1) const;
    MatrixXd sigma_matrix() const;  // Sigma = (D - W W')^{-1}
};

enum class GsRegime { Unconstrained, Constrained, Released };

const char* to_string(GsRegime regime);

struct SpectralFit {
    VectorXd eigenvalues;   // selected lambda > 1, descending
    MatrixXd eigenvectors;  // matching columns (scaled coordinates)
    GsRegime regime = GsRegime::Unconstrained;
    double likelihood = 0.0;       // per configuration, shared constant dropped
    double separation_term = 0.0;  // 0.5 q' D q, paid only by the constrained fit
    bool reduced_rank = false;     // fewer than M-1 eigenvalues above 1
    bool ill_conditioned = false;  // lambda_max > 1e8
};

/// Ctilde = S (C - q q') S with S = diag(1/sigma), C the empirical
/// covariance, and q the half class-mean difference (labels coded +-1).
/// Warns when the classes are unbalanced.
MatrixXd build_ctilde(const MatrixXd& data, const VectorXi& labels,
                      const VectorXd& sigma);

/// Class direction <h1 v> - <h1><v> with u in {0,1} coded as h1 = 2u - 1.
VectorXd gs_class_direction(const MatrixXd& data, const VectorXi& labels);

/// Per-unit empirical standard deviations, floored at 1e-3.
VectorXd estimate_sigma(const MatrixXd& data);

/// Closed-form maximum-likelihood fit of the Gaussian-Spin model. The top
/// M-1 eigenpairs above 1 of Ctilde (unconstrained) or of its compression
/// P Ctilde P orthogonal to the class direction (released, constrained)
/// define the Gaussian weights; the spin unit takes w* = Sigma^{-1} q, zeroed
/// in the constrained regime.
std::pair<GaussianSpinModel, SpectralFit> gs_fit(const MatrixXd& data,
                                                 const VectorXi& labels,
                                                 Index m_hidden,
                                                 GsRegime regime);

/// Likelihood formula evaluator: 1/2 sum (lambda - 1 - log lambda) minus
/// log cosh(g . q1). Additive constants dropped; lambda must be positive.
double gs_likelihood(const SpectralFit& fit, const VectorXd& g,
                     const VectorXd& q1);

struct InterlacingReport {
    VectorXd original;   // eigenvalues of the matrix, descending
    VectorXd projected;  // eigenvalues of P M P, descending
    VectorXd gaps;       // original - projected, per rank
    bool holds = false;
    double max_violation = 0.0;
};

/// Verifies lambda_1 >= lambda^p_1 >= lambda_2 >= ... >= lambda_N >=
/// lambda^p_N = 0 for the compression orthogonal to `direction`.
InterlacingReport poincare_check(const MatrixXd& matrix,
                                 const VectorXd& direction,
                                 double tolerance = 1e-9);

struct GsCostTable {
    double l_unconstrained = 0.0;
    double l_constrained = 0.0;
    double l_released = 0.0;
    double erasure_cost = 0.0;          // l_unconstrained - l_constrained
    double disentanglement_cost = 0.0;  // l_unconstrained - l_released
};

/// Fits all three regimes; the ordering L_unconstr >= L_rel >= L_constr is
/// structural (nested feasible sets, exact closed-form maximizers).
GsCostTable gs_cost_table(const MatrixXd& data, const VectorXi& labels,
                          Index m_hidden);

}  // namespace disrbm
