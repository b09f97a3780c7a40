#pragma once

#include <optional>
#include <vector>

#include "disrbm/rbm.hpp"
#include "disrbm/types.hpp"

namespace disrbm {

/// Orthogonality constraint q . w_mu = 0 on the weight columns of the hidden
/// units listed in `applies_to` (all units when `applies_to_all`).
struct LinearConstraint {
    VectorXd direction;  // q, nonzero
    bool applies_to_all = true;
    std::vector<Index> applies_to;  // used when !applies_to_all

    bool applies(Index unit) const;
};

/// Symmetric second-order constraint held in eigen form
/// q2 = sum_k lambda_k u_k u_k', rescaled to unit spectral norm so the
/// penalty weight chi2 carries the same meaning across datasets.
struct QuadraticConstraint {
    VectorXd eigenvalues;   // length rank, descending by |value|
    MatrixXd eigenvectors;  // n x rank, orthonormal columns
    double penalty_weight = 100.0;  // chi2
    double original_scale = 1.0;    // spectral norm prior to rescaling
    bool applies_to_all = true;
    std::vector<Index> applies_to;
    bool inert = false;  // empty after truncation; penalty is a no-op

    Index rank() const { return eigenvalues.size(); }
    bool applies(Index unit) const;
    MatrixXd dense() const;
    /// q2 * X without forming the dense matrix.
    MatrixXd apply(const MatrixXd& x) const;

    static QuadraticConstraint from_dense(const MatrixXd& matrix, double chi2);
};

/// Full constraint specification for one training run. Released units are the
/// hidden indices exempt from at least one linear direction; with multiple
/// directions each released unit stays free along exactly one of them.
struct ConstraintSet {
    std::vector<LinearConstraint> linear;
    std::optional<QuadraticConstraint> quadratic;
    std::vector<Index> released;

    bool empty() const { return linear.empty() && !quadratic; }

    /// One shared direction, orthogonality imposed on every hidden unit
    /// except `released_units`.
    static ConstraintSet single_linear(const VectorXd& q,
                                       const std::vector<Index>& released_units,
                                       Index n_hidden);

    /// D-1 independent directions; released unit k is exempt from direction k
    /// only and stays constrained against the others.
    static ConstraintSet multiclass(const std::vector<VectorXd>& directions,
                                    const std::vector<Index>& released_units,
                                    Index n_hidden);
};

/// q_i = <u v_i>_D - <u>_D <v_i>_D over (optionally weighted) data with
/// binary labels in {0,1}. Rejects single-class label vectors.
VectorXd q1_vector(const MatrixXd& data, const VectorXi& labels,
                   const VectorXd& weights = VectorXd());

struct MulticlassDirections {
    std::vector<VectorXd> all;  // one per class, sums to zero
    /// Linearly independent subset: classes 1..D-1.
    std::vector<VectorXd> independent() const {
        return {all.begin() + 1, all.end()};
    }
};

/// One direction per one-hot class; verifies that they sum to zero.
MulticlassDirections q1_multiclass(const MatrixXd& data, const VectorXi& labels,
                                   const VectorXd& weights = VectorXd());

/// q2_{ij} = <u v_i v_j>_D - <u>_D <v_i v_j>_D (raw second moments).
MatrixXd q2_matrix(const MatrixXd& data, const VectorXi& labels,
                   const VectorXd& weights = VectorXd());

/// Noise band [lambda-, lambda+] = (1 -+ sqrt(r))^2 of sample correlation
/// spectra at variable/sample ratio r.
std::pair<double, double> marchenko_pastur_edges(double ratio);

/// Keeps the eigenpairs of `matrix` above the Marchenko-Pastur edge
/// lambda+ = (1 + sqrt(r))^2, r = n_variables / n_samples. Eigenvalues inside
/// the noise band are discarded; an empty result is returned inert.
QuadraticConstraint mp_truncate(const MatrixXd& matrix, Index n_samples,
                                double chi2 = 100.0);

/// Q2_{ij} = <|sum_k v_k| v_i v_j> - <|sum_k v_k|> <v_i v_j> for spin grids,
/// averaged over lattice translations. Rows of `samples` are L*L grids in
/// row-major site order. Spectral (FFT) path; `ising_q2_direct` computes the
/// same object by direct displacement sums and `ising_q2_raw` the plain
/// empirical matrix without translation averaging.
MatrixXd ising_q2(const MatrixXd& samples, int L);
MatrixXd ising_q2_direct(const MatrixXd& samples, int L);
MatrixXd ising_q2_raw(const MatrixXd& samples, int L);

/// Replaces every constrained column w by (I - Q Q') w where Q spans the
/// unit's applicable directions (orthonormalized, dependent ones dropped).
/// Released columns are returned bit-identical; idempotent.
MatrixXd project_weights(const MatrixXd& weights,
                         const ConstraintSet& constraints);

struct QuadraticPenalty {
    MatrixXd gradient;  // same shape as W; zero on released columns
    double penalty = 0.0;
};

/// penalty = chi2 ||Wc' q2 Wc||_F^2 on constrained columns Wc and its exact
/// gradient chi2 * 4 q2 Wc (Wc' q2 Wc).
QuadraticPenalty quadratic_penalty_gradient(const MatrixXd& weights,
                                            const QuadraticConstraint& quad);

struct ResidualReport {
    VectorXd pearson;           // rho_mu per hidden unit
    std::vector<bool> degenerate;  // zero-variance inputs flagged, rho set 0
    double max_linear_residual = 0.0;   // max |q.w| / (|q| |w|), constrained units
    double input_label_norm = 0.0;      // ||C_{mu nu}||_F over constrained pairs
    double quadratic_norm = 0.0;        // ||Wc' q2 Wc||_F when quadratic present
};

/// The quantities monitored during constrained training: per-unit label
/// correlations of the inputs, worst normalized linear residual, and the
/// second-order input-label correlation norm.
ResidualReport constraint_residuals(const RbmModel& model,
                                    const ConstraintSet& constraints,
                                    const MatrixXd& data, const VectorXi& labels,
                                    const VectorXd& weights = VectorXd());

}  // namespace disrbm
