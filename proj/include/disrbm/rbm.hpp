#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "disrbm/rng.hpp"
#include "disrbm/types.hpp"

namespace disrbm {

// Stable scalar kernels used throughout the energy/likelihood code.
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(1 + e^x)
inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

/// log(2 cosh x) = log(e^x + e^-x)
inline double log2cosh(double x) {
    return std::abs(x) + std::log1p(std::exp(-2.0 * std::abs(x)));
}

/// Bipartite energy model over a visible and a hidden layer coupled by a
/// dense weight matrix. Layouts are flat: one-hot layers occupy q
/// consecutive units per site (site-major), so every operation below works
/// on plain vectors regardless of kind.
struct RbmModel {
    Index n_visible = 0;  // flat unit count (n_sites * visible_states for one-hot)
    Index n_hidden = 0;
    UnitKind visible_kind = UnitKind::Binary;
    UnitKind hidden_kind = UnitKind::Binary;
    int visible_states = 1;  // q for one-hot visible, 1 otherwise
    bool symmetric = false;  // spin/spin model with fields frozen at zero

    MatrixXd weights;        // n_visible x n_hidden
    VectorXd visible_fields; // g
    VectorXd hidden_fields;  // theta

    Index n_sites() const {
        return visible_kind == UnitKind::OneHot ? n_visible / visible_states
                                                : n_visible;
    }

    void validate() const;
};

RbmModel make_rbm(Index n_visible, Index n_hidden,
                  UnitKind visible_kind = UnitKind::Binary,
                  UnitKind hidden_kind = UnitKind::Binary,
                  int visible_states = 1, bool symmetric = false);

/// Frozen hidden units: (hidden index, value) pairs applied at every Gibbs
/// round. Sparse on purpose, the model itself is never modified.
using ClampMap = std::vector<std::pair<Index, double>>;

// One-hot embedding helpers (site-major blocks of q units).
VectorXd onehot_embed(const VectorXi& state_indices, int q);
VectorXi onehot_indices(const VectorXd& v, int q);

double energy(const RbmModel& model, const VectorXd& v, const VectorXd& h);

/// I_mu = sum_i w_{i mu} v_i
VectorXd hidden_input(const RbmModel& model, const VectorXd& v);

/// Rows of `data` are visible configurations; returns one row of inputs per
/// configuration.
MatrixXd hidden_inputs(const RbmModel& model, const MatrixXd& data);

/// E[h | v] per unit from the logits theta + I(v).
VectorXd hidden_conditional_mean(const RbmModel& model, const VectorXd& input);
MatrixXd hidden_conditional_means(const RbmModel& model, const MatrixXd& inputs);

VectorXd sample_hidden_given_visible(const RbmModel& model, const VectorXd& v,
                                     Rng& rng);
VectorXd sample_visible_given_hidden(const RbmModel& model, const VectorXd& h,
                                     Rng& rng);

// Batch forms used by the trainers and annealing walkers; one row per chain.
MatrixXd sample_hidden_batch(const RbmModel& model, const MatrixXd& inputs,
                             Rng& rng);
MatrixXd sample_visible_batch(const RbmModel& model, const MatrixXd& hidden,
                              Rng& rng);

/// Samples a layer of the given kind from explicit per-unit logits (rows are
/// independent configurations). One-hot layers read q consecutive logits per
/// site and draw from the softmax.
MatrixXd sample_units_from_logits(UnitKind kind, int q, const MatrixXd& logits,
                                  Rng& rng);

/// Per-row log sum over unit states: softplus (binary), log 2cosh (spin), or
/// per-site log-sum-exp (one-hot) of the logits, summed across the row.
VectorXd log_kernel_rowsums(UnitKind kind, int q, const MatrixXd& logits);

/// Alternating block sampling: h|v then v|h, `steps` times. Clamped hidden
/// units keep their frozen values at every round.
std::pair<VectorXd, VectorXd> gibbs_chain(const RbmModel& model,
                                          const VectorXd& v0, int steps,
                                          const ClampMap& clamp, Rng& rng);

/// log sum_h e^{-E(v,h)} = g.v + sum_mu sp(theta_mu + I_mu(v)), with sp the
/// hidden kind's partition kernel (softplus for binary, log 2cosh for spin).
double free_energy(const RbmModel& model, const VectorXd& v);
VectorXd free_energies(const RbmModel& model, const MatrixXd& data);

/// Exact log Z by enumerating the cheaper layer and accumulating free
/// energies through log-sum-exp. Guarded: n_visible + n_hidden <= 26.
double exact_log_partition(const RbmModel& model);

/// <free_energy(v)>_D - log_z, optionally weighted (weights are normalized
/// internally).
double mean_log_likelihood(const RbmModel& model, const MatrixXd& data,
                           double log_z, const VectorXd& weights = VectorXd());

/// All visible configurations of a small model (rows) with their exact
/// probabilities. Test oracle for samplers; same size guard as above.
std::pair<MatrixXd, VectorXd> exact_visible_distribution(const RbmModel& model);

double logsumexp(const VectorXd& values);
double logmeanexp(const VectorXd& values);

}  // namespace disrbm
