#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "disrbm/constraints.hpp"
#include "disrbm/rbm.hpp"
#include "disrbm/rng.hpp"
#include "disrbm/types.hpp"

namespace disrbm {

struct TrainConfig {
    double learning_rate = 0.001;
    Index batch_size = 100;
    Index n_chains = 100;    // persistent Markov chains (K)
    Index n_updates = 10000;
    double l2_weight = 0.001;       // gamma
    double penalty_weight = 100.0;  // chi2, applied to quadratic constraints
    int gibbs_rounds_per_update = 1;  // chain refresh depth (PCD-k)
    double average_tail_fraction = 0.0;  // >0: return parameters averaged
                                         // over the final fraction of updates
    double beta1 = 0.9;             // adaptive moment decays
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    bool centering = true;
    double centering_decay = 0.99;
    Index reset_check_interval = 5;  // epochs between stuck-unit checks
    bool enable_unit_reset = false;
    double saturation_epsilon = 0.01;  // mean-activation threshold for "stuck"
    double field_clip = 30.0;          // |field| bound at initialization
    Index record_interval = 100;       // history rows every this many updates
    std::uint64_t seed = 0;

    void validate() const;
};

/// Architecture requested from init_model; everything the data cannot tell us.
struct ModelShape {
    Index n_hidden = 0;
    UnitKind visible_kind = UnitKind::Binary;
    UnitKind hidden_kind = UnitKind::Binary;
    int visible_states = 1;
    bool symmetric = false;
};

/// Visible fields match the data's unit means (logit for binary, atanh for
/// spin, log-frequency for one-hot, clipped at +-field_clip); weights are
/// i.i.d. Gaussian with std 0.1/sqrt(N); hidden fields zero. Symmetric models
/// keep all fields at zero.
RbmModel init_model(const MatrixXd& data, const ModelShape& shape,
                    const TrainConfig& config, Rng& rng,
                    const VectorXd& weights = VectorXd());

struct ParameterGradient {
    MatrixXd weights;
    VectorXd visible_fields;
    VectorXd hidden_fields;
    double quadratic_penalty = 0.0;

    double norm() const;
};

/// Persistent chains, optimizer moments, and centering offsets.
struct TrainerState {
    MatrixXd chain_v, chain_h;
    MatrixXd adam_m_w, adam_v_w;
    VectorXd adam_m_g, adam_v_g, adam_m_th, adam_v_th;
    long step = 0;
    VectorXd offset_v, offset_h;  // centering offsets (EMA of means)
    VectorXd activation_sum;      // per-unit data-side activation accumulator
    long activation_batches = 0;

    static TrainerState init(const RbmModel& model, const MatrixXd& data,
                             const TrainConfig& config, Rng& rng);
};

/// One persistent-contrastive-divergence step: advances every chain by one
/// Gibbs round and returns the ascent direction <dE/dw>_model - <dE/dw>_data
/// estimated on chains vs minibatch, centered when configured, with the L2
/// term and the quadratic penalty gradient already applied.
ParameterGradient pcd_gradient(const RbmModel& model, const MatrixXd& minibatch,
                               TrainerState& state, const TrainConfig& config,
                               const ConstraintSet* constraints, Rng& rng);

struct HistoryRow {
    long update = 0;
    double pseudo_ll = 0.0;  // <F(data batch)> - <F(chains)>
    double grad_norm = 0.0;
    double max_linear_residual = 0.0;  // normalized |q.w| on constrained columns
    double quadratic_penalty = 0.0;
    int n_reset_units = 0;
};

using TrainHistory = std::vector<HistoryRow>;

struct TrainResult {
    RbmModel model;
    TrainHistory history;
};

/// Adaptive-moment likelihood ascent with projection of the constrained
/// weight columns after every update. Deterministic given config.seed.
TrainResult train(RbmModel model, const MatrixXd& data,
                  const ConstraintSet* constraints, const TrainConfig& config,
                  const VectorXd& sample_weights = VectorXd());

/// Convenience: initialize and train in one call.
TrainResult train_from_data(const MatrixXd& data, const ModelShape& shape,
                            const ConstraintSet* constraints,
                            const TrainConfig& config,
                            const VectorXd& sample_weights = VectorXd());

struct LikelihoodCosts {
    double partial_erasure = 0.0;        // L_unconstrained - L_constrained
    double disentanglement = 0.0;        // L_unconstrained - L_released
    double partial_erasure_per_unit = 0.0;
    double disentanglement_per_unit = 0.0;
};

/// The two likelihood costs, per configuration and per unit (pixel, spin, or
/// sequence site). All three inputs must come from the same test set.
LikelihoodCosts likelihood_costs(double l_unconstrained, double l_constrained,
                                 double l_released, Index n_units = 1);

void write_history_csv(const std::string& path, const TrainHistory& history);

}  // namespace disrbm
