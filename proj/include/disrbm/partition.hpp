#pragma once

#include "disrbm/rbm.hpp"
#include "disrbm/rng.hpp"
#include "disrbm/types.hpp"

namespace disrbm {

/// Interpolation grid for annealed importance sampling. Betas run strictly
/// increasing from 0 to 1; weights and hidden fields are scaled by beta while
/// visible fields stay at full strength, so the beta = 0 endpoint is the
/// independent-visible model whose log Z is closed-form.
///
/// For sharply trained models the learned fields can sit far from any data
/// marginal and the annealing path then crosses an abrupt transition;
/// supplying `base_visible_fields` (e.g. logits of the training-data means)
/// starts the path at those base rates and interpolates the visible fields
/// (1-beta) base + beta model instead.
struct AnnealSchedule {
    VectorXd betas;       // monotone grid over [0, 1]
    Index n_walkers = 100;
    int gibbs_steps_per_beta = 1;
    VectorXd base_visible_fields;  // empty: keep the model's fields throughout

    static AnnealSchedule uniform(Index n_betas, Index n_walkers = 100,
                                  int gibbs_steps_per_beta = 1);
    void validate() const;
};

/// Logits of the per-unit data means, clipped; the customary base-rate fields.
VectorXd base_rate_fields(const MatrixXd& data, UnitKind kind, int n_states = 1,
                          double clip = 20.0);

enum class BiasDirection { LowerBiased, UpperBiased };

struct LogZEstimate {
    double log_z = 0.0;            // log-mean-exp of per_walker
    BiasDirection direction = BiasDirection::LowerBiased;
    VectorXd per_walker;           // per-walker log Z values
    double spread = 0.0;           // standard deviation of per_walker
    int n_failed = 0;              // walkers aborted on non-finite weights

    double standard_error() const {
        return spread / std::sqrt(double(per_walker.size()));
    }
};

/// The zero-weight model with the same fields: independent units that can be
/// sampled exactly.
RbmModel base_model(const RbmModel& model);

/// Closed-form log Z of a zero-weight model.
double base_log_partition(const RbmModel& model);

/// Forward annealing from the independent base to the full model. The
/// estimate is a stochastic lower bound of log Z; it improves monotonically
/// (in distribution) with the number of interpolating distributions.
LogZEstimate ais(const RbmModel& model, const AnnealSchedule& schedule,
                 Rng& rng);

/// Reverse annealing that melts the model back into the base. Seeds must lie
/// in the model's high-probability region (training data or long chains);
/// gives a stochastic upper bound of log Z.
LogZEstimate raise_estimate(const RbmModel& model,
                            const AnnealSchedule& schedule,
                            const MatrixXd& seeds, Rng& rng,
                            int equilibration_steps = 10);

struct SandwichReport {
    LogZEstimate lower;  // AIS
    LogZEstimate upper;  // RAISE
    double gap = 0.0;    // upper.log_z - lower.log_z
    bool converged = false;
    double tolerance = 0.0;
};

/// Runs both estimators (RAISE seeded from long Gibbs chains) and reports the
/// bracket. Converged when the gap is below `gap_tolerance` nats.
SandwichReport sandwich_report(const RbmModel& model,
                               const AnnealSchedule& schedule, Rng& rng,
                               double gap_tolerance = 0.5,
                               Index seed_burn_in = 1000);

}  // namespace disrbm
