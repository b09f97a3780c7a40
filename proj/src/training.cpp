#include "disrbm/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace disrbm {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate <= 0");
    if (batch_size <= 0 || n_chains <= 0) throw std::invalid_argument("batch/chain count <= 0");
    if (n_updates < 0) throw std::invalid_argument("n_updates < 0");
    if (l2_weight < 0.0 || penalty_weight < 0.0)
        throw std::invalid_argument("regularization weights must be >= 0");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("adaptive moment decays must be in (0,1)");
    if (gibbs_rounds_per_update < 1)
        throw std::invalid_argument("gibbs_rounds_per_update must be >= 1");
    if (average_tail_fraction < 0.0 || average_tail_fraction > 1.0)
        throw std::invalid_argument("average_tail_fraction must be in [0, 1]");
    if (record_interval <= 0) throw std::invalid_argument("record_interval <= 0");
}

namespace {

double clip(double x, double bound) {
    return std::clamp(x, -bound, bound);
}

VectorXd weighted_column_means(const MatrixXd& data, const VectorXd& weights) {
    if (weights.size() == 0)
        return data.colwise().mean().transpose();
    return data.transpose() * (weights / weights.sum());
}

}  // namespace

RbmModel init_model(const MatrixXd& data, const ModelShape& shape,
                    const TrainConfig& config, Rng& rng,
                    const VectorXd& weights) {
    if (data.rows() == 0) throw std::invalid_argument("init_model: empty data");
    config.validate();
    RbmModel model = make_rbm(data.cols(), shape.n_hidden, shape.visible_kind,
                              shape.hidden_kind, shape.visible_states,
                              shape.symmetric);

    const double std_dev = 0.1 / std::sqrt(double(model.n_visible));
    std::normal_distribution<double> gauss(0.0, std_dev);
    for (Index i = 0; i < model.n_visible; ++i)
        for (Index mu = 0; mu < model.n_hidden; ++mu)
            model.weights(i, mu) = gauss(rng);

    if (!shape.symmetric) {
        const VectorXd means = weighted_column_means(data, weights);
        switch (shape.visible_kind) {
            case UnitKind::Binary:
                for (Index i = 0; i < model.n_visible; ++i) {
                    const double p = std::clamp(means[i], 0.0, 1.0);
                    model.visible_fields[i] =
                        clip(std::log(p) - std::log1p(-p), config.field_clip);
                }
                break;
            case UnitKind::Spin:
                for (Index i = 0; i < model.n_visible; ++i)
                    model.visible_fields[i] =
                        clip(std::atanh(std::clamp(means[i], -1.0, 1.0)),
                             config.field_clip);
                break;
            case UnitKind::OneHot:
                // log-frequency fields give a softmax matching the data means
                for (Index i = 0; i < model.n_visible; ++i)
                    model.visible_fields[i] = clip(
                        std::log(std::max(means[i], 0.0)), config.field_clip);
                break;
        }
    }
    return model;
}

double ParameterGradient::norm() const {
    return std::sqrt(weights.squaredNorm() + visible_fields.squaredNorm() +
                     hidden_fields.squaredNorm());
}

TrainerState TrainerState::init(const RbmModel& model, const MatrixXd& data,
                                const TrainConfig& config, Rng& rng) {
    TrainerState st;
    st.chain_v.resize(config.n_chains, model.n_visible);
    std::uniform_int_distribution<Index> pick(0, data.rows() - 1);
    for (Index k = 0; k < config.n_chains; ++k)
        st.chain_v.row(k) = data.row(pick(rng));
    st.chain_h = hidden_conditional_means(model, hidden_inputs(model, st.chain_v));
    st.adam_m_w = MatrixXd::Zero(model.n_visible, model.n_hidden);
    st.adam_v_w = MatrixXd::Zero(model.n_visible, model.n_hidden);
    st.adam_m_g = VectorXd::Zero(model.n_visible);
    st.adam_v_g = VectorXd::Zero(model.n_visible);
    st.adam_m_th = VectorXd::Zero(model.n_hidden);
    st.adam_v_th = VectorXd::Zero(model.n_hidden);
    st.offset_v = data.colwise().mean().transpose();
    st.offset_h = st.chain_h.colwise().mean().transpose();
    st.activation_sum = VectorXd::Zero(model.n_hidden);
    st.activation_batches = 0;
    return st;
}

ParameterGradient pcd_gradient(const RbmModel& model, const MatrixXd& minibatch,
                               TrainerState& state, const TrainConfig& config,
                               const ConstraintSet* constraints, Rng& rng) {
    if (minibatch.rows() == 0)
        throw std::invalid_argument("pcd_gradient: empty minibatch");

    // data-side conditional means
    const MatrixXd data_h =
        hidden_conditional_means(model, hidden_inputs(model, minibatch));

    // advance the persistent chains (one Gibbs round by default)
    for (int round = 0; round < config.gibbs_rounds_per_update; ++round) {
        const MatrixXd chain_inputs = hidden_inputs(model, state.chain_v);
        const MatrixXd h_sample = sample_hidden_batch(model, chain_inputs, rng);
        state.chain_v = sample_visible_batch(model, h_sample, rng);
    }
    state.chain_h =
        hidden_conditional_means(model, hidden_inputs(model, state.chain_v));

    const double inv_b = 1.0 / double(minibatch.rows());
    const double inv_k = 1.0 / double(state.chain_v.rows());

    VectorXd lambda = VectorXd::Zero(model.n_visible);
    VectorXd nu = VectorXd::Zero(model.n_hidden);
    if (config.centering) {
        const double d = config.centering_decay;
        state.offset_v = d * state.offset_v +
                         (1.0 - d) * minibatch.colwise().mean().transpose();
        state.offset_h =
            d * state.offset_h + (1.0 - d) * data_h.colwise().mean().transpose();
        lambda = state.offset_v;
        nu = state.offset_h;
    }

    const VectorXd data_v_mean = minibatch.colwise().mean().transpose();
    const VectorXd data_h_mean = data_h.colwise().mean().transpose();
    const VectorXd model_v_mean = state.chain_v.colwise().mean().transpose();
    const VectorXd model_h_mean = state.chain_h.colwise().mean().transpose();

    ParameterGradient grad;
    // centered moment difference; plain moments when centering is off
    grad.weights =
        inv_b * (minibatch.rowwise() - lambda.transpose()).transpose() *
            (data_h.rowwise() - nu.transpose()) -
        inv_k * (state.chain_v.rowwise() - lambda.transpose()).transpose() *
            (state.chain_h.rowwise() - nu.transpose());
    grad.visible_fields = data_v_mean - model_v_mean - grad.weights * nu;
    grad.hidden_fields =
        data_h_mean - model_h_mean - grad.weights.transpose() * lambda;

    grad.weights -= config.l2_weight * model.weights;

    if (constraints && constraints->quadratic &&
        !constraints->quadratic->inert) {
        QuadraticConstraint quad = *constraints->quadratic;
        quad.penalty_weight = config.penalty_weight;
        const QuadraticPenalty pen =
            quadratic_penalty_gradient(model.weights, quad);
        grad.weights -= pen.gradient;
        grad.quadratic_penalty = pen.penalty;
    }

    state.activation_sum += data_h_mean;
    state.activation_batches += 1;
    return grad;
}

namespace {

void adam_update(Eigen::Ref<MatrixXd> param, Eigen::Ref<MatrixXd> m,
                 Eigen::Ref<MatrixXd> v, const MatrixXd& grad,
                 const TrainConfig& cfg, long step) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(step));
    param += (cfg.learning_rate / bc1) *
             (m.array() / ((v.array() / bc2).sqrt() + cfg.adam_epsilon)).matrix();
}

int reset_stuck_units(RbmModel& model, TrainerState& state,
                      const TrainConfig& config, Rng& rng) {
    if (state.activation_batches == 0) return 0;
    const VectorXd mean_act =
        state.activation_sum / double(state.activation_batches);
    const double eps = config.saturation_epsilon;
    const double std_dev = 0.1 / std::sqrt(double(model.n_visible));
    std::normal_distribution<double> gauss(0.0, std_dev);

    int n_reset = 0;
    for (Index mu = 0; mu < model.n_hidden; ++mu) {
        // activation probability regardless of unit support
        const double p = model.hidden_kind == UnitKind::Spin
                             ? 0.5 * (mean_act[mu] + 1.0)
                             : mean_act[mu];
        if (p >= eps && p <= 1.0 - eps) continue;
        // fold the frozen unit's contribution into the visible fields
        if (!model.symmetric) {
            const double frozen =
                model.hidden_kind == UnitKind::Spin ? (p > 0.5 ? 1.0 : -1.0)
                                                    : (p > 0.5 ? 1.0 : 0.0);
            model.visible_fields += frozen * model.weights.col(mu);
            model.hidden_fields[mu] = 0.0;
        }
        for (Index i = 0; i < model.n_visible; ++i)
            model.weights(i, mu) = gauss(rng);
        state.adam_m_w.col(mu).setZero();
        state.adam_v_w.col(mu).setZero();
        state.adam_m_th[mu] = 0.0;
        state.adam_v_th[mu] = 0.0;
        ++n_reset;
    }
    state.activation_sum.setZero();
    state.activation_batches = 0;
    return n_reset;
}

double max_normalized_residual(const RbmModel& model,
                               const ConstraintSet* constraints) {
    if (!constraints) return 0.0;
    double worst = 0.0;
    for (const auto& c : constraints->linear) {
        const double qn = c.direction.norm();
        if (qn <= 0.0) continue;
        for (Index mu = 0; mu < model.n_hidden; ++mu) {
            if (!c.applies(mu)) continue;
            const double wn = model.weights.col(mu).norm();
            if (wn <= 0.0) continue;
            worst = std::max(
                worst, std::abs(c.direction.dot(model.weights.col(mu))) / (qn * wn));
        }
    }
    return worst;
}

}  // namespace

TrainResult train(RbmModel model, const MatrixXd& data,
                  const ConstraintSet* constraints, const TrainConfig& config,
                  const VectorXd& sample_weights) {
    config.validate();
    model.validate();
    if (data.rows() == 0) throw std::invalid_argument("train: empty data");
    if (data.cols() != model.n_visible)
        throw std::invalid_argument("train: data width != n_visible");
    if (constraints)
        for (const auto& c : constraints->linear)
            if (c.direction.size() != model.n_visible)
                throw std::invalid_argument("train: constraint dimension mismatch");

    Rng rng(config.seed);
    if (constraints) model.weights = project_weights(model.weights, *constraints);

    TrainerState state = TrainerState::init(model, data, config, rng);

    // minibatches with replacement; sample weights act as draw probabilities
    std::discrete_distribution<Index> weighted_pick;
    std::uniform_int_distribution<Index> uniform_pick(0, data.rows() - 1);
    const bool weighted = sample_weights.size() > 0;
    if (weighted) {
        if (sample_weights.size() != data.rows())
            throw std::invalid_argument("train: sample weight size mismatch");
        weighted_pick = std::discrete_distribution<Index>(
            sample_weights.data(), sample_weights.data() + sample_weights.size());
    }

    const Index updates_per_epoch =
        std::max<Index>(1, data.rows() / config.batch_size);

    TrainResult result;
    MatrixXd batch(config.batch_size, model.n_visible);
    int pending_resets = 0;

    // tail averaging damps the optimizer's stationary parameter noise
    const Index average_from =
        config.average_tail_fraction > 0.0
            ? config.n_updates -
                  Index(config.average_tail_fraction * double(config.n_updates))
            : config.n_updates + 1;
    MatrixXd weight_sum;
    VectorXd g_sum, theta_sum;
    Index averaged = 0;

    for (Index update = 1; update <= config.n_updates; ++update) {
        for (Index b = 0; b < config.batch_size; ++b)
            batch.row(b) =
                data.row(weighted ? weighted_pick(rng) : uniform_pick(rng));

        state.step += 1;
        const ParameterGradient grad =
            pcd_gradient(model, batch, state, config, constraints, rng);

        adam_update(model.weights, state.adam_m_w, state.adam_v_w, grad.weights,
                    config, state.step);
        if (!model.symmetric) {
            adam_update(model.visible_fields, state.adam_m_g, state.adam_v_g,
                        grad.visible_fields, config, state.step);
            adam_update(model.hidden_fields, state.adam_m_th, state.adam_v_th,
                        grad.hidden_fields, config, state.step);
        }
        if (constraints)
            model.weights = project_weights(model.weights, *constraints);

        if (!model.weights.allFinite() || !model.visible_fields.allFinite() ||
            !model.hidden_fields.allFinite())
            throw NumericalError("train: non-finite parameters at update " +
                                 std::to_string(update));

        if (config.enable_unit_reset && update % updates_per_epoch == 0) {
            const Index epoch = update / updates_per_epoch;
            if (epoch % config.reset_check_interval == 0) {
                pending_resets += reset_stuck_units(model, state, config, rng);
                if (constraints)
                    model.weights = project_weights(model.weights, *constraints);
            }
        }

        if (update > average_from) {
            if (averaged == 0) {
                weight_sum = MatrixXd::Zero(model.n_visible, model.n_hidden);
                g_sum = VectorXd::Zero(model.n_visible);
                theta_sum = VectorXd::Zero(model.n_hidden);
            }
            weight_sum += model.weights;
            g_sum += model.visible_fields;
            theta_sum += model.hidden_fields;
            ++averaged;
        }

        if (update % config.record_interval == 0 || update == config.n_updates) {
            HistoryRow row;
            row.update = update;
            row.pseudo_ll = free_energies(model, batch).mean() -
                            free_energies(model, state.chain_v).mean();
            row.grad_norm = grad.norm();
            row.max_linear_residual = max_normalized_residual(model, constraints);
            row.quadratic_penalty = grad.quadratic_penalty;
            row.n_reset_units = pending_resets;
            pending_resets = 0;
            result.history.push_back(row);
        }
    }

    if (averaged > 0) {
        model.weights = weight_sum / double(averaged);
        model.visible_fields = g_sum / double(averaged);
        model.hidden_fields = theta_sum / double(averaged);
        if (constraints)
            model.weights = project_weights(model.weights, *constraints);
    }
    result.model = std::move(model);
    return result;
}

TrainResult train_from_data(const MatrixXd& data, const ModelShape& shape,
                            const ConstraintSet* constraints,
                            const TrainConfig& config,
                            const VectorXd& sample_weights) {
    Rng rng(config.seed);
    RbmModel model = init_model(data, shape, config, rng, sample_weights);
    return train(std::move(model), data, constraints, config, sample_weights);
}

LikelihoodCosts likelihood_costs(double l_unconstrained, double l_constrained,
                                 double l_released, Index n_units) {
    if (n_units <= 0) throw std::invalid_argument("likelihood_costs: n_units <= 0");
    LikelihoodCosts costs;
    costs.partial_erasure = l_unconstrained - l_constrained;
    costs.disentanglement = l_unconstrained - l_released;
    costs.partial_erasure_per_unit = costs.partial_erasure / double(n_units);
    costs.disentanglement_per_unit = costs.disentanglement / double(n_units);
    return costs;
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open history file: " + path);
    out << "update,pseudo_ll,grad_norm,max_linear_residual,quadratic_penalty,"
           "n_reset_units\n";
    for (const auto& row : history)
        out << row.update << ',' << row.pseudo_ll << ',' << row.grad_norm << ','
            << row.max_linear_residual << ',' << row.quadratic_penalty << ','
            << row.n_reset_units << '\n';
}

}  // namespace disrbm
