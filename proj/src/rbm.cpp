#include "disrbm/rbm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace disrbm {

namespace {

void check_dims(const RbmModel& m, const VectorXd& v, const char* what) {
    if (v.size() != m.n_visible)
        throw std::invalid_argument(std::string(what) +
                                    ": visible size mismatch");
}

void check_hidden_dims(const RbmModel& m, const VectorXd& h, const char* what) {
    if (h.size() != m.n_hidden)
        throw std::invalid_argument(std::string(what) +
                                    ": hidden size mismatch");
}

double unit_value_from_bit(UnitKind kind, bool bit) {
    if (kind == UnitKind::Spin) return bit ? 1.0 : -1.0;
    return bit ? 1.0 : 0.0;
}

// log sum over a single unit's states of e^{x * state}; the per-unit factor
// of the factorized partition function.
double unit_log_kernel(UnitKind kind, double x) {
    return kind == UnitKind::Spin ? log2cosh(x) : softplus(x);
}

}  // namespace

void RbmModel::validate() const {
    if (n_visible <= 0 || n_hidden <= 0)
        throw std::invalid_argument("RbmModel: layer sizes must be positive");
    if (weights.rows() != n_visible || weights.cols() != n_hidden)
        throw std::invalid_argument("RbmModel: weight shape mismatch");
    if (visible_fields.size() != n_visible || hidden_fields.size() != n_hidden)
        throw std::invalid_argument("RbmModel: field size mismatch");
    if (visible_kind == UnitKind::OneHot) {
        if (visible_states < 2)
            throw std::invalid_argument("RbmModel: one-hot needs q >= 2");
        if (n_visible % visible_states != 0)
            throw std::invalid_argument(
                "RbmModel: n_visible not a multiple of visible_states");
    }
    if (hidden_kind == UnitKind::OneHot)
        throw std::invalid_argument("RbmModel: one-hot hidden not supported");
    if (!weights.allFinite() || !visible_fields.allFinite() ||
        !hidden_fields.allFinite())
        throw NumericalError("RbmModel: non-finite parameters");
    if (symmetric) {
        if (visible_kind != UnitKind::Spin || hidden_kind != UnitKind::Spin)
            throw std::invalid_argument(
                "RbmModel: symmetric flag requires spin/spin layers");
        if (visible_fields.cwiseAbs().maxCoeff() != 0.0 ||
            hidden_fields.cwiseAbs().maxCoeff() != 0.0)
            throw std::invalid_argument(
                "RbmModel: symmetric model must have zero fields");
    }
}

RbmModel make_rbm(Index n_visible, Index n_hidden, UnitKind visible_kind,
                  UnitKind hidden_kind, int visible_states, bool symmetric) {
    RbmModel m;
    m.n_visible = n_visible;
    m.n_hidden = n_hidden;
    m.visible_kind = visible_kind;
    m.hidden_kind = hidden_kind;
    m.visible_states = visible_kind == UnitKind::OneHot ? visible_states : 1;
    m.symmetric = symmetric;
    m.weights = MatrixXd::Zero(n_visible, n_hidden);
    m.visible_fields = VectorXd::Zero(n_visible);
    m.hidden_fields = VectorXd::Zero(n_hidden);
    m.validate();
    return m;
}

VectorXd onehot_embed(const VectorXi& state_indices, int q) {
    VectorXd v = VectorXd::Zero(state_indices.size() * q);
    for (Index s = 0; s < state_indices.size(); ++s) {
        const int a = state_indices[s];
        if (a < 0 || a >= q)
            throw std::invalid_argument("onehot_embed: state index out of range");
        v[s * q + a] = 1.0;
    }
    return v;
}

VectorXi onehot_indices(const VectorXd& v, int q) {
    if (v.size() % q != 0)
        throw std::invalid_argument("onehot_indices: length not multiple of q");
    const Index sites = v.size() / q;
    VectorXi idx(sites);
    for (Index s = 0; s < sites; ++s) {
        int active = -1;
        for (int a = 0; a < q; ++a) {
            if (v[s * q + a] != 0.0) {
                if (active >= 0)
                    throw std::invalid_argument(
                        "onehot_indices: more than one active state per site");
                active = a;
            }
        }
        if (active < 0)
            throw std::invalid_argument("onehot_indices: empty site");
        idx[s] = active;
    }
    return idx;
}

double energy(const RbmModel& model, const VectorXd& v, const VectorXd& h) {
    check_dims(model, v, "energy");
    check_hidden_dims(model, h, "energy");
    const VectorXd input = model.weights.transpose() * v;
    return -model.visible_fields.dot(v) - model.hidden_fields.dot(h) -
           input.dot(h);
}

VectorXd hidden_input(const RbmModel& model, const VectorXd& v) {
    check_dims(model, v, "hidden_input");
    return model.weights.transpose() * v;
}

MatrixXd hidden_inputs(const RbmModel& model, const MatrixXd& data) {
    if (data.cols() != model.n_visible)
        throw std::invalid_argument("hidden_inputs: column count mismatch");
    return data * model.weights;
}

VectorXd hidden_conditional_mean(const RbmModel& model, const VectorXd& input) {
    check_hidden_dims(model, input, "hidden_conditional_mean");
    VectorXd mean(model.n_hidden);
    for (Index mu = 0; mu < model.n_hidden; ++mu) {
        const double t = model.hidden_fields[mu] + input[mu];
        mean[mu] = model.hidden_kind == UnitKind::Spin ? std::tanh(t)
                                                       : sigmoid(t);
    }
    return mean;
}

MatrixXd hidden_conditional_means(const RbmModel& model,
                                  const MatrixXd& inputs) {
    MatrixXd mean(inputs.rows(), inputs.cols());
    for (Index r = 0; r < inputs.rows(); ++r)
        for (Index mu = 0; mu < inputs.cols(); ++mu) {
            const double t = model.hidden_fields[mu] + inputs(r, mu);
            mean(r, mu) = model.hidden_kind == UnitKind::Spin ? std::tanh(t)
                                                              : sigmoid(t);
        }
    return mean;
}

namespace {

double sample_hidden_unit(UnitKind kind, double logit, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (kind == UnitKind::Spin) {
        // P(h=+1) = e^t / (e^t + e^-t) = sigmoid(2t)
        return unif(rng) < sigmoid(2.0 * logit) ? 1.0 : -1.0;
    }
    return unif(rng) < sigmoid(logit) ? 1.0 : 0.0;
}

VectorXd sample_visible_from_logits(const RbmModel& model,
                                    const VectorXd& logits, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    VectorXd out(logits.size());
    switch (model.visible_kind) {
        case UnitKind::Binary:
            for (Index i = 0; i < logits.size(); ++i)
                out[i] = unif(rng) < sigmoid(logits[i]) ? 1.0 : 0.0;
            return out;
        case UnitKind::Spin:
            for (Index i = 0; i < logits.size(); ++i)
                out[i] = unif(rng) < sigmoid(2.0 * logits[i]) ? 1.0 : -1.0;
            return out;
        case UnitKind::OneHot: {
            const int q = model.visible_states;
            out.setZero();
            for (Index s = 0; s < model.n_sites(); ++s) {
                const auto block = logits.segment(s * q, q);
                const double mx = block.maxCoeff();
                double total = 0.0;
                for (int a = 0; a < q; ++a) total += std::exp(block[a] - mx);
                double r = unif(rng) * total;
                int pick = q - 1;
                for (int a = 0; a < q; ++a) {
                    r -= std::exp(block[a] - mx);
                    if (r <= 0.0) {
                        pick = a;
                        break;
                    }
                }
                out[s * q + pick] = 1.0;
            }
            return out;
        }
    }
    throw std::invalid_argument("sample_visible_from_logits: bad kind");
}

}  // namespace

VectorXd sample_hidden_given_visible(const RbmModel& model, const VectorXd& v,
                                     Rng& rng) {
    const VectorXd input = hidden_input(model, v);
    VectorXd h(model.n_hidden);
    for (Index mu = 0; mu < model.n_hidden; ++mu)
        h[mu] = sample_hidden_unit(model.hidden_kind,
                                   model.hidden_fields[mu] + input[mu], rng);
    return h;
}

VectorXd sample_visible_given_hidden(const RbmModel& model, const VectorXd& h,
                                     Rng& rng) {
    check_hidden_dims(model, h, "sample_visible_given_hidden");
    const VectorXd logits = model.visible_fields + model.weights * h;
    return sample_visible_from_logits(model, logits, rng);
}

MatrixXd sample_hidden_batch(const RbmModel& model, const MatrixXd& inputs,
                             Rng& rng) {
    MatrixXd h(inputs.rows(), inputs.cols());
    for (Index r = 0; r < inputs.rows(); ++r)
        for (Index mu = 0; mu < inputs.cols(); ++mu)
            h(r, mu) = sample_hidden_unit(
                model.hidden_kind, model.hidden_fields[mu] + inputs(r, mu), rng);
    return h;
}

MatrixXd sample_visible_batch(const RbmModel& model, const MatrixXd& hidden,
                              Rng& rng) {
    MatrixXd v(hidden.rows(), model.n_visible);
    const MatrixXd logits =
        (hidden * model.weights.transpose()).rowwise() +
        model.visible_fields.transpose();
    for (Index r = 0; r < hidden.rows(); ++r) {
        const VectorXd lrow = logits.row(r).transpose();
        v.row(r) = sample_visible_from_logits(model, lrow, rng).transpose();
    }
    return v;
}

MatrixXd sample_units_from_logits(UnitKind kind, int q, const MatrixXd& logits,
                                  Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    MatrixXd out(logits.rows(), logits.cols());
    switch (kind) {
        case UnitKind::Binary:
            for (Index r = 0; r < logits.rows(); ++r)
                for (Index i = 0; i < logits.cols(); ++i)
                    out(r, i) = unif(rng) < sigmoid(logits(r, i)) ? 1.0 : 0.0;
            return out;
        case UnitKind::Spin:
            for (Index r = 0; r < logits.rows(); ++r)
                for (Index i = 0; i < logits.cols(); ++i)
                    out(r, i) = unif(rng) < sigmoid(2.0 * logits(r, i)) ? 1.0 : -1.0;
            return out;
        case UnitKind::OneHot: {
            if (logits.cols() % q != 0)
                throw std::invalid_argument(
                    "sample_units_from_logits: width not a multiple of q");
            out.setZero();
            const Index sites = logits.cols() / q;
            for (Index r = 0; r < logits.rows(); ++r)
                for (Index s = 0; s < sites; ++s) {
                    const auto block = logits.row(r).segment(s * q, q);
                    const double mx = block.maxCoeff();
                    double total = 0.0;
                    for (int a = 0; a < q; ++a) total += std::exp(block[a] - mx);
                    double u = unif(rng) * total;
                    int pick = q - 1;
                    for (int a = 0; a < q; ++a) {
                        u -= std::exp(block[a] - mx);
                        if (u <= 0.0) {
                            pick = a;
                            break;
                        }
                    }
                    out(r, s * q + pick) = 1.0;
                }
            return out;
        }
    }
    throw std::invalid_argument("sample_units_from_logits: bad kind");
}

VectorXd log_kernel_rowsums(UnitKind kind, int q, const MatrixXd& logits) {
    VectorXd sums = VectorXd::Zero(logits.rows());
    if (kind == UnitKind::OneHot) {
        if (logits.cols() % q != 0)
            throw std::invalid_argument(
                "log_kernel_rowsums: width not a multiple of q");
        const Index sites = logits.cols() / q;
        for (Index r = 0; r < logits.rows(); ++r)
            for (Index s = 0; s < sites; ++s) {
                const auto block = logits.row(r).segment(s * q, q);
                const double mx = block.maxCoeff();
                double total = 0.0;
                for (int a = 0; a < q; ++a) total += std::exp(block[a] - mx);
                sums[r] += mx + std::log(total);
            }
        return sums;
    }
    for (Index r = 0; r < logits.rows(); ++r)
        for (Index i = 0; i < logits.cols(); ++i)
            sums[r] += unit_log_kernel(kind, logits(r, i));
    return sums;
}

std::pair<VectorXd, VectorXd> gibbs_chain(const RbmModel& model,
                                          const VectorXd& v0, int steps,
                                          const ClampMap& clamp, Rng& rng) {
    check_dims(model, v0, "gibbs_chain");
    if (steps < 1) throw std::invalid_argument("gibbs_chain: steps must be >= 1");
    for (const auto& [idx, val] : clamp)
        if (idx < 0 || idx >= model.n_hidden)
            throw std::invalid_argument("gibbs_chain: clamp index out of range");

    VectorXd v = v0;
    VectorXd h(model.n_hidden);
    for (int t = 0; t < steps; ++t) {
        h = sample_hidden_given_visible(model, v, rng);
        for (const auto& [idx, val] : clamp) h[idx] = val;
        v = sample_visible_given_hidden(model, h, rng);
    }
    return {v, h};
}

double free_energy(const RbmModel& model, const VectorXd& v) {
    check_dims(model, v, "free_energy");
    const VectorXd input = model.weights.transpose() * v;
    double f = model.visible_fields.dot(v);
    for (Index mu = 0; mu < model.n_hidden; ++mu)
        f += unit_log_kernel(model.hidden_kind,
                             model.hidden_fields[mu] + input[mu]);
    return f;
}

VectorXd free_energies(const RbmModel& model, const MatrixXd& data) {
    const MatrixXd inputs = hidden_inputs(model, data);
    VectorXd f = data * model.visible_fields;
    for (Index r = 0; r < data.rows(); ++r)
        for (Index mu = 0; mu < model.n_hidden; ++mu)
            f[r] += unit_log_kernel(model.hidden_kind,
                                    model.hidden_fields[mu] + inputs(r, mu));
    return f;
}

namespace {

// log sum over all states of a visible configuration given the hidden one:
// the "hidden-side free energy" used when the hidden layer is enumerated.
double hidden_side_free_energy(const RbmModel& model, const VectorXd& h) {
    const VectorXd logits = model.visible_fields + model.weights * h;
    double f = model.hidden_fields.dot(h);
    if (model.visible_kind == UnitKind::OneHot) {
        const int q = model.visible_states;
        for (Index s = 0; s < model.n_sites(); ++s) {
            const auto block = logits.segment(s * q, q);
            const double mx = block.maxCoeff();
            double total = 0.0;
            for (int a = 0; a < q; ++a) total += std::exp(block[a] - mx);
            f += mx + std::log(total);
        }
        return f;
    }
    for (Index i = 0; i < model.n_visible; ++i)
        f += unit_log_kernel(model.visible_kind, logits[i]);
    return f;
}

long double visible_state_count(const RbmModel& model) {
    if (model.visible_kind == UnitKind::OneHot) {
        long double c = 1.0L;
        for (Index s = 0; s < model.n_sites(); ++s)
            c *= model.visible_states;
        return c;
    }
    return std::pow(2.0L, static_cast<long double>(model.n_visible));
}

// Visit every configuration of the visible layer.
template <typename F>
void for_each_visible(const RbmModel& model, F&& fn) {
    if (model.visible_kind == UnitKind::OneHot) {
        const int q = model.visible_states;
        const Index sites = model.n_sites();
        VectorXi idx = VectorXi::Zero(sites);
        while (true) {
            fn(onehot_embed(idx, q));
            Index s = 0;
            while (s < sites) {
                if (++idx[s] < q) break;
                idx[s] = 0;
                ++s;
            }
            if (s == sites) break;
        }
        return;
    }
    const Index n = model.n_visible;
    VectorXd v(n);
    for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
        for (Index i = 0; i < n; ++i)
            v[i] = unit_value_from_bit(model.visible_kind, (mask >> i) & 1ULL);
        fn(v);
    }
}

template <typename F>
void for_each_hidden(const RbmModel& model, F&& fn) {
    const Index m = model.n_hidden;
    VectorXd h(m);
    for (std::uint64_t mask = 0; mask < (1ULL << m); ++mask) {
        for (Index mu = 0; mu < m; ++mu)
            h[mu] = unit_value_from_bit(model.hidden_kind, (mask >> mu) & 1ULL);
        fn(h);
    }
}

}  // namespace

double exact_log_partition(const RbmModel& model) {
    if (model.n_visible + model.n_hidden > 26)
        throw std::invalid_argument(
            "exact_log_partition: n_visible + n_hidden must be <= 26");
    const long double n_vis_states = visible_state_count(model);
    const long double n_hid_states =
        std::pow(2.0L, static_cast<long double>(model.n_hidden));

    std::vector<double> terms;
    if (n_vis_states <= n_hid_states) {
        terms.reserve(static_cast<std::size_t>(n_vis_states));
        for_each_visible(model, [&](const VectorXd& v) {
            terms.push_back(free_energy(model, v));
        });
    } else {
        terms.reserve(static_cast<std::size_t>(n_hid_states));
        for_each_hidden(model, [&](const VectorXd& h) {
            terms.push_back(hidden_side_free_energy(model, h));
        });
    }
    return logsumexp(Eigen::Map<const VectorXd>(terms.data(), terms.size()));
}

double mean_log_likelihood(const RbmModel& model, const MatrixXd& data,
                           double log_z, const VectorXd& weights) {
    if (data.rows() == 0)
        throw std::invalid_argument("mean_log_likelihood: empty dataset");
    const VectorXd f = free_energies(model, data);
    if (weights.size() == 0) return f.mean() - log_z;
    if (weights.size() != data.rows())
        throw std::invalid_argument("mean_log_likelihood: weight size mismatch");
    return f.dot(weights) / weights.sum() - log_z;
}

std::pair<MatrixXd, VectorXd> exact_visible_distribution(const RbmModel& model) {
    const double log_z = exact_log_partition(model);
    const long double count = visible_state_count(model);
    MatrixXd states(static_cast<Index>(count), model.n_visible);
    VectorXd probs(static_cast<Index>(count));
    Index row = 0;
    for_each_visible(model, [&](const VectorXd& v) {
        states.row(row) = v.transpose();
        probs[row] = std::exp(free_energy(model, v) - log_z);
        ++row;
    });
    return {states, probs};
}

double logsumexp(const VectorXd& values) {
    if (values.size() == 0)
        throw std::invalid_argument("logsumexp: empty input");
    const double mx = values.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    double total = 0.0;
    for (Index i = 0; i < values.size(); ++i) total += std::exp(values[i] - mx);
    return mx + std::log(total);
}

double logmeanexp(const VectorXd& values) {
    return logsumexp(values) - std::log(static_cast<double>(values.size()));
}

}  // namespace disrbm
