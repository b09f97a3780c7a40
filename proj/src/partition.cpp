#include "disrbm/partition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "disrbm/parallel.hpp"

namespace disrbm {

AnnealSchedule AnnealSchedule::uniform(Index n_betas, Index n_walkers,
                                       int gibbs_steps_per_beta) {
    if (n_betas < 2)
        throw std::invalid_argument("AnnealSchedule: need at least two betas");
    AnnealSchedule s;
    s.betas = VectorXd::LinSpaced(n_betas, 0.0, 1.0);
    s.n_walkers = n_walkers;
    s.gibbs_steps_per_beta = gibbs_steps_per_beta;
    s.validate();
    return s;
}

void AnnealSchedule::validate() const {
    if (betas.size() < 2)
        throw std::invalid_argument("AnnealSchedule: need at least two betas");
    if (betas[0] != 0.0 || betas[betas.size() - 1] != 1.0)
        throw std::invalid_argument("AnnealSchedule: betas must run from 0 to 1");
    for (Index k = 1; k < betas.size(); ++k)
        if (betas[k] <= betas[k - 1])
            throw std::invalid_argument("AnnealSchedule: betas must increase");
    if (n_walkers < 1)
        throw std::invalid_argument("AnnealSchedule: need at least one walker");
    if (gibbs_steps_per_beta < 1)
        throw std::invalid_argument("AnnealSchedule: gibbs steps must be >= 1");
}

RbmModel base_model(const RbmModel& model) {
    RbmModel base = model;
    base.weights.setZero();
    return base;
}

namespace {

// log Z of the independent visible layer with fields g.
double visible_fields_log_z(const RbmModel& model) {
    if (model.visible_kind == UnitKind::OneHot) {
        double z = 0.0;
        const int q = model.visible_states;
        for (Index s = 0; s < model.n_sites(); ++s) {
            const auto block = model.visible_fields.segment(s * q, q);
            const double mx = block.maxCoeff();
            double total = 0.0;
            for (int a = 0; a < q; ++a) total += std::exp(block[a] - mx);
            z += mx + std::log(total);
        }
        return z;
    }
    double z = 0.0;
    for (Index i = 0; i < model.n_visible; ++i)
        z += model.visible_kind == UnitKind::Spin
                 ? log2cosh(model.visible_fields[i])
                 : softplus(model.visible_fields[i]);
    return z;
}

// the visible fields of the interpolated model at inverse strength beta
struct AnnealPath {
    const RbmModel* model;
    bool base_rate = false;
    VectorXd base_fields;

    explicit AnnealPath(const RbmModel& m, const AnnealSchedule& schedule)
        : model(&m) {
        if (schedule.base_visible_fields.size() > 0) {
            if (schedule.base_visible_fields.size() != m.n_visible)
                throw std::invalid_argument(
                    "AnnealSchedule: base field size mismatch");
            base_rate = true;
            base_fields = schedule.base_visible_fields;
        }
    }
    VectorXd visible_fields(double beta) const {
        if (!base_rate) return model->visible_fields;
        return (1.0 - beta) * base_fields + beta * model->visible_fields;
    }
    double start_log_z() const {
        RbmModel base = *model;
        base.weights.setZero();
        if (base_rate) base.visible_fields = base_fields;
        // hidden logits are scaled to zero at beta = 0
        const double hidden_at_zero = model->hidden_kind == UnitKind::Spin
                                          ? log2cosh(0.0)
                                          : softplus(0.0);
        base.hidden_fields.setZero();
        return base_log_partition(base) +
               double(model->n_hidden) * hidden_at_zero;
    }
};

struct WalkerBlock {
    MatrixXd v;       // block_walkers x n_visible
    MatrixXd inputs;  // v * W

    void refresh(const RbmModel& model) { inputs = v * model.weights; }
};

// annealed free energy rows: g_beta.v + sum_mu sp(beta (theta_mu + I_mu))
VectorXd annealed_free_energy(const RbmModel& model, const AnnealPath& path,
                              const WalkerBlock& blk, double beta) {
    const MatrixXd logits =
        beta * (blk.inputs.rowwise() + model.hidden_fields.transpose());
    return blk.v * path.visible_fields(beta) +
           log_kernel_rowsums(model.hidden_kind, 1, logits);
}

void annealed_gibbs_round(const RbmModel& model, const AnnealPath& path,
                          WalkerBlock& blk, double beta, Rng& rng) {
    const MatrixXd h_logits =
        beta * (blk.inputs.rowwise() + model.hidden_fields.transpose());
    const MatrixXd h = sample_units_from_logits(model.hidden_kind, 1, h_logits, rng);
    const MatrixXd v_logits =
        (beta * (h * model.weights.transpose())).rowwise() +
        path.visible_fields(beta).transpose();
    blk.v = sample_units_from_logits(model.visible_kind, model.visible_states,
                                     v_logits, rng);
    blk.refresh(model);
}

MatrixXd sample_start(const RbmModel& model, const AnnealPath& path, Index n,
                      Rng& rng) {
    const MatrixXd logits = MatrixXd::Zero(n, model.n_visible).rowwise() +
                            path.visible_fields(0.0).transpose();
    return sample_units_from_logits(model.visible_kind, model.visible_states,
                                    logits, rng);
}

LogZEstimate finalize(VectorXd values, BiasDirection direction) {
    LogZEstimate est;
    est.direction = direction;
    std::vector<double> good;
    good.reserve(values.size());
    for (Index j = 0; j < values.size(); ++j)
        if (std::isfinite(values[j])) good.push_back(values[j]);
    est.n_failed = int(values.size() - Index(good.size()));
    if (good.empty())
        throw NumericalError("annealing: all walkers produced non-finite weights");
    est.per_walker = Eigen::Map<const VectorXd>(good.data(), good.size());
    est.log_z = logmeanexp(est.per_walker);
    const double mean = est.per_walker.mean();
    est.spread = good.size() > 1
                     ? std::sqrt((est.per_walker.array() - mean).square().sum() /
                                 double(good.size() - 1))
                     : 0.0;
    return est;
}

// fixed block count keeps results independent of the thread count
constexpr Index kWalkerBlocks = 8;

}  // namespace

VectorXd base_rate_fields(const MatrixXd& data, UnitKind kind, int n_states,
                          double clip) {
    const VectorXd means = data.colwise().mean().transpose();
    VectorXd fields(means.size());
    switch (kind) {
        case UnitKind::Binary:
            for (Index i = 0; i < means.size(); ++i) {
                const double p = std::clamp(means[i], 0.0, 1.0);
                fields[i] = std::clamp(std::log(p) - std::log1p(-p), -clip, clip);
            }
            return fields;
        case UnitKind::Spin:
            for (Index i = 0; i < means.size(); ++i)
                fields[i] = std::clamp(
                    std::atanh(std::clamp(means[i], -1.0, 1.0)), -clip, clip);
            return fields;
        case UnitKind::OneHot:
            for (Index i = 0; i < means.size(); ++i)
                fields[i] =
                    std::clamp(std::log(std::max(means[i], 1e-12)), -clip, clip);
            (void)n_states;
            return fields;
    }
    throw std::invalid_argument("base_rate_fields: bad kind");
}

double base_log_partition(const RbmModel& model) {
    if (model.weights.cwiseAbs().maxCoeff() != 0.0)
        throw std::invalid_argument(
            "base_log_partition: model must have zero weights");
    double z = visible_fields_log_z(model);
    for (Index mu = 0; mu < model.n_hidden; ++mu)
        z += model.hidden_kind == UnitKind::Spin
                 ? log2cosh(model.hidden_fields[mu])
                 : softplus(model.hidden_fields[mu]);
    return z;
}

LogZEstimate ais(const RbmModel& model, const AnnealSchedule& schedule,
                 Rng& rng) {
    schedule.validate();
    model.validate();
    const AnnealPath path(model, schedule);
    const double log_z0 = path.start_log_z();
    const std::uint64_t master = rng();

    const Index n_blocks = std::min<Index>(kWalkerBlocks, schedule.n_walkers);
    std::vector<Index> block_size(n_blocks, schedule.n_walkers / n_blocks);
    for (Index b = 0; b < schedule.n_walkers % n_blocks; ++b) block_size[b] += 1;

    VectorXd values(schedule.n_walkers);
    std::vector<Index> offsets(n_blocks, 0);
    for (Index b = 1; b < n_blocks; ++b)
        offsets[b] = offsets[b - 1] + block_size[b - 1];

    parallel_for(n_blocks, [&](long b) {
        Rng block_rng = make_stream(master, std::uint64_t(b));
        WalkerBlock blk;
        blk.v = sample_start(model, path, block_size[b], block_rng);
        blk.refresh(model);

        VectorXd logw = VectorXd::Zero(block_size[b]);
        VectorXd f_prev =
            annealed_free_energy(model, path, blk, schedule.betas[0]);
        for (Index k = 1; k < schedule.betas.size(); ++k) {
            const double beta = schedule.betas[k];
            logw += annealed_free_energy(model, path, blk, beta) - f_prev;
            for (int s = 0; s < schedule.gibbs_steps_per_beta; ++s)
                annealed_gibbs_round(model, path, blk, beta, block_rng);
            f_prev = annealed_free_energy(model, path, blk, beta);
        }
        values.segment(offsets[b], block_size[b]) = logw.array() + log_z0;
    });
    return finalize(std::move(values), BiasDirection::LowerBiased);
}

LogZEstimate raise_estimate(const RbmModel& model,
                            const AnnealSchedule& schedule,
                            const MatrixXd& seeds, Rng& rng,
                            int equilibration_steps) {
    schedule.validate();
    model.validate();
    if (seeds.rows() == 0 || seeds.cols() != model.n_visible)
        throw std::invalid_argument("raise_estimate: bad seed configurations");
    const AnnealPath path(model, schedule);
    const double log_z0 = path.start_log_z();
    const std::uint64_t master = rng();

    const Index n_blocks = std::min<Index>(kWalkerBlocks, schedule.n_walkers);
    std::vector<Index> block_size(n_blocks, schedule.n_walkers / n_blocks);
    for (Index b = 0; b < schedule.n_walkers % n_blocks; ++b) block_size[b] += 1;
    std::vector<Index> offsets(n_blocks, 0);
    for (Index b = 1; b < n_blocks; ++b)
        offsets[b] = offsets[b - 1] + block_size[b - 1];

    VectorXd values(schedule.n_walkers);
    parallel_for(n_blocks, [&](long b) {
        Rng block_rng = make_stream(master, 0x52415345ULL + std::uint64_t(b));
        std::uniform_int_distribution<Index> pick(0, seeds.rows() - 1);
        WalkerBlock blk;
        blk.v.resize(block_size[b], model.n_visible);
        for (Index j = 0; j < block_size[b]; ++j)
            blk.v.row(j) = seeds.row(pick(block_rng));
        blk.refresh(model);
        for (int s = 0; s < equilibration_steps; ++s)
            annealed_gibbs_round(model, path, blk, 1.0, block_rng);

        VectorXd logw = VectorXd::Zero(block_size[b]);
        for (Index k = schedule.betas.size() - 1; k >= 1; --k) {
            const double beta = schedule.betas[k];
            for (int s = 0; s < schedule.gibbs_steps_per_beta; ++s)
                annealed_gibbs_round(model, path, blk, beta, block_rng);
            logw += annealed_free_energy(model, path, blk, schedule.betas[k - 1]) -
                    annealed_free_energy(model, path, blk, beta);
        }
        // reverse weights estimate Z0/Z, so the per-walker log Z is log_z0 - w
        values.segment(offsets[b], block_size[b]) = log_z0 - logw.array();
    });
    return finalize(std::move(values), BiasDirection::UpperBiased);
}

SandwichReport sandwich_report(const RbmModel& model,
                               const AnnealSchedule& schedule, Rng& rng,
                               double gap_tolerance, Index seed_burn_in) {
    SandwichReport report;
    report.tolerance = gap_tolerance;
    report.lower = ais(model, schedule, rng);

    // seeds from long Gibbs chains started at base samples
    const AnnealPath path(model, schedule);
    WalkerBlock blk;
    blk.v = sample_start(model, path, schedule.n_walkers, rng);
    blk.refresh(model);
    for (Index t = 0; t < seed_burn_in; ++t)
        annealed_gibbs_round(model, path, blk, 1.0, rng);

    report.upper = raise_estimate(model, schedule, blk.v, rng);
    report.gap = report.upper.log_z - report.lower.log_z;
    report.converged = std::abs(report.gap) < gap_tolerance;
    return report;
}

}  // namespace disrbm
