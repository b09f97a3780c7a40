#include "disrbm/ising.hpp"

#include <cmath>
#include <stdexcept>

namespace disrbm {

namespace {

inline int wrap(int x, int L) { return x < 0 ? x + L : (x >= L ? x - L : x); }

inline int neighbor_sum(const IsingLattice& lat, int r, int c) {
    const int L = lat.L;
    return lat.spin(wrap(r - 1, L), c) + lat.spin(wrap(r + 1, L), c) +
           lat.spin(r, wrap(c - 1, L)) + lat.spin(r, wrap(c + 1, L));
}

}  // namespace

IsingLattice make_lattice(int L, double beta) {
    if (L < 2) throw std::invalid_argument("make_lattice: L must be >= 2");
    if (beta < 0.0) throw std::invalid_argument("make_lattice: beta must be >= 0");
    IsingLattice lat;
    lat.L = L;
    lat.beta = beta;
    lat.spins.assign(std::size_t(L) * L, 1);
    return lat;
}

IsingLattice make_random_lattice(int L, double beta, Rng& rng) {
    IsingLattice lat = make_lattice(L, beta);
    std::uniform_int_distribution<int> coin(0, 1);
    for (auto& s : lat.spins) s = coin(rng) ? 1 : -1;
    return lat;
}

double ising_energy(const IsingLattice& lat) {
    const int L = lat.L;
    double e = 0.0;
    for (int r = 0; r < L; ++r)
        for (int c = 0; c < L; ++c) {
            const int s = lat.spin(r, c);
            e -= s * lat.spin(r, wrap(c + 1, L));  // right bond
            e -= s * lat.spin(wrap(r + 1, L), c);  // down bond
        }
    return e;
}

int metropolis_sweep(IsingLattice& lat, Rng& rng) {
    const int L = lat.L;
    std::uniform_int_distribution<int> site(0, L - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int accepted = 0;
    for (Index k = 0; k < lat.n_sites(); ++k) {
        const int r = site(rng), c = site(rng);
        const int s = lat.spin(r, c);
        const double delta_e = 2.0 * s * neighbor_sum(lat, r, c);
        if (delta_e <= 0.0 || unif(rng) < std::exp(-lat.beta * delta_e)) {
            lat.spins[std::size_t(r) * L + c] = -s;
            ++accepted;
        }
    }
    return accepted;
}

int wolff_step(IsingLattice& lat, Rng& rng) {
    const int L = lat.L;
    const double p_add = 1.0 - std::exp(-2.0 * lat.beta);
    std::uniform_int_distribution<int> site(0, L - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const int r0 = site(rng), c0 = site(rng);
    const std::int8_t cluster_spin = lat.spins[std::size_t(r0) * L + c0];

    std::vector<std::pair<int, int>> stack{{r0, c0}};
    lat.spins[std::size_t(r0) * L + c0] = -cluster_spin;  // flip marks membership
    int size = 1;
    while (!stack.empty()) {
        const auto [r, c] = stack.back();
        stack.pop_back();
        const int nr[4] = {wrap(r - 1, L), wrap(r + 1, L), r, r};
        const int nc[4] = {c, c, wrap(c - 1, L), wrap(c + 1, L)};
        for (int k = 0; k < 4; ++k) {
            std::int8_t& s = lat.spins[std::size_t(nr[k]) * L + nc[k]];
            if (s == cluster_spin && unif(rng) < p_add) {
                s = -cluster_spin;
                stack.emplace_back(nr[k], nc[k]);
                ++size;
            }
        }
    }
    return size;
}

MatrixXd hybrid_sampler(IsingLattice& lat, Index n_samples,
                        const HybridOptions& options, Rng& rng,
                        HybridStats* stats) {
    if (options.thinning < 1)
        throw std::invalid_argument("hybrid_sampler: thinning must be >= 1");
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // running averages of spins moved per call, one per move kind
    double avg_metropolis = -1.0, avg_wolff = -1.0;
    long n_metropolis = 0, n_wolff = 0;
    constexpr double kDecay = 0.9;
    constexpr double kExplore = 0.1;

    auto one_iteration = [&] {
        bool use_wolff;
        if (avg_metropolis < 0.0) use_wolff = false;
        else if (avg_wolff < 0.0) use_wolff = true;
        else if (unif(rng) < kExplore) use_wolff = unif(rng) < 0.5;
        else use_wolff = avg_wolff > avg_metropolis;

        if (use_wolff) {
            const double moved = wolff_step(lat, rng);
            avg_wolff = avg_wolff < 0.0 ? moved
                                        : kDecay * avg_wolff + (1.0 - kDecay) * moved;
            ++n_wolff;
        } else {
            const double moved = metropolis_sweep(lat, rng);
            avg_metropolis =
                avg_metropolis < 0.0
                    ? moved
                    : kDecay * avg_metropolis + (1.0 - kDecay) * moved;
            ++n_metropolis;
        }
    };

    for (Index t = 0; t < options.burn_in; ++t) one_iteration();

    MatrixXd samples(n_samples, lat.n_sites());
    for (Index s = 0; s < n_samples; ++s) {
        for (int t = 0; t < options.thinning; ++t) one_iteration();
        for (Index i = 0; i < lat.n_sites(); ++i)
            samples(s, i) = double(lat.spins[std::size_t(i)]);
    }
    if (stats) {
        stats->n_metropolis = n_metropolis;
        stats->n_wolff = n_wolff;
        stats->avg_moved_metropolis = std::max(avg_metropolis, 0.0);
        stats->avg_moved_wolff = std::max(avg_wolff, 0.0);
    }
    return samples;
}

IsingObservables observables(const MatrixXd& samples, double beta) {
    if (samples.rows() == 0)
        throw std::invalid_argument("observables: empty sample set");
    const Index n_sites = samples.cols();
    const int L = int(std::lround(std::sqrt(double(n_sites))));
    if (Index(L) * L != n_sites)
        throw std::invalid_argument("observables: samples are not square grids");

    IsingLattice lat = make_lattice(L, beta);
    double abs_m = 0.0, sum_e = 0.0, sum_e2 = 0.0, sum_s2 = 0.0;
    for (Index b = 0; b < samples.rows(); ++b) {
        for (Index i = 0; i < n_sites; ++i)
            lat.spins[std::size_t(i)] = samples(b, i) > 0.0 ? 1 : -1;
        const double e = ising_energy(lat);
        const double s = samples.row(b).sum();
        abs_m += std::abs(s);
        sum_e += e;
        sum_e2 += e * e;
        sum_s2 += s * s;
    }
    const double inv_b = 1.0 / double(samples.rows());
    const double n = double(n_sites);
    IsingObservables obs;
    obs.magnetization = abs_m * inv_b / n;
    const double e_mean = sum_e * inv_b;
    obs.heat_capacity = beta * beta / n * (sum_e2 * inv_b - e_mean * e_mean);
    const double abs_s_mean = abs_m * inv_b;
    obs.susceptibility = beta / n * (sum_s2 * inv_b - abs_s_mean * abs_s_mean);
    return obs;
}

int magnetization_label(const VectorXd& v) { return v.sum() > 0.0 ? 1 : -1; }

double effective_energy(const EffectiveIsingModel& model,
                        const IsingLattice& lat) {
    if (model.beta <= 0.0)
        throw std::invalid_argument("effective_energy: beta must be positive");
    double total = 0.0;
    for (const auto s : lat.spins) total += s;
    return ising_energy(lat) + model.w_star / model.beta * std::abs(total);
}

MatrixXd effective_sampler(const EffectiveIsingModel& model, int L,
                           Index n_samples, const HybridOptions& options,
                           Rng& rng) {
    if (model.beta <= 0.0)
        throw std::invalid_argument("effective_sampler: beta must be positive");
    IsingLattice lat = make_random_lattice(L, model.beta, rng);
    std::uniform_int_distribution<int> site(0, L - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    double total = 0.0;
    for (const auto s : lat.spins) total += s;

    // acceptance for P ~ e^{-beta E_ising - w* |sum v|}
    auto sweep = [&] {
        for (Index k = 0; k < lat.n_sites(); ++k) {
            const int r = site(rng), c = site(rng);
            const int s = lat.spin(r, c);
            const double delta_ising = 2.0 * s * neighbor_sum(lat, r, c);
            const double delta_abs = std::abs(total - 2.0 * s) - std::abs(total);
            const double log_accept =
                -model.beta * delta_ising - model.w_star * delta_abs;
            if (log_accept >= 0.0 || unif(rng) < std::exp(log_accept)) {
                lat.spins[std::size_t(r) * L + c] = -s;
                total -= 2.0 * s;
            }
        }
    };

    for (Index t = 0; t < options.burn_in; ++t) sweep();
    MatrixXd samples(n_samples, lat.n_sites());
    for (Index b = 0; b < n_samples; ++b) {
        for (int t = 0; t < options.thinning; ++t) sweep();
        for (Index i = 0; i < lat.n_sites(); ++i)
            samples(b, i) = double(lat.spins[std::size_t(i)]);
    }
    return samples;
}

double predict_w_star(double beta, double m_star) {
    if (m_star < -1.0 || m_star > 1.0)
        throw std::invalid_argument("predict_w_star: m_star must be in [-1, 1]");
    constexpr double kCoordination = 4.0;  // square lattice
    return beta * kCoordination * std::abs(m_star);
}

}  // namespace disrbm
