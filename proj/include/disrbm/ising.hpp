#pragma once

#include <cstdint>
#include <vector>

#include "disrbm/rng.hpp"
#include "disrbm/types.hpp"

namespace disrbm {

/// L x L square grid of +-1 spins with periodic boundaries at inverse
/// temperature beta. Sites are flat row-major: site (r, c) = r*L + c.
struct IsingLattice {
    int L = 0;
    double beta = 0.0;
    std::vector<std::int8_t> spins;  // L*L values in {-1,+1}

    Index n_sites() const { return Index(L) * L; }
    int spin(int r, int c) const { return spins[std::size_t(r) * L + c]; }
};

IsingLattice make_lattice(int L, double beta);                 // all up
IsingLattice make_random_lattice(int L, double beta, Rng& rng);  // hot start

/// E = -sum over the 2 L^2 distinct periodic bonds of v_i v_j.
double ising_energy(const IsingLattice& lattice);

/// L^2 random single-spin flip proposals with acceptance min(1, e^{-beta dE}).
/// Returns the number of accepted flips.
int metropolis_sweep(IsingLattice& lattice, Rng& rng);

/// Grows one cluster with bond probability 1 - e^{-2 beta} and flips it.
/// Returns the cluster size.
int wolff_step(IsingLattice& lattice, Rng& rng);

struct HybridOptions {
    Index burn_in = 1000;  // hybrid iterations before recording
    int thinning = 10;     // record every thinning-th iteration
};

struct HybridStats {
    long n_metropolis = 0;
    long n_wolff = 0;
    double avg_moved_metropolis = 0.0;  // running average at the end
    double avg_moved_wolff = 0.0;
};

/// Alternates Metropolis sweeps and Wolff steps, choosing at each iteration
/// the move kind with the larger running average of spins moved (with a
/// small exploration rate so both averages stay fresh). Returns one row of
/// flat +-1 doubles per recorded configuration.
MatrixXd hybrid_sampler(IsingLattice& lattice, Index n_samples,
                        const HybridOptions& options, Rng& rng,
                        HybridStats* stats = nullptr);

struct IsingObservables {
    double magnetization = 0.0;   // <|sum v| / N>
    double heat_capacity = 0.0;   // beta^2/N (<E^2> - <E>^2)
    double susceptibility = 0.0;  // beta/N [<(sum v)^2> - <|sum v|>^2]
};

/// Estimates m, C, chi from sample rows (flat L*L spins).
IsingObservables observables(const MatrixXd& samples, double beta);

/// sign(sum_i v_i); exact ties map to -1.
int magnetization_label(const VectorXd& v);

/// Ising energy plus an |M|-penalty: E = -sum_(ij) v_i v_j + (w*/beta)|sum v|.
/// Reduces to the plain model at w* = 0.
struct EffectiveIsingModel {
    double beta = 0.0;
    double w_star = 0.0;
};

double effective_energy(const EffectiveIsingModel& model,
                        const IsingLattice& lattice);

/// Metropolis sampling of the effective model (single-spin flips only; the
/// |M| term is global, so cluster moves do not apply).
MatrixXd effective_sampler(const EffectiveIsingModel& model, int L,
                           Index n_samples, const HybridOptions& options,
                           Rng& rng);

/// Minimal penalty strength that cancels the mean ferromagnetic field:
/// w* = beta * z * |m*| with coordination number z = 4.
double predict_w_star(double beta, double m_star);

}  // namespace disrbm
