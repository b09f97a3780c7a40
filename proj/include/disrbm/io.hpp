#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "disrbm/constraints.hpp"
#include "disrbm/data.hpp"
#include "disrbm/probe.hpp"
#include "disrbm/rbm.hpp"
#include "disrbm/types.hpp"

namespace disrbm {

/// Sidecar carried inside a checkpoint: training provenance plus enough
/// constraint information to drive released-unit manipulation later.
struct CheckpointMeta {
    std::uint64_t train_iterations = 0;
    std::vector<Index> released_units;
    std::uint64_t constraint_digest = 0;  // 0 when trained unconstrained
};

// "DRBM": layer sizes, kind tags, row-major f64 weights, bias vectors, and
// the metadata block. Round trips are bit-exact.
void save_checkpoint(const std::string& path, const RbmModel& model,
                     const CheckpointMeta& meta);
std::pair<RbmModel, CheckpointMeta> load_checkpoint(const std::string& path);

// "DCON": linear directions, low-rank quadratic factors, chi2, released map,
// and the digest of the dataset the constraints were built from.
void save_constraints(const std::string& path, const ConstraintSet& constraints,
                      std::uint64_t dataset_digest);
std::pair<ConstraintSet, std::uint64_t> load_constraints(const std::string& path);

/// Text export: one linear direction per line, space-separated decimals.
void export_constraints_text(const std::string& path,
                             const ConstraintSet& constraints);

// "DSET": canonical dataset container (binary, versioned).
void save_dataset(const std::string& path, const LabeledDataset& dataset);
LabeledDataset load_dataset(const std::string& path);

// "DISN": L, beta, sample count, then packed sign bits row-major.
void save_ising_samples(const std::string& path, const MatrixXd& samples,
                        int l_side, double beta);
struct IsingSampleFile {
    MatrixXd samples;
    int l_side = 0;
    double beta = 0.0;
};
IsingSampleFile load_ising_samples(const std::string& path);

// "DPRB": probe classifier (layer shapes + parameters).
void save_probe(const std::string& path, const ProbeClassifier& probe);
ProbeClassifier load_probe(const std::string& path);

/// FNV-1a over a file's bytes; digest stored into DCON / checkpoints.
std::uint64_t file_digest(const std::string& path);
std::uint64_t bytes_digest(const void* data, std::size_t size);

void write_csv(const std::string& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace disrbm
