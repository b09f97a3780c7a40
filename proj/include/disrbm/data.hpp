#pragma once

#include <set>
#include <string>
#include <vector>

#include "disrbm/rng.hpp"
#include "disrbm/types.hpp"

namespace disrbm {

/// In-memory dataset: one configuration per row. Binary/spin data live in
/// `configurations`; one-hot data are kept as per-site state indices in
/// `categorical` (21-state protein sites would waste 21x as flat doubles)
/// and embedded on demand.
struct LabeledDataset {
    UnitKind kind = UnitKind::Binary;
    int n_states = 1;          // q for one-hot
    MatrixXd configurations;   // binary/spin rows
    MatrixXi categorical;      // one-hot index rows
    VectorXi labels;           // empty when unlabeled
    VectorXd sample_weights;   // empty means uniform
    std::string provenance;

    Index size() const {
        return kind == UnitKind::OneHot ? categorical.rows()
                                        : configurations.rows();
    }
    Index n_sites() const {
        return kind == UnitKind::OneHot ? categorical.cols()
                                        : configurations.cols();
    }
    Index flat_units() const { return n_sites() * (kind == UnitKind::OneHot ? n_states : 1); }
    bool has_labels() const { return labels.size() > 0; }

    /// Flat matrix view for model code (one-hot rows embedded as 0/1).
    MatrixXd flat() const;
    void validate() const;
};

/// IDX image + label pair, binarized at `threshold` after scaling raw bytes
/// to [0,1]. `digit_filter` keeps only the listed digits and remaps labels to
/// 0..D-1 in ascending digit order; empty keeps everything.
LabeledDataset load_mnist_idx(const std::string& images_path,
                              const std::string& labels_path,
                              const std::set<int>& digit_filter = {},
                              double threshold = 0.5);

// Fixture writers (tests, synthetic corpora): big-endian IDX encoding.
void write_idx_images(const std::string& path,
                      const std::vector<std::vector<std::uint8_t>>& images,
                      int rows, int cols);
void write_idx_labels(const std::string& path,
                      const std::vector<std::uint8_t>& labels);

/// Doubles the dataset: each image appears with label 0 and its bit
/// complement with label 1.
LabeledDataset invert_background(const LabeledDataset& dataset);

/// Protein alignment after insertion removal and gap-column filtering.
/// States index "ACDEFGHIKLMNPQRSTVWY-", 20 = gap.
struct Alignment {
    MatrixXi sequences;              // B x L_kept state indices
    std::vector<std::string> names;  // FASTA headers
    std::vector<Index> kept_columns; // indices into the original columns
    Index original_length = 0;

    Index size() const { return sequences.rows(); }
    Index length() const { return sequences.cols(); }
};

constexpr int kAminoStates = 21;
constexpr char kAminoAlphabet[] = "ACDEFGHIKLMNPQRSTVWY-";

/// FASTA-style alignment: lowercase letters and '.' are insertions and get
/// removed; '-' is the gap state; unknown characters map to gap with a
/// warning. Columns with gap fraction >= `max_gap_fraction` are dropped.
Alignment load_alignment(const std::string& path,
                         double max_gap_fraction = 0.5);

/// w_b = 1 / #{b' : Hamming(s_b, s_b') < cutoff * L} (self included).
VectorXd sequence_weights(const Alignment& alignment,
                          double similarity_cutoff = 0.2);

/// Rescales weights so every label class carries equal total weight; the
/// grand total is preserved.
VectorXd balance_class_weights(const VectorXd& weights, const VectorXi& labels);

/// Weighted one-hot frequencies per retained column; rows sum to one.
MatrixXd per_site_frequencies(const Alignment& alignment,
                              const VectorXd& weights);

LabeledDataset dataset_from_alignment(const Alignment& alignment,
                                      const VectorXi& labels,
                                      const VectorXd& weights);

/// Balanced draws from per-class multivariate normals (Cholesky sampling).
LabeledDataset synthetic_gaussian_mixture(Index n_total,
                                          const std::vector<VectorXd>& means,
                                          const std::vector<MatrixXd>& covariances,
                                          Rng& rng);

/// Label sidecar: "id,label" CSV rows matched against alignment names.
VectorXi load_label_csv(const std::string& path,
                        const std::vector<std::string>& names);

}  // namespace disrbm
