#pragma once

#include <string>
#include <utility>
#include <vector>

#include "disrbm/rbm.hpp"
#include "disrbm/rng.hpp"
#include "disrbm/types.hpp"

namespace disrbm {

/// Softmax classifier with SELU hidden layers (possibly none: a perceptron).
struct ProbeClassifier {
    std::vector<MatrixXd> weights;  // layer l: fan_in x fan_out
    std::vector<VectorXd> biases;

    Index n_inputs() const { return weights.front().rows(); }
    Index n_classes() const { return weights.back().cols(); }
    Index n_parameters() const;

    /// Class probabilities, one row per input row.
    MatrixXd predict(const MatrixXd& inputs) const;
    /// Mean cross-entropy (nats) of the true labels.
    double cross_entropy(const MatrixXd& inputs, const VectorXi& labels) const;
};

struct ProbeTrainOptions {
    Index max_steps = 50000;
    Index batch_size = 128;
    double learning_rate = 1e-3;
    double plateau_improvement = 1e-5;  // stop when loss gains less than this
    Index plateau_window = 2000;        // over this many steps
};

struct ProbeGradient {
    double loss = 0.0;  // mean cross-entropy, nats
    std::vector<MatrixXd> weights;
    std::vector<VectorXd> biases;
};

/// Mean cross-entropy and its exact gradient on the given rows.
ProbeGradient probe_gradient(const ProbeClassifier& classifier,
                             const MatrixXd& inputs, const VectorXi& labels);

/// Cross-entropy minimization with adaptive moments on the given data.
/// `widths` lists hidden layer widths; empty means a linear classifier.
ProbeClassifier train_probe(const MatrixXd& inputs, const VectorXi& labels,
                            const std::vector<Index>& widths, Index steps,
                            Rng& rng,
                            const ProbeTrainOptions& options = {});

/// Area under the ROC curve of the class-1 probability (rank statistic,
/// midranks on ties). Binary labels only.
double auc(const ProbeClassifier& classifier, const MatrixXd& inputs,
           const VectorXi& labels);
double auc_from_scores(const VectorXd& scores, const VectorXi& labels);

/// Variational lower bound on the label information in `inputs`:
/// S_label + <log2 P_class(true label)>, in bits. Negative raw values mean
/// the classifier is worse than guessing; report clips at zero.
double mi_lower_bound(const ProbeClassifier& classifier, const MatrixXd& inputs,
                      const VectorXi& labels);

struct ProbeResult {
    std::string architecture;  // e.g. "perceptron", "128x64"
    Index n_parameters = 0;
    double val_cross_entropy = 0.0;  // nats
    double auc = 0.0;                // 0.5 filled for multiclass
    double mi_bound_bits = 0.0;      // raw, may be negative
};

struct MiBoundReport {
    std::vector<ProbeResult> results;
    double label_entropy_bits = 0.0;
    double best_bound_bits = 0.0;  // max over classifiers, clipped at 0

    void write_csv(const std::string& path) const;
};

enum class UnitSubset { All, Constrained, Released };

/// Desk-scale default ladder: perceptron, one-layer widths 4..256, and
/// two-layer 128x{4,16,64}. `full` switches to the 36-classifier grid.
std::vector<std::vector<Index>> probe_architectures(bool full = false);

/// Trains one classifier per architecture on the model's hidden inputs
/// (optionally restricted to the constrained or released unit subset given by
/// `released_units`) with an 80/20 stratified split; bounds are evaluated on
/// the held-out part.
MiBoundReport probe_sweep(const RbmModel& model, const MatrixXd& data,
                          const VectorXi& labels,
                          const std::vector<std::vector<Index>>& architectures,
                          Rng& rng, Index steps = 50000,
                          UnitSubset subset = UnitSubset::All,
                          const std::vector<Index>& released_units = {});

/// Same sweep on raw feature rows instead of model inputs.
MiBoundReport probe_sweep_features(const MatrixXd& features,
                                   const VectorXi& labels,
                                   const std::vector<std::vector<Index>>& archs,
                                   Rng& rng, Index steps = 50000);

/// Cosine overlap between two direction estimates.
double overlap(const VectorXd& q_full, const VectorXd& q_sub);

/// Expected overlap between the full-data direction and one estimated from B
/// labeled examples per class:
/// (1 + (tr C0 + tr C1) / (B |v0 - v1|^2))^{-1/2}.
double overlap_theory(std::pair<double, double> class_cov_traces,
                      double separation_sq, Index b_per_class);

/// Balanced without-replacement subsample: B/2 rows per class, B even.
std::pair<MatrixXd, VectorXi> subsample_labeled(const MatrixXd& data,
                                                const VectorXi& labels, Index b,
                                                Rng& rng);

/// Stratified 80/20 split helper shared by the sweeps; returns row indices.
std::pair<std::vector<Index>, std::vector<Index>> stratified_split(
    const VectorXi& labels, double train_fraction, Rng& rng);

}  // namespace disrbm
