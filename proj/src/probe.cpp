#include "disrbm/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "disrbm/parallel.hpp"

namespace disrbm {

namespace {

constexpr double kSeluLambda = 1.0507009873554805;
constexpr double kSeluAlpha = 1.6732632423543772;

double selu(double x) {
    return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

double selu_derivative(double x) {
    return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

MatrixXd softmax_rows(const MatrixXd& logits) {
    MatrixXd p(logits.rows(), logits.cols());
    for (Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        p.row(r) = (logits.row(r).array() - mx).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

void check_labels_range(const VectorXi& labels, Index n_classes) {
    if (labels.minCoeff() < 0 || labels.maxCoeff() >= n_classes)
        throw std::invalid_argument("probe: label out of range");
}

struct ForwardPass {
    std::vector<MatrixXd> pre;   // pre-activations per hidden layer
    std::vector<MatrixXd> post;  // activations per layer (post[0] = inputs)
    MatrixXd probabilities;
};

ForwardPass forward(const ProbeClassifier& net, const MatrixXd& inputs) {
    ForwardPass fp;
    fp.post.push_back(inputs);
    const std::size_t n_layers = net.weights.size();
    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
        MatrixXd z = (fp.post.back() * net.weights[l]).rowwise() +
                     net.biases[l].transpose();
        fp.pre.push_back(z);
        fp.post.push_back(z.unaryExpr([](double x) { return selu(x); }));
    }
    const MatrixXd logits = (fp.post.back() * net.weights.back()).rowwise() +
                            net.biases.back().transpose();
    fp.probabilities = softmax_rows(logits);
    return fp;
}

}  // namespace

Index ProbeClassifier::n_parameters() const {
    Index count = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        count += weights[l].size() + biases[l].size();
    return count;
}

MatrixXd ProbeClassifier::predict(const MatrixXd& inputs) const {
    return forward(*this, inputs).probabilities;
}

double ProbeClassifier::cross_entropy(const MatrixXd& inputs,
                                      const VectorXi& labels) const {
    if (labels.size() != inputs.rows())
        throw std::invalid_argument("cross_entropy: label count mismatch");
    check_labels_range(labels, n_classes());
    const MatrixXd p = predict(inputs);
    double loss = 0.0;
    for (Index r = 0; r < inputs.rows(); ++r)
        loss -= std::log(std::max(p(r, labels[r]), 1e-300));
    return loss / double(inputs.rows());
}

ProbeGradient probe_gradient(const ProbeClassifier& net, const MatrixXd& inputs,
                             const VectorXi& labels) {
    if (inputs.rows() == 0 || labels.size() != inputs.rows())
        throw std::invalid_argument("probe_gradient: bad inputs");
    check_labels_range(labels, net.n_classes());
    const Index n = inputs.rows();
    ForwardPass fp = forward(net, inputs);

    ProbeGradient out;
    MatrixXd delta = fp.probabilities;  // dL/dlogits = p - onehot
    for (Index b = 0; b < n; ++b) {
        out.loss -= std::log(std::max(fp.probabilities(b, labels[b]), 1e-300));
        delta(b, labels[b]) -= 1.0;
    }
    out.loss /= double(n);
    delta /= double(n);

    const std::size_t n_layers = net.weights.size();
    out.weights.resize(n_layers);
    out.biases.resize(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        out.weights[l] = fp.post[l].transpose() * delta;
        out.biases[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = (delta * net.weights[l].transpose())
                        .cwiseProduct(fp.pre[l - 1].unaryExpr(
                            [](double x) { return selu_derivative(x); }));
        }
    }
    return out;
}

ProbeClassifier train_probe(const MatrixXd& inputs, const VectorXi& labels,
                            const std::vector<Index>& widths, Index steps,
                            Rng& rng, const ProbeTrainOptions& options) {
    if (inputs.rows() == 0) throw std::invalid_argument("train_probe: no data");
    if (labels.size() != inputs.rows())
        throw std::invalid_argument("train_probe: label count mismatch");
    const Index n_classes = labels.maxCoeff() + 1;
    if (n_classes < 2 || labels.minCoeff() < 0)
        throw std::invalid_argument("train_probe: need at least two classes");

    // layer sizes: inputs -> widths... -> classes, LeCun-normal init
    ProbeClassifier net;
    std::vector<Index> sizes{inputs.cols()};
    sizes.insert(sizes.end(), widths.begin(), widths.end());
    sizes.push_back(n_classes);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        std::normal_distribution<double> gauss(0.0,
                                               1.0 / std::sqrt(double(sizes[l])));
        MatrixXd w(sizes[l], sizes[l + 1]);
        for (Index i = 0; i < w.rows(); ++i)
            for (Index j = 0; j < w.cols(); ++j) w(i, j) = gauss(rng);
        net.weights.push_back(std::move(w));
        net.biases.push_back(VectorXd::Zero(sizes[l + 1]));
    }

    std::vector<MatrixXd> m_w, v_w;
    std::vector<VectorXd> m_b, v_b;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        m_w.push_back(MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        v_w.push_back(MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        m_b.push_back(VectorXd::Zero(net.biases[l].size()));
        v_b.push_back(VectorXd::Zero(net.biases[l].size()));
    }

    const Index max_steps = std::min(steps, options.max_steps);
    const Index batch = std::min(options.batch_size, inputs.rows());
    std::uniform_int_distribution<Index> pick(0, inputs.rows() - 1);
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    double best_loss = std::numeric_limits<double>::infinity();
    Index best_step = 0;
    double running_loss = 0.0;
    Index running_count = 0;

    MatrixXd batch_x(batch, inputs.cols());
    VectorXi batch_y(batch);
    for (Index step = 1; step <= max_steps; ++step) {
        for (Index b = 0; b < batch; ++b) {
            const Index r = pick(rng);
            batch_x.row(b) = inputs.row(r);
            batch_y[b] = labels[r];
        }
        const ProbeGradient grad = probe_gradient(net, batch_x, batch_y);
        const double loss = grad.loss;

        const std::size_t n_layers = net.weights.size();
        const double bc1 = 1.0 - std::pow(b1, double(step));
        const double bc2 = 1.0 - std::pow(b2, double(step));
        for (std::size_t l = 0; l < n_layers; ++l) {
            m_w[l] = b1 * m_w[l] + (1.0 - b1) * grad.weights[l];
            v_w[l] = b2 * v_w[l] +
                     (1.0 - b2) * grad.weights[l].cwiseProduct(grad.weights[l]);
            net.weights[l] -=
                (options.learning_rate / bc1) *
                (m_w[l].array() / ((v_w[l].array() / bc2).sqrt() + eps)).matrix();
            m_b[l] = b1 * m_b[l] + (1.0 - b1) * grad.biases[l];
            v_b[l] = b2 * v_b[l] +
                     (1.0 - b2) * grad.biases[l].cwiseProduct(grad.biases[l]);
            net.biases[l] -=
                (options.learning_rate / bc1) *
                (m_b[l].array() / ((v_b[l].array() / bc2).sqrt() + eps)).matrix();
        }

        // plateau detection on the smoothed training loss
        running_loss += loss;
        running_count += 1;
        if (running_count == std::min<Index>(options.plateau_window / 10 + 1, 200)) {
            const double avg = running_loss / double(running_count);
            running_loss = 0.0;
            running_count = 0;
            if (avg < best_loss - options.plateau_improvement) {
                best_loss = avg;
                best_step = step;
            } else if (step - best_step >= options.plateau_window) {
                break;
            }
        }
    }
    return net;
}

double auc_from_scores(const VectorXd& scores, const VectorXi& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc: size mismatch");
    Index n_pos = 0, n_neg = 0;
    for (Index i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) ++n_pos;
        else if (labels[i] == 0) ++n_neg;
        else throw std::invalid_argument("auc: labels must be 0 or 1");
    }
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("auc: both classes required");

    // midrank statistic: AUC = (R_pos - n_pos(n_pos+1)/2) / (n_pos n_neg)
    std::vector<Index> order(scores.size());
    std::iota(order.begin(), order.end(), Index(0));
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return scores[a] < scores[b]; });
    std::vector<double> rank(scores.size());
    Index i = 0;
    while (i < Index(order.size())) {
        Index j = i;
        while (j + 1 < Index(order.size()) &&
               scores[order[j + 1]] == scores[order[i]])
            ++j;
        const double mid = 0.5 * double(i + j) + 1.0;
        for (Index k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double rank_sum = 0.0;
    for (Index k = 0; k < labels.size(); ++k)
        if (labels[k] == 1) rank_sum += rank[k];
    return (rank_sum - 0.5 * double(n_pos) * double(n_pos + 1)) /
           (double(n_pos) * double(n_neg));
}

double auc(const ProbeClassifier& classifier, const MatrixXd& inputs,
           const VectorXi& labels) {
    if (classifier.n_classes() != 2)
        throw std::invalid_argument("auc: binary classifier required");
    const MatrixXd p = classifier.predict(inputs);
    return auc_from_scores(p.col(1), labels);
}

namespace {

double label_entropy_bits(const VectorXi& labels, Index n_classes) {
    VectorXd freq = VectorXd::Zero(n_classes);
    for (Index i = 0; i < labels.size(); ++i) freq[labels[i]] += 1.0;
    freq /= double(labels.size());
    double h = 0.0;
    for (Index d = 0; d < n_classes; ++d)
        if (freq[d] > 0.0) h -= freq[d] * std::log2(freq[d]);
    return h;
}

}  // namespace

double mi_lower_bound(const ProbeClassifier& classifier, const MatrixXd& inputs,
                      const VectorXi& labels) {
    const Index n_classes = classifier.n_classes();
    check_labels_range(labels, n_classes);
    const MatrixXd p = classifier.predict(inputs);
    double log2_likelihood = 0.0;
    for (Index r = 0; r < inputs.rows(); ++r)
        log2_likelihood += std::log2(std::max(p(r, labels[r]), 1e-300));
    log2_likelihood /= double(inputs.rows());
    return label_entropy_bits(labels, n_classes) + log2_likelihood;
}

std::vector<std::vector<Index>> probe_architectures(bool full) {
    std::vector<std::vector<Index>> archs;
    archs.push_back({});  // perceptron
    if (!full) {
        for (Index w : {4, 8, 16, 32, 64, 128, 256}) archs.push_back({w});
        for (Index w : {4, 16, 64}) archs.push_back({128, w});
        return archs;
    }
    for (int n = 0; n <= 10; ++n) archs.push_back({Index(1) << n});
    for (int n = 0; n <= 6; ++n) archs.push_back({128, Index(1) << n});
    for (int n = 0; n <= 7; ++n) archs.push_back({256, Index(1) << n});
    for (int n = 0; n <= 8; ++n) archs.push_back({512, Index(1) << n});
    return archs;
}

std::pair<std::vector<Index>, std::vector<Index>> stratified_split(
    const VectorXi& labels, double train_fraction, Rng& rng) {
    const Index n_classes = labels.maxCoeff() + 1;
    std::vector<std::vector<Index>> per_class(n_classes);
    for (Index i = 0; i < labels.size(); ++i) per_class[labels[i]].push_back(i);
    std::vector<Index> train, validation;
    for (auto& rows : per_class) {
        std::shuffle(rows.begin(), rows.end(), rng);
        const Index cut = Index(std::llround(train_fraction * double(rows.size())));
        for (Index k = 0; k < Index(rows.size()); ++k)
            (k < cut ? train : validation).push_back(rows[k]);
    }
    std::sort(train.begin(), train.end());
    std::sort(validation.begin(), validation.end());
    return {train, validation};
}

namespace {

std::string architecture_name(const std::vector<Index>& widths) {
    if (widths.empty()) return "perceptron";
    std::string name;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (i) name += 'x';
        name += std::to_string(widths[i]);
    }
    return name;
}

MatrixXd take_rows(const MatrixXd& m, const std::vector<Index>& rows) {
    MatrixXd out(rows.size(), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(k) = m.row(rows[k]);
    return out;
}

VectorXi take_labels(const VectorXi& v, const std::vector<Index>& rows) {
    VectorXi out(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) out[k] = v[rows[k]];
    return out;
}

MiBoundReport sweep_impl(const MatrixXd& features, const VectorXi& labels,
                         const std::vector<std::vector<Index>>& archs,
                         Rng& rng, Index steps) {
    if (features.rows() != labels.size())
        throw std::invalid_argument("probe_sweep: label count mismatch");
    const auto [train_rows, val_rows] = stratified_split(labels, 0.8, rng);
    const MatrixXd train_x = take_rows(features, train_rows);
    const VectorXi train_y = take_labels(labels, train_rows);
    const MatrixXd val_x = take_rows(features, val_rows);
    const VectorXi val_y = take_labels(labels, val_rows);
    const Index n_classes = labels.maxCoeff() + 1;

    MiBoundReport report;
    report.label_entropy_bits = label_entropy_bits(val_y, n_classes);
    report.results.resize(archs.size());

    const std::uint64_t master = rng();
    parallel_for(long(archs.size()), [&](long a) {
        Rng stream = make_stream(master, std::uint64_t(a));
        const ProbeClassifier net =
            train_probe(train_x, train_y, archs[a], steps, stream);
        ProbeResult res;
        res.architecture = architecture_name(archs[a]);
        res.n_parameters = net.n_parameters();
        res.val_cross_entropy = net.cross_entropy(val_x, val_y);
        res.auc = n_classes == 2 ? auc(net, val_x, val_y) : 0.5;
        res.mi_bound_bits = mi_lower_bound(net, val_x, val_y);
        report.results[a] = std::move(res);
    });

    report.best_bound_bits = 0.0;
    for (const auto& r : report.results)
        report.best_bound_bits = std::max(report.best_bound_bits, r.mi_bound_bits);
    return report;
}

}  // namespace

MiBoundReport probe_sweep(const RbmModel& model, const MatrixXd& data,
                          const VectorXi& labels,
                          const std::vector<std::vector<Index>>& architectures,
                          Rng& rng, Index steps, UnitSubset subset,
                          const std::vector<Index>& released_units) {
    MatrixXd inputs = hidden_inputs(model, data);
    if (subset != UnitSubset::All) {
        std::vector<Index> keep;
        for (Index mu = 0; mu < model.n_hidden; ++mu) {
            const bool released =
                std::find(released_units.begin(), released_units.end(), mu) !=
                released_units.end();
            if ((subset == UnitSubset::Released) == released) keep.push_back(mu);
        }
        if (keep.empty())
            throw std::invalid_argument("probe_sweep: empty unit subset");
        MatrixXd sub(inputs.rows(), keep.size());
        for (std::size_t k = 0; k < keep.size(); ++k)
            sub.col(k) = inputs.col(keep[k]);
        inputs = std::move(sub);
    }
    return sweep_impl(inputs, labels, architectures, rng, steps);
}

MiBoundReport probe_sweep_features(const MatrixXd& features,
                                   const VectorXi& labels,
                                   const std::vector<std::vector<Index>>& archs,
                                   Rng& rng, Index steps) {
    return sweep_impl(features, labels, archs, rng, steps);
}

void MiBoundReport::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open report file: " + path);
    out << "architecture,params,val_cross_entropy,auc,mi_bound_bits\n";
    for (const auto& r : results)
        out << r.architecture << ',' << r.n_parameters << ','
            << r.val_cross_entropy << ',' << r.auc << ',' << r.mi_bound_bits
            << '\n';
}

double overlap(const VectorXd& q_full, const VectorXd& q_sub) {
    if (q_full.size() != q_sub.size())
        throw std::invalid_argument("overlap: size mismatch");
    const double nf = q_full.norm(), ns = q_sub.norm();
    if (nf <= 0.0 || ns <= 0.0)
        throw std::invalid_argument("overlap: zero vector");
    return q_full.dot(q_sub) / (nf * ns);
}

double overlap_theory(std::pair<double, double> class_cov_traces,
                      double separation_sq, Index b_per_class) {
    if (b_per_class <= 0)
        throw std::invalid_argument("overlap_theory: B must be positive");
    if (separation_sq <= 0.0)
        throw std::invalid_argument("overlap_theory: zero separation");
    const double traces = class_cov_traces.first + class_cov_traces.second;
    return 1.0 /
           std::sqrt(1.0 + traces / (double(b_per_class) * separation_sq));
}

std::pair<MatrixXd, VectorXi> subsample_labeled(const MatrixXd& data,
                                                const VectorXi& labels, Index b,
                                                Rng& rng) {
    if (b < 2 || b % 2 != 0)
        throw std::invalid_argument("subsample_labeled: B must be even and >= 2");
    std::vector<Index> class0, class1;
    for (Index i = 0; i < labels.size(); ++i) {
        if (labels[i] == 0) class0.push_back(i);
        else if (labels[i] == 1) class1.push_back(i);
        else throw std::invalid_argument("subsample_labeled: labels must be 0/1");
    }
    const Index half = b / 2;
    if (Index(class0.size()) < half || Index(class1.size()) < half)
        throw std::invalid_argument("subsample_labeled: not enough class members");
    std::shuffle(class0.begin(), class0.end(), rng);
    std::shuffle(class1.begin(), class1.end(), rng);

    MatrixXd out_x(b, data.cols());
    VectorXi out_y(b);
    for (Index k = 0; k < half; ++k) {
        out_x.row(k) = data.row(class0[k]);
        out_y[k] = 0;
        out_x.row(half + k) = data.row(class1[k]);
        out_y[half + k] = 1;
    }
    return {out_x, out_y};
}

}  // namespace disrbm
