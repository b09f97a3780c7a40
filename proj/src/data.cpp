#include "disrbm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "disrbm/parallel.hpp"
#include "disrbm/rbm.hpp"

namespace disrbm {

MatrixXd LabeledDataset::flat() const {
    if (kind != UnitKind::OneHot) return configurations;
    MatrixXd out = MatrixXd::Zero(categorical.rows(),
                                  categorical.cols() * n_states);
    for (Index b = 0; b < categorical.rows(); ++b)
        for (Index s = 0; s < categorical.cols(); ++s)
            out(b, s * n_states + categorical(b, s)) = 1.0;
    return out;
}

void LabeledDataset::validate() const {
    if (has_labels() && labels.size() != size())
        throw std::invalid_argument("dataset: |labels| != |configurations|");
    if (sample_weights.size() > 0 && sample_weights.size() != size())
        throw std::invalid_argument("dataset: |weights| != |configurations|");
    if (sample_weights.size() > 0 && sample_weights.minCoeff() <= 0.0)
        throw std::invalid_argument("dataset: weights must be positive");
    if (kind == UnitKind::OneHot) {
        if (n_states < 2) throw std::invalid_argument("dataset: one-hot q < 2");
        if (categorical.size() > 0 &&
            (categorical.minCoeff() < 0 || categorical.maxCoeff() >= n_states))
            throw std::invalid_argument("dataset: state index out of range");
    }
}

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
    std::uint8_t b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw IoError("truncated IDX file: " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be_u32(std::ostream& out, std::uint32_t x) {
    const std::uint8_t b[4] = {std::uint8_t(x >> 24), std::uint8_t(x >> 16),
                               std::uint8_t(x >> 8), std::uint8_t(x)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

LabeledDataset load_mnist_idx(const std::string& images_path,
                              const std::string& labels_path,
                              const std::set<int>& digit_filter,
                              double threshold) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot open images file: " + images_path);
    if (read_be_u32(img, images_path) != 0x00000803u)
        throw IoError("bad magic in images file: " + images_path);
    const std::uint32_t n_images = read_be_u32(img, images_path);
    const std::uint32_t rows = read_be_u32(img, images_path);
    const std::uint32_t cols = read_be_u32(img, images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("cannot open labels file: " + labels_path);
    if (read_be_u32(lab, labels_path) != 0x00000801u)
        throw IoError("bad magic in labels file: " + labels_path);
    const std::uint32_t n_labels = read_be_u32(lab, labels_path);
    if (n_labels != n_images)
        throw IoError("image/label count mismatch: " + images_path);

    const std::size_t n_pixels = std::size_t(rows) * cols;
    std::vector<std::uint8_t> pixels(n_pixels);
    std::vector<std::vector<double>> kept_rows;
    std::vector<int> kept_digits;
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(pixels.data()), n_pixels))
            throw IoError("truncated image data: " + images_path);
        char digit_ch;
        if (!lab.read(&digit_ch, 1))
            throw IoError("truncated label data: " + labels_path);
        const int digit = static_cast<std::uint8_t>(digit_ch);
        if (!digit_filter.empty() && !digit_filter.count(digit)) continue;
        std::vector<double> row(n_pixels);
        for (std::size_t p = 0; p < n_pixels; ++p)
            row[p] = (double(pixels[p]) / 255.0 > threshold) ? 1.0 : 0.0;
        kept_rows.push_back(std::move(row));
        kept_digits.push_back(digit);
    }

    // remap labels to 0..D-1 in ascending digit order
    std::set<int> digits(kept_digits.begin(), kept_digits.end());
    std::map<int, int> remap;
    int next = 0;
    for (int d : digits) remap[d] = next++;

    LabeledDataset ds;
    ds.kind = UnitKind::Binary;
    ds.configurations.resize(kept_rows.size(), n_pixels);
    ds.labels.resize(kept_rows.size());
    for (std::size_t i = 0; i < kept_rows.size(); ++i) {
        ds.configurations.row(Index(i)) = Eigen::Map<const Eigen::RowVectorXd>(
            kept_rows[i].data(), n_pixels);
        ds.labels[Index(i)] = remap[kept_digits[i]];
    }
    ds.provenance = images_path;
    ds.validate();
    return ds;
}

void write_idx_images(const std::string& path,
                      const std::vector<std::vector<std::uint8_t>>& images,
                      int rows, int cols) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_be_u32(out, 0x00000803u);
    write_be_u32(out, std::uint32_t(images.size()));
    write_be_u32(out, std::uint32_t(rows));
    write_be_u32(out, std::uint32_t(cols));
    for (const auto& image : images) {
        if (image.size() != std::size_t(rows) * cols)
            throw std::invalid_argument("write_idx_images: wrong image size");
        out.write(reinterpret_cast<const char*>(image.data()), image.size());
    }
}

void write_idx_labels(const std::string& path,
                      const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_be_u32(out, 0x00000801u);
    write_be_u32(out, std::uint32_t(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()), labels.size());
}

LabeledDataset invert_background(const LabeledDataset& dataset) {
    if (dataset.kind != UnitKind::Binary)
        throw std::invalid_argument("invert_background: binary units required");
    LabeledDataset out;
    out.kind = UnitKind::Binary;
    const Index n = dataset.size();
    out.configurations.resize(2 * n, dataset.configurations.cols());
    out.labels.resize(2 * n);
    for (Index i = 0; i < n; ++i) {
        out.configurations.row(2 * i) = dataset.configurations.row(i);
        out.labels[2 * i] = 0;
        out.configurations.row(2 * i + 1) =
            (1.0 - dataset.configurations.row(i).array()).matrix();
        out.labels[2 * i + 1] = 1;
    }
    out.provenance = dataset.provenance + " (background-inverted)";
    return out;
}

namespace {

int amino_index(char c, bool& unknown) {
    static int table[256];
    static bool built = false;
    if (!built) {
        std::fill(std::begin(table), std::end(table), -1);
        for (int i = 0; i < kAminoStates; ++i)
            table[std::size_t(kAminoAlphabet[i])] = i;
        built = true;
    }
    const int idx = table[static_cast<std::uint8_t>(c)];
    if (idx >= 0) return idx;
    unknown = true;
    return kAminoStates - 1;  // gap
}

}  // namespace

Alignment load_alignment(const std::string& path, double max_gap_fraction) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open alignment: " + path);

    std::vector<std::string> names, raw;
    std::string line, current;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '>') {
            if (!names.empty()) raw.push_back(current);
            current.clear();
            names.push_back(line.substr(1));
        } else {
            if (names.empty())
                throw IoError("alignment does not start with a header: " + path);
            current += line;
        }
    }
    if (!names.empty()) raw.push_back(current);
    if (names.empty()) throw IoError("empty alignment: " + path);

    // drop insertions (lowercase and '.'), translate the rest
    std::vector<std::vector<int>> rows;
    bool any_unknown = false;
    for (const auto& seq : raw) {
        std::vector<int> row;
        row.reserve(seq.size());
        for (char c : seq) {
            if (c == '.' || (c >= 'a' && c <= 'z')) continue;
            bool unknown = false;
            row.push_back(amino_index(c, unknown));
            any_unknown |= unknown;
        }
        rows.push_back(std::move(row));
    }
    if (any_unknown)
        std::cerr << "[disrbm] warning: unknown residue characters mapped to "
                     "gap in "
                  << path << "\n";
    const std::size_t length = rows.front().size();
    for (const auto& row : rows)
        if (row.size() != length)
            throw IoError("ragged alignment after insertion removal: " + path);

    // keep columns with gap fraction below the cutoff (unweighted counts)
    Alignment alignment;
    alignment.original_length = Index(length);
    alignment.names = names;
    const int gap = kAminoStates - 1;
    for (std::size_t c = 0; c < length; ++c) {
        Index gaps = 0;
        for (const auto& row : rows) gaps += row[c] == gap;
        if (double(gaps) / double(rows.size()) < max_gap_fraction)
            alignment.kept_columns.push_back(Index(c));
    }
    if (alignment.kept_columns.empty())
        throw IoError("no columns survive gap filtering: " + path);

    alignment.sequences.resize(rows.size(), alignment.kept_columns.size());
    for (std::size_t b = 0; b < rows.size(); ++b) {
        bool all_gap = true;
        for (std::size_t k = 0; k < alignment.kept_columns.size(); ++k) {
            alignment.sequences(Index(b), Index(k)) =
                rows[b][std::size_t(alignment.kept_columns[k])];
            all_gap &= alignment.sequences(Index(b), Index(k)) == gap;
        }
        if (all_gap)
            std::cerr << "[disrbm] warning: sequence " << names[b]
                      << " is all gaps after filtering\n";
    }
    return alignment;
}

VectorXd sequence_weights(const Alignment& alignment, double similarity_cutoff) {
    const Index b_count = alignment.size();
    const Index length = alignment.length();
    if (b_count == 0) throw std::invalid_argument("sequence_weights: empty alignment");
    const double radius = similarity_cutoff * double(length);

    std::vector<int> neighbor_count(b_count, 0);
    parallel_for(b_count, [&](long b) {
        int count = 0;
        for (Index other = 0; other < b_count; ++other) {
            Index mismatches = 0;
            for (Index s = 0; s < length; ++s)
                mismatches += alignment.sequences(Index(b), s) !=
                              alignment.sequences(other, s);
            if (double(mismatches) < radius) ++count;  // self included
        }
        neighbor_count[std::size_t(b)] = count;
    });

    VectorXd weights(b_count);
    for (Index b = 0; b < b_count; ++b)
        weights[b] = 1.0 / double(neighbor_count[std::size_t(b)]);
    return weights;
}

VectorXd balance_class_weights(const VectorXd& weights, const VectorXi& labels) {
    if (weights.size() != labels.size())
        throw std::invalid_argument("balance_class_weights: size mismatch");
    const int n_classes = labels.maxCoeff() + 1;
    VectorXd class_total = VectorXd::Zero(n_classes);
    for (Index b = 0; b < labels.size(); ++b)
        class_total[labels[b]] += weights[b];
    for (int d = 0; d < n_classes; ++d)
        if (class_total[d] <= 0.0)
            throw std::invalid_argument("balance_class_weights: empty class");
    const double target = weights.sum() / double(n_classes);
    VectorXd out(weights.size());
    for (Index b = 0; b < labels.size(); ++b)
        out[b] = weights[b] * target / class_total[labels[b]];
    return out;
}

MatrixXd per_site_frequencies(const Alignment& alignment,
                              const VectorXd& weights) {
    if (weights.size() != alignment.size())
        throw std::invalid_argument("per_site_frequencies: weight size mismatch");
    const double total = weights.sum();
    MatrixXd freq = MatrixXd::Zero(alignment.length(), kAminoStates);
    for (Index b = 0; b < alignment.size(); ++b)
        for (Index s = 0; s < alignment.length(); ++s)
            freq(s, alignment.sequences(b, s)) += weights[b] / total;
    return freq;
}

LabeledDataset dataset_from_alignment(const Alignment& alignment,
                                      const VectorXi& labels,
                                      const VectorXd& weights) {
    LabeledDataset ds;
    ds.kind = UnitKind::OneHot;
    ds.n_states = kAminoStates;
    ds.categorical = alignment.sequences;
    ds.labels = labels;
    ds.sample_weights = weights;
    ds.validate();
    return ds;
}

LabeledDataset synthetic_gaussian_mixture(Index n_total,
                                          const std::vector<VectorXd>& means,
                                          const std::vector<MatrixXd>& covariances,
                                          Rng& rng) {
    if (means.empty() || means.size() != covariances.size())
        throw std::invalid_argument("synthetic_gaussian_mixture: bad class spec");
    const Index n_classes = Index(means.size());
    const Index dim = means.front().size();
    std::vector<MatrixXd> chol;
    for (const auto& cov : covariances) {
        if (cov.rows() != dim || cov.cols() != dim)
            throw std::invalid_argument("synthetic_gaussian_mixture: bad covariance");
        if (cov.cwiseAbs().maxCoeff() == 0.0) {
            chol.push_back(MatrixXd::Zero(dim, dim));
            continue;
        }
        Eigen::LLT<MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument(
                "synthetic_gaussian_mixture: covariance not SPD");
        chol.push_back(llt.matrixL());
    }

    LabeledDataset ds;
    ds.kind = UnitKind::Binary;  // real-valued rows; kind irrelevant downstream
    ds.configurations.resize(n_total, dim);
    ds.labels.resize(n_total);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Index i = 0; i < n_total; ++i) {
        const Index d = i % n_classes;  // balanced
        VectorXd z(dim);
        for (Index k = 0; k < dim; ++k) z[k] = gauss(rng);
        ds.configurations.row(i) = (means[d] + chol[d] * z).transpose();
        ds.labels[i] = int(d);
    }
    ds.provenance = "synthetic gaussian mixture";
    return ds;
}

VectorXi load_label_csv(const std::string& path,
                        const std::vector<std::string>& names) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label file: " + path);
    std::map<std::string, int> by_id;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw IoError("bad label row (want id,label): " + line);
        by_id[line.substr(0, comma)] = std::stoi(line.substr(comma + 1));
    }
    VectorXi labels(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        // match on the first whitespace-delimited token of the header
        const std::string id = names[i].substr(0, names[i].find_first_of(" \t"));
        const auto it = by_id.find(id);
        if (it == by_id.end())
            throw IoError("no label for sequence: " + id);
        labels[Index(i)] = it->second;
    }
    return labels;
}

}  // namespace disrbm
