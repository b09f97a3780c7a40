#include "disrbm/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <optional>

namespace disrbm {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

// little-endian primitives
struct Writer {
    std::ofstream out;
    explicit Writer(const std::string& path)
        : out(path, std::ios::binary) {
        if (!out) throw IoError("cannot open for writing: " + path);
    }
    void magic(const char tag[4]) { out.write(tag, 4); }
    void u8(std::uint8_t x) { out.put(char(x)); }
    void u32(std::uint32_t x) {
        for (int i = 0; i < 4; ++i) out.put(char((x >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t x) {
        for (int i = 0; i < 8; ++i) out.put(char((x >> (8 * i)) & 0xff));
    }
    void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
    void vec(const VectorXd& v) {
        u64(std::uint64_t(v.size()));
        for (Index i = 0; i < v.size(); ++i) f64(v[i]);
    }
    void mat(const MatrixXd& m) {  // row-major payload
        u64(std::uint64_t(m.rows()));
        u64(std::uint64_t(m.cols()));
        for (Index r = 0; r < m.rows(); ++r)
            for (Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
};

struct Reader {
    std::ifstream in;
    std::string path;
    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw IoError("cannot open: " + p);
    }
    void magic(const char tag[4]) {
        char buf[4];
        if (!in.read(buf, 4) || std::memcmp(buf, tag, 4) != 0)
            throw IoError("bad magic in " + path + " (want " +
                          std::string(tag, 4) + ")");
    }
    std::uint8_t u8() {
        const int c = in.get();
        if (c == EOF) throw IoError("truncated file: " + path);
        return std::uint8_t(c);
    }
    std::uint32_t u32() {
        std::uint32_t x = 0;
        for (int i = 0; i < 4; ++i) x |= std::uint32_t(u8()) << (8 * i);
        return x;
    }
    std::uint64_t u64() {
        std::uint64_t x = 0;
        for (int i = 0; i < 8; ++i) x |= std::uint64_t(u8()) << (8 * i);
        return x;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    VectorXd vec() {
        const Index n = Index(u64());
        VectorXd v(n);
        for (Index i = 0; i < v.size(); ++i) v[i] = f64();
        return v;
    }
    MatrixXd mat() {
        const Index rows = Index(u64());
        const Index cols = Index(u64());
        MatrixXd m(rows, cols);
        for (Index r = 0; r < m.rows(); ++r)
            for (Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
        return m;
    }
    void expect_version() {
        const std::uint32_t v = u32();
        if (v != kFormatVersion)
            throw IoError("unsupported format version in " + path);
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const RbmModel& model,
                     const CheckpointMeta& meta) {
    Writer w(path);
    w.magic("DRBM");
    w.u32(kFormatVersion);
    w.u64(std::uint64_t(model.n_visible));
    w.u64(std::uint64_t(model.n_hidden));
    w.u8(std::uint8_t(model.visible_kind));
    w.u32(std::uint32_t(model.visible_states));
    w.u8(std::uint8_t(model.hidden_kind));
    w.u8(model.symmetric ? 1 : 0);
    w.mat(model.weights);
    w.vec(model.visible_fields);
    w.vec(model.hidden_fields);
    w.u64(meta.train_iterations);
    w.u32(std::uint32_t(meta.released_units.size()));
    for (Index mu : meta.released_units) w.u64(std::uint64_t(mu));
    w.u64(meta.constraint_digest);
}

std::pair<RbmModel, CheckpointMeta> load_checkpoint(const std::string& path) {
    Reader r(path);
    r.magic("DRBM");
    r.expect_version();
    RbmModel model;
    model.n_visible = Index(r.u64());
    model.n_hidden = Index(r.u64());
    model.visible_kind = UnitKind(r.u8());
    model.visible_states = int(r.u32());
    model.hidden_kind = UnitKind(r.u8());
    model.symmetric = r.u8() != 0;
    model.weights = r.mat();
    model.visible_fields = r.vec();
    model.hidden_fields = r.vec();
    model.validate();
    CheckpointMeta meta;
    meta.train_iterations = r.u64();
    const std::uint32_t n_released = r.u32();
    for (std::uint32_t k = 0; k < n_released; ++k)
        meta.released_units.push_back(Index(r.u64()));
    meta.constraint_digest = r.u64();
    return {std::move(model), std::move(meta)};
}

void save_constraints(const std::string& path, const ConstraintSet& constraints,
                      std::uint64_t dataset_digest) {
    Writer w(path);
    w.magic("DCON");
    w.u32(kFormatVersion);
    w.u64(dataset_digest);
    w.u32(std::uint32_t(constraints.linear.size()));
    for (const auto& c : constraints.linear) {
        w.vec(c.direction);
        w.u8(c.applies_to_all ? 1 : 0);
        w.u32(std::uint32_t(c.applies_to.size()));
        for (Index mu : c.applies_to) w.u64(std::uint64_t(mu));
    }
    w.u8(constraints.quadratic ? 1 : 0);
    if (constraints.quadratic) {
        const auto& q = *constraints.quadratic;
        w.f64(q.penalty_weight);
        w.f64(q.original_scale);
        w.u8(q.inert ? 1 : 0);
        w.vec(q.eigenvalues);
        w.mat(q.eigenvectors);
        w.u8(q.applies_to_all ? 1 : 0);
        w.u32(std::uint32_t(q.applies_to.size()));
        for (Index mu : q.applies_to) w.u64(std::uint64_t(mu));
    }
    w.u32(std::uint32_t(constraints.released.size()));
    for (Index mu : constraints.released) w.u64(std::uint64_t(mu));
}

std::pair<ConstraintSet, std::uint64_t> load_constraints(const std::string& path) {
    Reader r(path);
    r.magic("DCON");
    r.expect_version();
    const std::uint64_t digest = r.u64();
    ConstraintSet set;
    const std::uint32_t n_linear = r.u32();
    for (std::uint32_t k = 0; k < n_linear; ++k) {
        LinearConstraint c;
        c.direction = r.vec();
        c.applies_to_all = r.u8() != 0;
        const std::uint32_t n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i)
            c.applies_to.push_back(Index(r.u64()));
        set.linear.push_back(std::move(c));
    }
    if (r.u8()) {
        QuadraticConstraint q;
        q.penalty_weight = r.f64();
        q.original_scale = r.f64();
        q.inert = r.u8() != 0;
        q.eigenvalues = r.vec();
        q.eigenvectors = r.mat();
        q.applies_to_all = r.u8() != 0;
        const std::uint32_t n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i)
            q.applies_to.push_back(Index(r.u64()));
        set.quadratic = std::move(q);
    }
    const std::uint32_t n_released = r.u32();
    for (std::uint32_t k = 0; k < n_released; ++k)
        set.released.push_back(Index(r.u64()));
    return {std::move(set), digest};
}

void export_constraints_text(const std::string& path,
                             const ConstraintSet& constraints) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.precision(17);
    for (const auto& c : constraints.linear) {
        for (Index i = 0; i < c.direction.size(); ++i) {
            if (i) out << ' ';
            out << c.direction[i];
        }
        out << '\n';
    }
}

void save_dataset(const std::string& path, const LabeledDataset& dataset) {
    dataset.validate();
    Writer w(path);
    w.magic("DSET");
    w.u32(kFormatVersion);
    w.u8(std::uint8_t(dataset.kind));
    w.u32(std::uint32_t(dataset.n_states));
    w.u64(std::uint64_t(dataset.size()));
    w.u64(std::uint64_t(dataset.n_sites()));
    w.u8(dataset.has_labels() ? 1 : 0);
    w.u8(dataset.sample_weights.size() > 0 ? 1 : 0);
    if (dataset.kind == UnitKind::OneHot) {
        for (Index b = 0; b < dataset.categorical.rows(); ++b)
            for (Index s = 0; s < dataset.categorical.cols(); ++s)
                w.u32(std::uint32_t(dataset.categorical(b, s)));
    } else {
        for (Index b = 0; b < dataset.configurations.rows(); ++b)
            for (Index s = 0; s < dataset.configurations.cols(); ++s)
                w.f64(dataset.configurations(b, s));
    }
    if (dataset.has_labels())
        for (Index b = 0; b < dataset.labels.size(); ++b)
            w.u32(std::uint32_t(dataset.labels[b]));
    if (dataset.sample_weights.size() > 0)
        for (Index b = 0; b < dataset.sample_weights.size(); ++b)
            w.f64(dataset.sample_weights[b]);
}

LabeledDataset load_dataset(const std::string& path) {
    Reader r(path);
    r.magic("DSET");
    r.expect_version();
    LabeledDataset ds;
    ds.kind = UnitKind(r.u8());
    ds.n_states = int(r.u32());
    const Index n = Index(r.u64());
    const Index sites = Index(r.u64());
    const bool has_labels = r.u8() != 0;
    const bool has_weights = r.u8() != 0;
    if (ds.kind == UnitKind::OneHot) {
        ds.categorical.resize(n, sites);
        for (Index b = 0; b < n; ++b)
            for (Index s = 0; s < sites; ++s) ds.categorical(b, s) = int(r.u32());
    } else {
        ds.configurations.resize(n, sites);
        for (Index b = 0; b < n; ++b)
            for (Index s = 0; s < sites; ++s) ds.configurations(b, s) = r.f64();
    }
    if (has_labels) {
        ds.labels.resize(n);
        for (Index b = 0; b < n; ++b) ds.labels[b] = int(r.u32());
    }
    if (has_weights) {
        ds.sample_weights.resize(n);
        for (Index b = 0; b < n; ++b) ds.sample_weights[b] = r.f64();
    }
    ds.provenance = path;
    ds.validate();
    return ds;
}

void save_ising_samples(const std::string& path, const MatrixXd& samples,
                        int l_side, double beta) {
    if (samples.cols() != Index(l_side) * l_side)
        throw std::invalid_argument("save_ising_samples: width != L*L");
    Writer w(path);
    w.magic("DISN");
    w.u32(kFormatVersion);
    w.u32(std::uint32_t(l_side));
    w.f64(beta);
    w.u64(std::uint64_t(samples.rows()));
    std::uint8_t byte = 0;
    int fill = 0;
    for (Index b = 0; b < samples.rows(); ++b)
        for (Index i = 0; i < samples.cols(); ++i) {
            byte |= std::uint8_t(samples(b, i) > 0.0 ? 1 : 0) << fill;
            if (++fill == 8) {
                w.u8(byte);
                byte = 0;
                fill = 0;
            }
        }
    if (fill > 0) w.u8(byte);
}

IsingSampleFile load_ising_samples(const std::string& path) {
    Reader r(path);
    r.magic("DISN");
    r.expect_version();
    IsingSampleFile file;
    file.l_side = int(r.u32());
    file.beta = r.f64();
    const Index n = Index(r.u64());
    const Index n_sites = Index(file.l_side) * file.l_side;
    file.samples.resize(n, n_sites);
    std::uint8_t byte = 0;
    int avail = 0;
    for (Index b = 0; b < n; ++b)
        for (Index i = 0; i < n_sites; ++i) {
            if (avail == 0) {
                byte = r.u8();
                avail = 8;
            }
            file.samples(b, i) = (byte & 1) ? 1.0 : -1.0;
            byte >>= 1;
            --avail;
        }
    return file;
}

void save_probe(const std::string& path, const ProbeClassifier& probe) {
    Writer w(path);
    w.magic("DPRB");
    w.u32(kFormatVersion);
    w.u32(std::uint32_t(probe.weights.size()));
    for (std::size_t l = 0; l < probe.weights.size(); ++l) {
        w.mat(probe.weights[l]);
        w.vec(probe.biases[l]);
    }
}

ProbeClassifier load_probe(const std::string& path) {
    Reader r(path);
    r.magic("DPRB");
    r.expect_version();
    ProbeClassifier probe;
    const std::uint32_t n_layers = r.u32();
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        probe.weights.push_back(r.mat());
        probe.biases.push_back(r.vec());
    }
    if (probe.weights.empty()) throw IoError("empty probe file: " + path);
    return probe;
}

std::uint64_t bytes_digest(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const std::uint8_t*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= std::uint8_t(buf[i]);
            hash *= 0x100000001b3ULL;
        }
        if (got < std::streamsize(sizeof buf)) break;
    }
    return hash;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.precision(12);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
}

}  // namespace disrbm
