// disrbm command-line tool: dataset generation, constraint building,
// constrained training, sampling/morphing, likelihood estimation, probes,
// closed-form analytics, and label-subsampling sweeps.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "disrbm/constraints.hpp"
#include "disrbm/data.hpp"
#include "disrbm/gaussian_spin.hpp"
#include "disrbm/io.hpp"
#include "disrbm/ising.hpp"
#include "disrbm/parallel.hpp"
#include "disrbm/partition.hpp"
#include "disrbm/probe.hpp"
#include "disrbm/rbm.hpp"
#include "disrbm/training.hpp"

using namespace disrbm;
using nlohmann::json;

namespace {

struct GlobalOptions {
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
    bool dry_run = false;

    std::uint64_t resolve_seed() {
        if (!seed_given) {
            seed = std::random_device{}();
            std::cout << "seed: " << seed << " (from OS entropy)\n";
        }
        return seed;
    }
};

std::vector<double> parse_doubles(const std::string& csv) {
    std::vector<double> values;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) values.push_back(std::stod(item));
    if (values.empty()) throw std::invalid_argument("empty numeric list");
    return values;
}

std::vector<Index> parse_indices(const std::string& csv) {
    std::vector<Index> values;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) values.push_back(std::stol(item));
    return values;
}

ClampMap parse_clamp(const std::string& spec) {
    ClampMap clamp;
    if (spec.empty()) return clamp;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("clamp entries must look like index=value");
        clamp.emplace_back(std::stol(item.substr(0, eq)),
                           std::stod(item.substr(eq + 1)));
    }
    return clamp;
}

// key=value config file, '#' comments; unknown keys rejected
void apply_config_file(const std::string& path, TrainConfig& config) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string()
                                          : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        if (key == "learning_rate") config.learning_rate = std::stod(value);
        else if (key == "batch_size") config.batch_size = std::stol(value);
        else if (key == "n_chains") config.n_chains = std::stol(value);
        else if (key == "n_updates") config.n_updates = std::stol(value);
        else if (key == "l2_weight") config.l2_weight = std::stod(value);
        else if (key == "penalty_weight") config.penalty_weight = std::stod(value);
        else if (key == "beta1") config.beta1 = std::stod(value);
        else if (key == "beta2") config.beta2 = std::stod(value);
        else if (key == "gibbs_rounds_per_update") config.gibbs_rounds_per_update = std::stoi(value);
        else if (key == "average_tail_fraction") config.average_tail_fraction = std::stod(value);
        else if (key == "centering") config.centering = value == "on" || value == "true" || value == "1";
        else if (key == "reset_check_interval") config.reset_check_interval = std::stol(value);
        else if (key == "enable_unit_reset") config.enable_unit_reset = value == "on" || value == "true" || value == "1";
        else if (key == "saturation_epsilon") config.saturation_epsilon = std::stod(value);
        else if (key == "field_clip") config.field_clip = std::stod(value);
        else if (key == "record_interval") config.record_interval = std::stol(value);
        else if (key == "seed") config.seed = std::stoull(value);
        else throw std::invalid_argument("unknown config key: " + key);
    }
}

MatrixXd random_starts(const RbmModel& model, Index n, Rng& rng) {
    MatrixXd logits = MatrixXd::Zero(n, model.n_visible);
    return sample_units_from_logits(model.visible_kind, model.visible_states,
                                    logits, rng);
}

// ---------------------------------------------------------------------------
// dataset ingestion: --data accepts the canonical DSET container or any of
// the raw inputs (DISN spin samples, IDX images, FASTA alignments), sniffed
// by magic bytes; sidecar flags supply what the raw formats lack
// ---------------------------------------------------------------------------

struct DataInputArgs {
    std::string path;
    std::string idx_labels;      // IDX label file
    std::string digit_filter;    // IDX digit subset, e.g. 0,1
    double threshold = 0.5;      // IDX binarization threshold
    std::string label_csv;       // FASTA sidecar id,label
    double similarity_cutoff = 0.2;  // FASTA reweighting radius
    bool balance_classes = false;    // FASTA per-class weight balancing

    void attach(CLI::App* cmd, bool required = true) {
        auto* opt = cmd->add_option("--data", path,
                                    "DSET | DISN | IDX images | FASTA alignment");
        if (required) opt->required();
        cmd->add_option("--idx-labels", idx_labels, "IDX label file");
        cmd->add_option("--digit-filter", digit_filter,
                        "digits to keep from IDX input, e.g. 0,1");
        cmd->add_option("--threshold", threshold, "IDX binarization threshold");
        cmd->add_option("--label-csv", label_csv,
                        "id,label sidecar for alignments");
        cmd->add_option("--similarity-cutoff", similarity_cutoff,
                        "alignment reweighting radius (fraction of length)");
        cmd->add_flag("--balance-classes", balance_classes,
                      "equalize per-class weight totals (alignments)");
    }
};

LabeledDataset load_input(const DataInputArgs& args) {
    std::ifstream probe_stream(args.path, std::ios::binary);
    if (!probe_stream) throw IoError("cannot open: " + args.path);
    char magic[4] = {0, 0, 0, 0};
    probe_stream.read(magic, 4);
    probe_stream.close();

    if (std::memcmp(magic, "DSET", 4) == 0) return load_dataset(args.path);
    if (std::memcmp(magic, "DISN", 4) == 0) {
        const IsingSampleFile file = load_ising_samples(args.path);
        LabeledDataset ds;
        ds.kind = UnitKind::Spin;
        ds.configurations = file.samples;
        ds.labels.resize(file.samples.rows());
        for (Index b = 0; b < file.samples.rows(); ++b)
            ds.labels[b] =
                magnetization_label(file.samples.row(b).transpose()) > 0 ? 1 : 0;
        ds.provenance = args.path;
        return ds;
    }
    // IDX image file: big-endian 0x00000803
    if (magic[0] == 0 && magic[1] == 0 && magic[2] == 8 && magic[3] == 3) {
        if (args.idx_labels.empty())
            throw std::invalid_argument("IDX input needs --idx-labels");
        std::set<int> digits;
        for (Index d : parse_indices(args.digit_filter)) digits.insert(int(d));
        return load_mnist_idx(args.path, args.idx_labels, digits,
                              args.threshold);
    }
    if (magic[0] == '>') {
        const Alignment alignment = load_alignment(args.path);
        VectorXi labels(alignment.size());
        labels.setZero();
        if (!args.label_csv.empty())
            labels = load_label_csv(args.label_csv, alignment.names);
        VectorXd weights = sequence_weights(alignment, args.similarity_cutoff);
        if (args.balance_classes && !args.label_csv.empty())
            weights = balance_class_weights(weights, labels);
        LabeledDataset ds =
            dataset_from_alignment(alignment, labels, weights);
        if (args.label_csv.empty()) ds.labels = VectorXi();
        ds.provenance = args.path;
        return ds;
    }
    throw IoError("unrecognized data format: " + args.path);
}

// ---------------------------------------------------------------------------

struct IsingGenArgs {
    int length = 16;
    std::string betas = "0.44";
    Index n_samples = 10000;
    Index burn_in = 1000;
    int thinning = 10;
    double w_star = -1.0;  // >= 0 switches to the |M|-penalized model
    std::string out_prefix = "ising";
    std::string observables_csv;
};

int run_ising_gen(GlobalOptions& global, const IsingGenArgs& args) {
    const std::vector<double> betas = parse_doubles(args.betas);
    if (args.length < 2) throw std::invalid_argument("--length must be >= 2");
    for (double beta : betas)
        if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
    if (global.dry_run) {
        std::cout << "ising-gen: L=" << args.length << ", " << betas.size()
                  << " betas, " << args.n_samples << " samples each\n";
        return 0;
    }
    const std::uint64_t seed = global.resolve_seed();

    std::vector<std::vector<double>> rows(betas.size());
    parallel_for(long(betas.size()), [&](long k) {
        Rng rng = make_stream(seed, std::uint64_t(k));
        const double beta = betas[std::size_t(k)];
        MatrixXd samples;
        if (args.w_star >= 0.0) {
            samples = effective_sampler({beta, args.w_star}, args.length,
                                        args.n_samples,
                                        {args.burn_in, args.thinning}, rng);
        } else {
            IsingLattice lattice = make_random_lattice(args.length, beta, rng);
            samples = hybrid_sampler(lattice, args.n_samples,
                                     {args.burn_in, args.thinning}, rng);
        }
        std::ostringstream name;
        name << args.out_prefix << "_beta" << beta << ".disn";
        save_ising_samples(name.str(), samples, args.length, beta);
        const IsingObservables obs = observables(samples, beta);
        rows[std::size_t(k)] = {beta, obs.magnetization, obs.heat_capacity,
                                obs.susceptibility};
        std::cout << name.str() << ": m=" << obs.magnetization
                  << " C=" << obs.heat_capacity << " chi=" << obs.susceptibility
                  << "\n";
    });
    if (!args.observables_csv.empty())
        write_csv(args.observables_csv, {"beta", "m", "heat_capacity", "chi"},
                  rows);
    return 0;
}

// ---------------------------------------------------------------------------

struct BuildConstraintsArgs {
    DataInputArgs data;
    std::string kind = "linear";  // linear | quadratic | both
    std::string released;
    bool mp = false;
    bool ising = false;
    double chi2 = 100.0;
    std::string out_path = "constraints.dcon";
    std::string text_out;
};

int run_build_constraints(GlobalOptions& global, const BuildConstraintsArgs& args) {
    if (args.kind != "linear" && args.kind != "quadratic" && args.kind != "both")
        throw std::invalid_argument("--kind must be linear, quadratic, or both");
    const LabeledDataset ds = load_input(args.data);
    if (!ds.has_labels())
        throw std::invalid_argument("constraint building needs labeled data");
    const std::vector<Index> released = parse_indices(args.released);
    if (global.dry_run) {
        std::cout << "build-constraints: " << ds.size() << " samples, kind="
                  << args.kind << ", " << released.size() << " released units\n";
        return 0;
    }

    const MatrixXd flat = ds.flat();
    const VectorXd weights = ds.sample_weights;
    const int n_classes = ds.labels.maxCoeff() + 1;

    // per-unit applicability is re-derived at train time from the released
    // list, once the hidden layer size is known; store directions + released
    ConstraintSet set;
    if (args.kind != "quadratic") {
        if (n_classes > 2) {
            const MulticlassDirections dirs =
                q1_multiclass(flat, ds.labels, weights);
            const std::vector<VectorXd> independent = dirs.independent();
            if (!released.empty() && released.size() != independent.size())
                throw std::invalid_argument(
                    "multiclass: need one released unit per independent direction");
            for (const auto& q : independent) {
                LinearConstraint c;
                c.direction = q;
                set.linear.push_back(std::move(c));
            }
        } else {
            LinearConstraint c;
            c.direction = q1_vector(flat, ds.labels, weights);
            set.linear.push_back(std::move(c));
        }
    }
    set.released = released;
    if (args.kind != "linear") {
        MatrixXd q2;
        if (args.ising) {
            const int side = int(std::lround(std::sqrt(double(flat.cols()))));
            if (Index(side) * side != flat.cols())
                throw std::invalid_argument("--ising-q2 needs square grids");
            q2 = ising_q2(flat, side);
        } else {
            q2 = q2_matrix(flat, ds.labels, weights);
        }
        QuadraticConstraint quad =
            args.mp ? mp_truncate(q2, ds.size(), args.chi2)
                    : QuadraticConstraint::from_dense(q2, args.chi2);
        if (quad.inert)
            std::cerr << "[disrbm] warning: quadratic constraint is inert "
                         "(no retained eigenvalues)\n";
        set.quadratic = std::move(quad);
    }

    save_constraints(args.out_path, set, file_digest(args.data.path));
    if (!args.text_out.empty()) export_constraints_text(args.text_out, set);
    std::cout << "wrote " << args.out_path << " (" << set.linear.size()
              << " linear direction(s)"
              << (set.quadratic ? ", quadratic rank " +
                                      std::to_string(set.quadratic->rank())
                                : std::string())
              << ")\n";
    return 0;
}

// re-derive per-unit applicability for the actual hidden layer size
ConstraintSet materialize(const ConstraintSet& stored, Index n_hidden) {
    const auto& released = stored.released;
    if (stored.linear.size() > 1 && released.size() == stored.linear.size()) {
        std::vector<VectorXd> directions;
        for (const auto& c : stored.linear) directions.push_back(c.direction);
        ConstraintSet set =
            ConstraintSet::multiclass(directions, released, n_hidden);
        set.quadratic = stored.quadratic;
        if (set.quadratic && !released.empty()) {
            set.quadratic->applies_to_all = false;
            set.quadratic->applies_to.clear();
            for (Index mu = 0; mu < n_hidden; ++mu)
                if (std::find(released.begin(), released.end(), mu) ==
                    released.end())
                    set.quadratic->applies_to.push_back(mu);
        }
        return set;
    }
    ConstraintSet set;
    if (!stored.linear.empty())
        set = ConstraintSet::single_linear(stored.linear.front().direction,
                                           released, n_hidden);
    set.released = released;
    set.quadratic = stored.quadratic;
    if (set.quadratic) {
        if (released.empty()) {
            set.quadratic->applies_to_all = true;
            set.quadratic->applies_to.clear();
        } else {
            set.quadratic->applies_to_all = false;
            set.quadratic->applies_to.clear();
            for (Index mu = 0; mu < n_hidden; ++mu)
                if (std::find(released.begin(), released.end(), mu) ==
                    released.end())
                    set.quadratic->applies_to.push_back(mu);
        }
    }
    return set;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    DataInputArgs data;
    std::string constraints_path;
    std::string config_path;
    Index n_hidden = 64;
    std::string hidden_kind = "binary";
    bool symmetric = false;
    std::string out_path = "model.drbm";
    std::string history_csv;
    double learning_rate = -1.0, l2 = -1.0, chi2 = -1.0;
    double average_tail = -1.0;
    long n_updates = -1, batch_size = -1, n_chains = -1, record_interval = -1;
    int enable_unit_reset = -1, gibbs_per_update = -1;
};

int run_train(GlobalOptions& global, const TrainArgs& args) {
    const LabeledDataset ds = load_input(args.data);
    TrainConfig config;
    if (!args.config_path.empty()) apply_config_file(args.config_path, config);
    if (args.learning_rate > 0.0) config.learning_rate = args.learning_rate;
    if (args.l2 >= 0.0) config.l2_weight = args.l2;
    if (args.chi2 >= 0.0) config.penalty_weight = args.chi2;
    if (args.n_updates >= 0) config.n_updates = args.n_updates;
    if (args.batch_size > 0) config.batch_size = args.batch_size;
    if (args.n_chains > 0) config.n_chains = args.n_chains;
    if (args.record_interval > 0) config.record_interval = args.record_interval;
    if (args.enable_unit_reset >= 0)
        config.enable_unit_reset = args.enable_unit_reset != 0;
    if (args.gibbs_per_update > 0)
        config.gibbs_rounds_per_update = args.gibbs_per_update;
    if (args.average_tail >= 0.0) config.average_tail_fraction = args.average_tail;
    if (global.seed_given) config.seed = global.seed;
    config.validate();

    ModelShape shape;
    shape.n_hidden = args.n_hidden;
    shape.visible_kind = ds.kind;
    shape.visible_states = ds.n_states;
    shape.hidden_kind = unit_kind_from_string(args.hidden_kind);
    shape.symmetric = args.symmetric;

    std::optional<ConstraintSet> constraints;
    std::uint64_t digest = 0;
    if (!args.constraints_path.empty()) {
        const auto [stored, stored_digest] =
            load_constraints(args.constraints_path);
        constraints = materialize(stored, shape.n_hidden);
        digest = file_digest(args.constraints_path);
        for (Index mu : constraints->released)
            if (mu >= shape.n_hidden)
                throw std::invalid_argument("released unit index exceeds --hidden");
    }
    if (global.dry_run) {
        std::cout << "train: " << ds.size() << " samples, N=" << ds.flat_units()
                  << ", M=" << shape.n_hidden << ", updates="
                  << config.n_updates << ", lr=" << config.learning_rate
                  << ", constraints="
                  << (constraints ? args.constraints_path : "none") << "\n";
        return 0;
    }

    const TrainResult result =
        train_from_data(ds.flat(), shape, constraints ? &*constraints : nullptr,
                        config, ds.sample_weights);
    CheckpointMeta meta;
    meta.train_iterations = std::uint64_t(config.n_updates);
    if (constraints) {
        meta.released_units = constraints->released;
        meta.constraint_digest = digest;
    }
    save_checkpoint(args.out_path, result.model, meta);
    if (!args.history_csv.empty())
        write_history_csv(args.history_csv, result.history);
    if (!result.history.empty())
        std::cout << "final pseudo-ll " << result.history.back().pseudo_ll
                  << ", max residual "
                  << result.history.back().max_linear_residual << "\n";
    std::cout << "wrote " << args.out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct SampleArgs {
    std::string checkpoint;
    Index n = 1000;
    int steps = 1000;
    std::string clamp;
    std::string out_path = "samples.dset";
    std::string free_energy_csv;
};

int run_sample(GlobalOptions& global, const SampleArgs& args) {
    const auto [model, meta] = load_checkpoint(args.checkpoint);
    const ClampMap clamp = parse_clamp(args.clamp);
    for (const auto& [idx, value] : clamp)
        if (idx < 0 || idx >= model.n_hidden)
            throw std::invalid_argument("clamp index out of range");
    if (args.steps < 1) throw std::invalid_argument("--steps must be >= 1");
    if (global.dry_run) {
        std::cout << "sample: " << args.n << " chains x " << args.steps
                  << " steps, " << clamp.size() << " clamped unit(s)\n";
        return 0;
    }
    Rng rng(global.resolve_seed());

    MatrixXd samples(args.n, model.n_visible);
    const MatrixXd starts = random_starts(model, args.n, rng);
    for (Index c = 0; c < args.n; ++c)
        samples.row(c) =
            gibbs_chain(model, starts.row(c).transpose(), args.steps, clamp, rng)
                .first.transpose();

    LabeledDataset out;
    out.kind = model.visible_kind;
    out.n_states = model.visible_states;
    if (model.visible_kind == UnitKind::OneHot) {
        out.categorical.resize(args.n, model.n_sites());
        for (Index c = 0; c < args.n; ++c)
            out.categorical.row(c) =
                onehot_indices(samples.row(c).transpose(), model.visible_states)
                    .transpose();
    } else {
        out.configurations = samples;
    }
    out.provenance = "sampled from " + args.checkpoint;
    save_dataset(args.out_path, out);

    if (!args.free_energy_csv.empty()) {
        const VectorXd f = free_energies(model, samples);
        std::vector<std::vector<double>> rows;
        for (Index c = 0; c < args.n; ++c) rows.push_back({double(c), f[c]});
        write_csv(args.free_energy_csv, {"chain", "free_energy"}, rows);
    }
    std::cout << "wrote " << args.out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct MorphArgs {
    std::string checkpoint;
    DataInputArgs data;
    long released_unit = -1;
    int flip_at = 500;
    int total_steps = 1000;
    int record_every = 10;
    Index n_chains = 1;
    std::string probe_path;
    std::string out_prefix = "morph";
};

int run_morph(GlobalOptions& global, const MorphArgs& args) {
    const auto [model, meta] = load_checkpoint(args.checkpoint);
    if (meta.released_units.empty())
        throw std::invalid_argument(
            "checkpoint records no released units; morphing needs one");
    const Index unit = args.released_unit >= 0 ? Index(args.released_unit)
                                               : meta.released_units.front();
    if (std::find(meta.released_units.begin(), meta.released_units.end(), unit) ==
        meta.released_units.end())
        throw std::invalid_argument("unit is not recorded as released");
    if (args.flip_at < 0 || args.flip_at >= args.total_steps)
        throw std::invalid_argument("--flip-at must lie inside --total-steps");
    if (args.record_every < 1 || args.record_every > args.total_steps)
        throw std::invalid_argument("--record-every out of range");

    const LabeledDataset seeds_ds = load_input(args.data);
    if (seeds_ds.flat_units() != model.n_visible)
        throw std::invalid_argument("seed data does not match the checkpoint");
    if (seeds_ds.size() < args.n_chains)
        throw std::invalid_argument("not enough seed configurations");
    if (global.dry_run) {
        std::cout << "morph: unit " << unit << ", flip at " << args.flip_at
                  << "/" << args.total_steps << ", record every "
                  << args.record_every << "\n";
        return 0;
    }
    Rng rng(global.resolve_seed());

    std::optional<ProbeClassifier> probe;
    if (!args.probe_path.empty()) probe = load_probe(args.probe_path);

    const MatrixXd seeds = seeds_ds.flat();
    std::vector<Eigen::RowVectorXd> frames;
    std::vector<std::vector<double>> rows;
    for (Index chain = 0; chain < args.n_chains; ++chain) {
        VectorXd v = seeds.row(chain).transpose();
        double clamp_value = 1.0;
        for (int step = 0; step < args.total_steps; ++step) {
            if (step == args.flip_at) clamp_value = 1.0 - clamp_value;
            v = gibbs_chain(model, v, 1, {{unit, clamp_value}}, rng).first;
            if ((step + 1) % args.record_every == 0) {
                frames.push_back(v.transpose());
                std::vector<double> row{double(chain), double(step + 1),
                                        free_energy(model, v), clamp_value};
                if (probe) {
                    const MatrixXd p = probe->predict(v.transpose());
                    row.push_back(p(0, p.cols() - 1));
                }
                rows.push_back(std::move(row));
            }
        }
    }
    LabeledDataset trajectory;
    trajectory.kind = model.visible_kind;
    trajectory.n_states = model.visible_states;
    if (model.visible_kind == UnitKind::OneHot) {
        trajectory.categorical.resize(Index(frames.size()), model.n_sites());
        for (std::size_t f = 0; f < frames.size(); ++f)
            trajectory.categorical.row(Index(f)) =
                onehot_indices(frames[f].transpose(), model.visible_states)
                    .transpose();
    } else {
        trajectory.configurations.resize(Index(frames.size()), model.n_visible);
        for (std::size_t f = 0; f < frames.size(); ++f)
            trajectory.configurations.row(Index(f)) = frames[f];
    }
    trajectory.provenance = "morph trajectory from " + args.checkpoint;
    save_dataset(args.out_prefix + "_frames.dset", trajectory);

    std::vector<std::string> header{"chain", "step", "free_energy", "clamp"};
    if (probe) header.push_back("probe_prob_last_class");
    write_csv(args.out_prefix + "_trace.csv", header, rows);
    std::cout << "wrote " << args.out_prefix << "_frames.dset and _trace.csv\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string checkpoints;
    std::string roles;
    DataInputArgs test_data;
    bool no_base_rate = false;
    Index n_betas = 10000;
    Index walkers = 100;
    int gibbs_per_beta = 1;
    std::string out_csv = "likelihoods.csv";
    std::string json_out;
    std::string walker_csv_prefix;
};

int run_evaluate_ll(GlobalOptions& global, const EvaluateArgs& args) {
    std::vector<std::string> paths;
    {
        std::stringstream ss(args.checkpoints);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) paths.push_back(item);
    }
    if (paths.empty()) throw std::invalid_argument("no checkpoints given");
    std::vector<std::string> roles;
    if (!args.roles.empty()) {
        std::stringstream ss(args.roles);
        std::string item;
        while (std::getline(ss, item, ',')) roles.push_back(item);
        if (roles.size() != paths.size())
            throw std::invalid_argument("--roles must match --checkpoints");
    }
    const LabeledDataset test = load_input(args.test_data);
    const MatrixXd flat = test.flat();
    if (global.dry_run) {
        std::cout << "evaluate-ll: " << paths.size() << " checkpoint(s), "
                  << args.n_betas << " betas x " << args.walkers << " walkers\n";
        return 0;
    }
    const std::uint64_t seed = global.resolve_seed();
    AnnealSchedule schedule =
        AnnealSchedule::uniform(args.n_betas, args.walkers, args.gibbs_per_beta);
    if (!args.no_base_rate)
        schedule.base_visible_fields =
            base_rate_fields(flat, test.kind, test.n_states);

    json report = json::array();
    std::vector<std::vector<double>> rows;
    std::vector<double> mid_ll(paths.size());
    for (std::size_t k = 0; k < paths.size(); ++k) {
        const auto [model, meta] = load_checkpoint(paths[k]);
        if (model.n_visible != flat.cols())
            throw std::invalid_argument("test data does not match " + paths[k]);
        Rng rng = make_stream(seed, k);
        const LogZEstimate lower = ais(model, schedule, rng);
        const LogZEstimate upper = raise_estimate(model, schedule, flat, rng);
        const double gap = upper.log_z - lower.log_z;
        const double mean_f = free_energies(model, flat).mean();
        const double ll_mid = mean_f - 0.5 * (lower.log_z + upper.log_z);
        mid_ll[k] = ll_mid;
        rows.push_back({double(k), lower.log_z, upper.log_z, gap, mean_f,
                        mean_f - upper.log_z, mean_f - lower.log_z, ll_mid});
        json entry{{"checkpoint", paths[k]},
                   {"log_z_ais", lower.log_z},
                   {"log_z_raise", upper.log_z},
                   {"gap", gap},
                   {"n_betas", args.n_betas},
                   {"n_walkers", args.walkers},
                   {"seed", seed},
                   {"mean_free_energy", mean_f},
                   {"log_likelihood_mid", ll_mid}};
        if (!roles.empty()) entry["role"] = roles[k];
        report.push_back(entry);
        std::cout << paths[k] << ": log Z in [" << lower.log_z << ", "
                  << upper.log_z << "], ll ~ " << ll_mid << "\n";
        if (!args.walker_csv_prefix.empty()) {
            std::vector<std::vector<double>> wrows;
            for (Index j = 0; j < lower.per_walker.size(); ++j)
                wrows.push_back({double(j), lower.per_walker[j],
                                 j < upper.per_walker.size()
                                     ? upper.per_walker[j]
                                     : std::nan("")});
            write_csv(args.walker_csv_prefix + "_" + std::to_string(k) + ".csv",
                      {"walker", "ais_log_z", "raise_log_z"}, wrows);
        }
    }
    write_csv(args.out_csv,
              {"checkpoint", "log_z_ais", "log_z_raise", "gap",
               "mean_free_energy", "ll_lower", "ll_upper", "ll_mid"},
              rows);

    // cost summary when the three roles are present
    if (!roles.empty()) {
        int unc = -1, constr = -1, rel = -1;
        for (std::size_t k = 0; k < roles.size(); ++k) {
            if (roles[k] == "unconstrained") unc = int(k);
            else if (roles[k] == "constrained") constr = int(k);
            else if (roles[k] == "released") rel = int(k);
        }
        if (unc >= 0 && constr >= 0 && rel >= 0) {
            const LikelihoodCosts costs = likelihood_costs(
                mid_ll[std::size_t(unc)], mid_ll[std::size_t(constr)],
                mid_ll[std::size_t(rel)], flat.cols());
            report.push_back(
                json{{"delta_partial_erasure", costs.partial_erasure},
                     {"delta_disentanglement", costs.disentanglement},
                     {"delta_partial_erasure_per_unit",
                      costs.partial_erasure_per_unit},
                     {"delta_disentanglement_per_unit",
                      costs.disentanglement_per_unit}});
            std::cout << "costs: erasure " << costs.partial_erasure
                      << " nats, disentanglement " << costs.disentanglement
                      << " nats\n";
        }
    }
    if (!args.json_out.empty()) {
        std::ofstream out(args.json_out);
        if (!out) throw IoError("cannot open " + args.json_out);
        out << report.dump(2) << "\n";
    }
    std::cout << "wrote " << args.out_csv << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct ProbeArgs {
    DataInputArgs data;
    std::string checkpoint;
    std::string subset = "all";
    bool full_grid = false;
    Index steps = 20000;
    std::string out_csv = "probe_report.csv";
    std::string save_best;
};

int run_probe(GlobalOptions& global, const ProbeArgs& args) {
    const LabeledDataset ds = load_input(args.data);
    if (!ds.has_labels()) throw std::invalid_argument("probe needs labels");
    UnitSubset subset = UnitSubset::All;
    if (args.subset == "constrained") subset = UnitSubset::Constrained;
    else if (args.subset == "released") subset = UnitSubset::Released;
    else if (args.subset != "all")
        throw std::invalid_argument("--subset must be all|constrained|released");
    if (global.dry_run) {
        std::cout << "probe: " << ds.size() << " samples, "
                  << probe_architectures(args.full_grid).size()
                  << " classifiers\n";
        return 0;
    }
    Rng rng(global.resolve_seed());

    MiBoundReport report;
    std::optional<RbmModel> model;
    std::vector<Index> released;
    if (!args.checkpoint.empty()) {
        auto [m, meta] = load_checkpoint(args.checkpoint);
        model = std::move(m);
        released = meta.released_units;
        if (subset != UnitSubset::All && released.empty())
            throw std::invalid_argument(
                "checkpoint records no released units for --subset");
        report = probe_sweep(*model, ds.flat(), ds.labels,
                             probe_architectures(args.full_grid), rng,
                             args.steps, subset, released);
    } else {
        report = probe_sweep_features(ds.flat(), ds.labels,
                                      probe_architectures(args.full_grid), rng,
                                      args.steps);
    }
    report.write_csv(args.out_csv);
    std::cout << "label entropy " << report.label_entropy_bits
              << " bits; best bound " << report.best_bound_bits << " bits\n";
    std::cout << "wrote " << args.out_csv << "\n";

    if (!args.save_best.empty()) {
        std::size_t best = 0;
        for (std::size_t k = 0; k < report.results.size(); ++k)
            if (report.results[k].mi_bound_bits >
                report.results[best].mi_bound_bits)
                best = k;
        const auto archs = probe_architectures(args.full_grid);
        const MatrixXd features =
            model ? hidden_inputs(*model, ds.flat()) : ds.flat();
        const ProbeClassifier probe =
            train_probe(features, ds.labels, archs[best], args.steps, rng);
        save_probe(args.save_best, probe);
        std::cout << "saved best probe (" << report.results[best].architecture
                  << ") to " << args.save_best << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct GsAnalyzeArgs {
    DataInputArgs data;
    Index m_hidden = 2;
    std::string out_csv = "gs_costs.csv";
    std::string interlacing_csv;
};

int run_gs_analyze(GlobalOptions& global, const GsAnalyzeArgs& args) {
    const LabeledDataset ds = load_input(args.data);
    if (!ds.has_labels()) throw std::invalid_argument("gs-analyze needs labels");
    if (global.dry_run) {
        std::cout << "gs-analyze: " << ds.size() << " samples, M="
                  << args.m_hidden << "\n";
        return 0;
    }
    const MatrixXd flat = ds.flat();
    const GsCostTable table = gs_cost_table(flat, ds.labels, args.m_hidden);
    write_csv(args.out_csv,
              {"l_unconstrained", "l_constrained", "l_released", "erasure_cost",
               "disentanglement_cost"},
              {{table.l_unconstrained, table.l_constrained, table.l_released,
                table.erasure_cost, table.disentanglement_cost}});

    const VectorXd sigma = estimate_sigma(flat);
    const VectorXd q = gs_class_direction(flat, ds.labels);
    const InterlacingReport interlacing = poincare_check(
        build_ctilde(flat, ds.labels, sigma), q.cwiseQuotient(sigma));
    std::cout << "interlacing " << (interlacing.holds ? "holds" : "VIOLATED")
              << " (max violation " << interlacing.max_violation << ")\n"
              << "L_unconstr=" << table.l_unconstrained
              << " L_rel=" << table.l_released
              << " L_constr=" << table.l_constrained << "\n";
    if (!args.interlacing_csv.empty()) {
        std::vector<std::vector<double>> rows;
        for (Index i = 0; i < interlacing.original.size(); ++i)
            rows.push_back({interlacing.original[i], interlacing.projected[i],
                            interlacing.gaps[i]});
        write_csv(args.interlacing_csv, {"original", "projected", "gap"}, rows);
    }
    std::cout << "wrote " << args.out_csv << "\n";
    return interlacing.holds ? 0 : 3;
}

// ---------------------------------------------------------------------------

struct OverlapArgs {
    DataInputArgs data;
    std::string b_grid = "20,78,784,7840";
    int draws = 100;
    std::string out_csv = "overlap_sweep.csv";
};

int run_overlap_sweep(GlobalOptions& global, const OverlapArgs& args) {
    const LabeledDataset ds = load_input(args.data);
    if (!ds.has_labels())
        throw std::invalid_argument("overlap-sweep needs labels");
    const std::vector<double> grid = parse_doubles(args.b_grid);
    if (global.dry_run) {
        std::cout << "overlap-sweep: " << grid.size() << " subsample sizes x "
                  << args.draws << " draws\n";
        return 0;
    }
    Rng rng(global.resolve_seed());
    const MatrixXd flat = ds.flat();
    const VectorXd q_full = q1_vector(flat, ds.labels, ds.sample_weights);

    // class statistics for the closed-form estimate
    VectorXd mean0 = VectorXd::Zero(flat.cols());
    VectorXd mean1 = VectorXd::Zero(flat.cols());
    Index n0 = 0, n1 = 0;
    for (Index b = 0; b < flat.rows(); ++b) {
        if (ds.labels[b] == 1) {
            mean1 += flat.row(b).transpose();
            ++n1;
        } else {
            mean0 += flat.row(b).transpose();
            ++n0;
        }
    }
    mean0 /= double(n0);
    mean1 /= double(n1);
    double trace0 = 0.0, trace1 = 0.0;
    for (Index b = 0; b < flat.rows(); ++b) {
        const VectorXd d =
            flat.row(b).transpose() - (ds.labels[b] == 1 ? mean1 : mean0);
        (ds.labels[b] == 1 ? trace1 : trace0) += d.squaredNorm();
    }
    trace0 /= double(n0);
    trace1 /= double(n1);
    const double separation_sq = (mean0 - mean1).squaredNorm();

    std::vector<std::vector<double>> rows;
    for (double b_total_d : grid) {
        const Index b_total = Index(b_total_d);
        double mean_overlap = 0.0;
        for (int d = 0; d < args.draws; ++d) {
            const auto [x, y] = subsample_labeled(flat, ds.labels, b_total, rng);
            mean_overlap += overlap(q_full, q1_vector(x, y));
        }
        mean_overlap /= double(args.draws);
        const double theory =
            overlap_theory({trace0, trace1}, separation_sq, b_total / 2);
        rows.push_back({double(b_total), double(b_total) / double(flat.cols()),
                        mean_overlap, theory});
        std::cout << "B=" << b_total << ": overlap " << mean_overlap
                  << " (theory " << theory << ")\n";
    }
    write_csv(args.out_csv, {"b_total", "b_over_n", "mean_overlap", "theory"},
              rows);
    std::cout << "wrote " << args.out_csv << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"disrbm: constrained training, sampling, and analysis of "
                 "bipartite energy models"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--seed", global.seed, "rng seed (default: OS entropy)")
        ->each([&global](const std::string&) { global.seed_given = true; });
    app.add_option("--threads", global.threads,
                   "worker thread bound (default: DISRBM_THREADS or all cores)");
    app.add_flag("--dry-run", global.dry_run,
                 "validate and print the resolved configuration, then exit");

    IsingGenArgs ising_args;
    auto* ising_cmd =
        app.add_subcommand("ising-gen", "sample spin grids and observables");
    ising_cmd->add_option("--length", ising_args.length, "grid side L");
    ising_cmd->add_option("--beta", ising_args.betas,
                          "inverse temperatures, comma separated");
    ising_cmd->add_option("--n-samples", ising_args.n_samples,
                          "samples per beta");
    ising_cmd->add_option("--burn-in", ising_args.burn_in, "burn-in iterations");
    ising_cmd->add_option("--thinning", ising_args.thinning, "record interval");
    ising_cmd->add_option("--wstar", ising_args.w_star,
                          "sample the |M|-penalized model with this strength");
    ising_cmd->add_option("--out", ising_args.out_prefix, "output file prefix");
    ising_cmd->add_option("--observables", ising_args.observables_csv,
                          "observables CSV path");

    BuildConstraintsArgs bc_args;
    auto* bc_cmd = app.add_subcommand("build-constraints",
                                      "derive label constraints from data");
    bc_args.data.attach(bc_cmd);
    bc_cmd->add_option("--kind", bc_args.kind, "linear | quadratic | both");
    bc_cmd->add_option("--released", bc_args.released,
                       "released hidden unit indices, comma separated");
    bc_cmd->add_flag("--mp-truncate", bc_args.mp,
                     "keep only eigenvalues above the Marchenko-Pastur edge");
    bc_cmd->add_flag("--ising-q2", bc_args.ising,
                     "use the |M|-weighted second-order matrix (spin grids)");
    bc_cmd->add_option("--chi2", bc_args.chi2, "quadratic penalty weight");
    bc_cmd->add_option("--out", bc_args.out_path, "output DCON path");
    bc_cmd->add_option("--text-out", bc_args.text_out, "text export path");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "maximum-likelihood training");
    train_args.data.attach(train_cmd);
    train_cmd->add_option("--constraints", train_args.constraints_path,
                          "DCON file");
    train_cmd->add_option("--config", train_args.config_path,
                          "key=value config file");
    train_cmd->add_option("--hidden", train_args.n_hidden, "hidden unit count");
    train_cmd->add_option("--hidden-kind", train_args.hidden_kind,
                          "binary | spin");
    train_cmd->add_flag("--symmetric", train_args.symmetric,
                        "spin model with fields frozen at zero");
    train_cmd->add_option("--out", train_args.out_path, "checkpoint path");
    train_cmd->add_option("--history", train_args.history_csv,
                          "history CSV path");
    train_cmd->add_option("--learning-rate", train_args.learning_rate,
                          "override: learning rate");
    train_cmd->add_option("--l2", train_args.l2, "override: L2 weight");
    train_cmd->add_option("--chi2", train_args.chi2,
                          "override: quadratic penalty weight");
    train_cmd->add_option("--n-updates", train_args.n_updates,
                          "override: update count");
    train_cmd->add_option("--batch-size", train_args.batch_size,
                          "override: minibatch size");
    train_cmd->add_option("--n-chains", train_args.n_chains,
                          "override: persistent chain count");
    train_cmd->add_option("--record-interval", train_args.record_interval,
                          "override: history interval");
    train_cmd->add_option("--enable-unit-reset", train_args.enable_unit_reset,
                          "override: stuck-unit recovery (0 or 1)");
    train_cmd->add_option("--gibbs-per-update", train_args.gibbs_per_update,
                          "override: chain refresh depth per update");
    train_cmd->add_option("--average-tail", train_args.average_tail,
                          "override: average parameters over this final "
                          "fraction of updates");

    SampleArgs sample_args;
    auto* sample_cmd = app.add_subcommand("sample", "draw Gibbs samples");
    sample_cmd->add_option("--checkpoint", sample_args.checkpoint, "DRBM file")
        ->required();
    sample_cmd->add_option("--n", sample_args.n, "number of chains");
    sample_cmd->add_option("--steps", sample_args.steps,
                           "Gibbs rounds per chain");
    sample_cmd->add_option("--clamp", sample_args.clamp,
                           "frozen hidden units, e.g. 0=1,3=0");
    sample_cmd->add_option("--out", sample_args.out_path, "output DSET");
    sample_cmd->add_option("--free-energy-csv", sample_args.free_energy_csv,
                           "per-chain free energy CSV");

    MorphArgs morph_args;
    auto* morph_cmd = app.add_subcommand(
        "morph", "flip a released unit mid-chain and record the trajectory");
    morph_cmd->add_option("--checkpoint", morph_args.checkpoint, "DRBM file")
        ->required();
    morph_args.data.attach(morph_cmd);
    morph_cmd->add_option("--released-unit", morph_args.released_unit,
                          "unit to drive (default: first recorded)");
    morph_cmd->add_option("--flip-at", morph_args.flip_at, "flip step");
    morph_cmd->add_option("--total-steps", morph_args.total_steps,
                          "chain length");
    morph_cmd->add_option("--record-every", morph_args.record_every,
                          "frame interval");
    morph_cmd->add_option("--n-chains", morph_args.n_chains, "seed rows to run");
    morph_cmd->add_option("--probe", morph_args.probe_path,
                          "DPRB classifier scoring each frame");
    morph_cmd->add_option("--out", morph_args.out_prefix, "output prefix");

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand(
        "evaluate-ll", "sandwich log Z and report likelihood costs");
    eval_cmd->add_option("--checkpoints", eval_args.checkpoints,
                         "DRBM paths, comma separated")
        ->required();
    eval_cmd->add_option("--roles", eval_args.roles,
                         "unconstrained,constrained,released role labels");
    eval_args.test_data.attach(eval_cmd, false);
    eval_cmd->get_option("--data")->required()->description("test data");
    eval_cmd->add_flag("--no-base-rate", eval_args.no_base_rate,
                       "anneal with the model's own visible fields instead of "
                       "the data base rates");
    eval_cmd->add_option("--n-betas", eval_args.n_betas,
                         "interpolating distributions");
    eval_cmd->add_option("--walkers", eval_args.walkers, "walker count");
    eval_cmd->add_option("--gibbs-per-beta", eval_args.gibbs_per_beta,
                         "Gibbs rounds per beta");
    eval_cmd->add_option("--out", eval_args.out_csv, "output CSV");
    eval_cmd->add_option("--json", eval_args.json_out, "JSON report path");
    eval_cmd->add_option("--walker-csv", eval_args.walker_csv_prefix,
                         "per-walker CSV prefix");

    ProbeArgs probe_args;
    auto* probe_cmd = app.add_subcommand(
        "probe", "train label probes and report information bounds");
    probe_args.data.attach(probe_cmd);
    probe_cmd->add_option("--checkpoint", probe_args.checkpoint,
                          "probe this model's hidden inputs instead of raw data");
    probe_cmd->add_option("--subset", probe_args.subset,
                          "all | constrained | released");
    probe_cmd->add_flag("--full-grid", probe_args.full_grid,
                        "train the full 36-classifier ladder");
    probe_cmd->add_option("--steps", probe_args.steps, "training step cap");
    probe_cmd->add_option("--out", probe_args.out_csv, "report CSV");
    probe_cmd->add_option("--save-best", probe_args.save_best,
                          "save the best classifier as DPRB");

    GsAnalyzeArgs gs_args;
    auto* gs_cmd = app.add_subcommand(
        "gs-analyze", "closed-form likelihood costs and interlacing check");
    gs_args.data.attach(gs_cmd);
    gs_cmd->add_option("--m-hidden", gs_args.m_hidden, "hidden unit count");
    gs_cmd->add_option("--out", gs_args.out_csv, "cost table CSV");
    gs_cmd->add_option("--interlacing-csv", gs_args.interlacing_csv,
                       "spectrum CSV");

    OverlapArgs overlap_args;
    auto* overlap_cmd = app.add_subcommand(
        "overlap-sweep", "direction stability under label subsampling");
    overlap_args.data.attach(overlap_cmd);
    overlap_cmd->add_option("--b-grid", overlap_args.b_grid,
                            "total subsample sizes, comma separated");
    overlap_cmd->add_option("--draws", overlap_args.draws, "draws per size");
    overlap_cmd->add_option("--out", overlap_args.out_csv, "output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (global.threads == 0)
        if (const char* env = std::getenv("DISRBM_THREADS"))
            global.threads = std::atoi(env);
    thread_limit() = global.threads;

    try {
        if (ising_cmd->parsed()) return run_ising_gen(global, ising_args);
        if (bc_cmd->parsed()) return run_build_constraints(global, bc_args);
        if (train_cmd->parsed()) return run_train(global, train_args);
        if (sample_cmd->parsed()) return run_sample(global, sample_args);
        if (morph_cmd->parsed()) return run_morph(global, morph_args);
        if (eval_cmd->parsed()) return run_evaluate_ll(global, eval_args);
        if (probe_cmd->parsed()) return run_probe(global, probe_args);
        if (gs_cmd->parsed()) return run_gs_analyze(global, gs_args);
        if (overlap_cmd->parsed()) return run_overlap_sweep(global, overlap_args);
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
