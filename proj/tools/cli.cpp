#include "cli.hpp"

#include "paradock/error.hpp"
#include "paradock/metrics.hpp"
#include "paradock/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

namespace paradock::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240607;

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string config;

    std::uint64_t seed_or(std::uint64_t fallback) const { return seed.value_or(fallback); }
};

class CommandError : public std::runtime_error {
public:
    CommandError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
    int code() const { return code_; }

private:
    int code_;
};

void require_file(const std::string& path, const std::string& what) {
    if (!fs::is_regular_file(path)) throw CommandError(kMissingFile, what + " not found: " + path);
}

void require_dir(const std::string& path, const std::string& what) {
    if (!fs::is_directory(path)) throw CommandError(kMissingFile, what + " not found: " + path);
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ShapeMismatch:
            return kMismatch;
        case ErrorCode::NoContacts:
            return kNoContacts;
        case ErrorCode::DegenerateHead:
            return kDegenerate;
        default:
            return kFailure;
    }
}

json matrix_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(row);
    }
    return out;
}

json vector_json(const Vec3& v) { return {v(0), v(1), v(2)}; }

json transform_json(const RigidTransform& t) {
    return {{"rotation", matrix_json(t.rotation)}, {"translation", vector_json(t.translation)}};
}

json quadric_json(const Quadric& q) { return {{"A", matrix_json(q.A)}, {"b", vector_json(q.b)}, {"c", q.c}}; }

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
}


struct DockArgs {
    std::string ligand, receptor, params, oracle, out, report;
    bool no_refine = false;
};

// Ligand chains take the next free letter when their id is used by the receptor.
std::map<char, char> rename_collisions(const ProteinStructure& ligand, const ProteinStructure& receptor) {
    std::string used;
    for (const auto& c : receptor.chains) used.push_back(c.id);
    for (const auto& c : ligand.chains) used.push_back(c.id);
    const std::string pool = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
    std::map<char, char> renames;
    for (const auto& c : ligand.chains) {
        const bool clash = std::any_of(receptor.chains.begin(), receptor.chains.end(),
                                       [&](const Chain& r) { return r.id == c.id; });
        if (!clash) continue;
        const auto free = std::find_if(pool.begin(), pool.end(), [&](char x) { return used.find(x) == std::string::npos; });
        if (free == pool.end()) throw Error(ErrorCode::ConfigError, "no free chain identifier");
        renames[c.id] = *free;
        used.push_back(*free);
    }
    return renames;
}

int cmd_dock(const DockArgs& a, const GlobalOptions&, std::ostream& out) {
    require_file(a.ligand, "ligand");
    require_file(a.receptor, "receptor");
    if (a.params.empty() == a.oracle.empty()) throw CommandError(kFailure, "give exactly one of --params or --oracle");
    if (!a.params.empty()) require_file(a.params, "checkpoint");
    if (!a.oracle.empty()) require_file(a.oracle, "truth file");

    const ProteinStructure ligand = read_pdb(a.ligand);
    const ProteinStructure receptor = read_pdb(a.receptor);
    DockOptions opt;
    opt.refine = !a.no_refine;

    DockPrediction pred;
    Points ligand_coords = ligand.ca_coords();
    std::string source;
    if (!a.params.empty()) {
        const Checkpoint ck = load_checkpoint(a.params);
        const GraphConfig& g = ck.params.config.graph;
        pred = dock(build_graph(ligand, g), build_graph(receptor, g), ck.params, opt).prediction;
        source = "network";
    } else {
        // Oracle interfaces replace the network heads; the truth file carries
        // full-precision unbound coordinates.
        const SyntheticComplex c = read_synthetic_truth(a.oracle);
        if (static_cast<std::size_t>(c.ligand_bound.rows()) != ligand.residue_count() ||
            static_cast<std::size_t>(c.receptor_bound.rows()) != receptor.residue_count()) {
            throw Error(ErrorCode::ShapeMismatch, "truth file does not match the input structures");
        }
        ligand_coords = c.ligand_unbound();
        pred = dock_from_heads<double>(oracle_heads(c, 3), centroid(ligand_coords), centroid(c.receptor_unbound()), opt);
        source = "oracle";
    }

    const std::map<char, char> renames = rename_collisions(ligand, receptor);
    ProteinStructure docked = ligand.with_coords(apply(pred.transform, ligand_coords));
    for (auto& chain : docked.chains) {
        const auto it = renames.find(chain.id);
        if (it == renames.end()) continue;
        chain.id = it->second;
        for (auto& r : chain.residues) r.chain = it->second;
    }
    ProteinStructure complex = receptor;
    for (auto& chain : docked.chains) complex.chains.push_back(std::move(chain));

    json renamed = json::object();
    for (const auto& [from, to] : renames) renamed[std::string(1, from)] = std::string(1, to);
    const InterfacePrediction& i = pred.interfaces;
    const json report = {
        {"schema_version", kSchemaVersion},
        {"command", "dock"},
        {"source", source},
        {"ligand", a.ligand},
        {"receptor", a.receptor},
        {"refine", opt.refine},
        {"theta", pred.theta},
        {"transform", transform_json(pred.transform)},
        {"interface",
         {{"standard", {{"lambda1", i.standard.lambda1}, {"lambda2", i.standard.lambda2}, {"beta", i.standard.beta}}},
          {"ligand_frame", transform_json(i.ligand_frame)},
          {"receptor_frame", transform_json(i.receptor_frame)},
          {"ligand_surface", quadric_json(i.ligand_surface)},
          {"receptor_surface", quadric_json(i.receptor_surface)}}},
        {"chain_renames", renamed},
    };

    const std::string pdb_text = format_pdb(complex);
    const std::string report_text = report.dump(2) + "\n";
    if (!a.out.empty()) write_text(a.out, pdb_text);
    if (!a.report.empty()) write_text(a.report, report_text);
    if (a.out.empty() && a.report.empty()) out << report_text;
    return kOk;
}


struct TrainArgs {
    std::string data, val, out, init, ablation;
    bool no_refine = false;
    int max_steps = -1;
    int epochs = -1;
};

int cmd_train(const TrainArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
    TrainConfig cfg;
    if (!g.config.empty()) {
        require_file(g.config, "config");
        std::ifstream in(g.config);
        try {
            cfg = json::parse(in).get<TrainConfig>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ConfigError, g.config + ": " + e.what());
        }
    }
    cfg.seed = g.seed_or(cfg.seed);
    if (!a.ablation.empty()) cfg.weights = ablation_weights(a.ablation);
    if (a.no_refine) cfg.refine = false;
    if (a.max_steps >= 0) cfg.max_steps = a.max_steps;
    if (a.epochs > 0) cfg.epochs = a.epochs;

    const LossWeights& w = cfg.weights;
    if (w.fit == 0.0 && w.overlap == 0.0 && (w.refinement == 0.0 || !cfg.refine) && w.dock == 0.0) {
        err << "warning: NoProgress: every loss weight is zero, nothing to train\n";
        return kOk;
    }

    require_dir(a.data, "data directory");
    const std::vector<ComplexRecord> train = load_dataset(a.data, cfg.model.graph);
    if (train.empty()) throw Error(ErrorCode::ConfigError, "no complexes in " + a.data);
    std::vector<ComplexRecord> val;
    if (!a.val.empty()) {
        require_dir(a.val, "validation directory");
        val = load_dataset(a.val, cfg.model.graph);
    }

    ModelParams start;
    if (!a.init.empty()) {
        require_file(a.init, "initial checkpoint");
        start = load_checkpoint(a.init).params;
        cfg.model = start.config;
    } else {
        start = init_params(cfg.model, cfg.seed);
    }

    const fs::path out_dir = a.out;
    fs::create_directories(out_dir);
    std::mt19937_64 probe_rng(cfg.seed + 1);
    std::vector<Augmentation> probe;
    for (std::size_t i = 0; i < train.size(); ++i) probe.push_back(draw_augmentation(probe_rng, cfg.translation_range));
    const double initial = mean_loss(start, train, probe, cfg.weights, cfg.refine);

    std::ofstream log(out_dir / "train_log.jsonl");
    if (!log) throw Error(ErrorCode::IoError, "cannot write the training log");
    const TrainResult r = train_loop(start, train, val, cfg, out_dir, &log);
    const double final_loss = mean_loss(r.params, train, probe, cfg.weights, cfg.refine);

    Checkpoint last;
    last.params = r.params;
    last.meta = {{"kind", "final"}, {"steps", r.steps}, {"train_config", cfg}};
    save_checkpoint((out_dir / "final.ckpt").string(), last);

    json checkpoints = json::array();
    for (const auto& p : r.checkpoints) checkpoints.push_back(p.filename().string());
    const json summary = {
        {"schema_version", kSchemaVersion},
        {"command", "train"},
        {"complexes", train.size()},
        {"steps", r.steps},
        {"epochs_run", r.epochs_run},
        {"early_stopped", r.early_stopped},
        {"best_epoch", r.best_epoch},
        {"best_val_loss", r.best_val_loss},
        {"initial_train_loss", initial},
        {"final_train_loss", final_loss},
        {"val_losses", r.val_losses},
        {"checkpoints", checkpoints},
        {"config", cfg},
    };
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
    out << summary.dump(2) << '\n';
    return kOk;
}


struct EvalArgs {
    std::vector<std::string> pred, ref;
    std::string split, report, csv;
};

struct Split {
    std::string ligand;
    std::string receptor;
};

Split parse_split(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == spec.size() ||
        spec.find(':', colon + 1) != std::string::npos) {
        throw CommandError(kFailure, "--split expects LIGAND_CHAINS:RECEPTOR_CHAINS, e.g. L:R or AB:C");
    }
    Split s{spec.substr(0, colon), spec.substr(colon + 1)};
    for (char c : s.ligand) {
        if (s.receptor.find(c) != std::string::npos) throw CommandError(kFailure, "chain on both sides of --split");
    }
    return s;
}

Points side_coords(const ProteinStructure& s, const std::string& chains, const std::string& file) {
    std::vector<Vec3> rows;
    for (char id : chains) {
        const auto it = std::find_if(s.chains.begin(), s.chains.end(), [&](const Chain& c) { return c.id == id; });
        if (it == s.chains.end()) throw Error(ErrorCode::ShapeMismatch, file + " has no chain " + std::string(1, id));
        for (const auto& r : it->residues) rows.push_back(r.ca);
    }
    Points p(static_cast<Eigen::Index>(rows.size()), 3);
    for (std::size_t i = 0; i < rows.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return p;
}

ComplexCoords complex_coords(const std::string& path, const Split& split) {
    const ProteinStructure s = read_pdb(path);
    return {side_coords(s, split.ligand, path), side_coords(s, split.receptor, path)};
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.pred.size() != a.ref.size()) throw CommandError(kFailure, "give one --ref per --pred");
    for (const auto& p : a.pred) require_file(p, "prediction");
    for (const auto& r : a.ref) require_file(r, "reference");
    const Split split = parse_split(a.split);

    std::vector<MetricReport> reports;
    json per_complex = json::array();
    for (std::size_t i = 0; i < a.pred.size(); ++i) {
        const ComplexCoords pred = complex_coords(a.pred[i], split);
        const ComplexCoords ref = complex_coords(a.ref[i], split);
        if (pred.ligand.rows() != ref.ligand.rows() || pred.receptor.rows() != ref.receptor.rows()) {
            throw Error(ErrorCode::ShapeMismatch, "residue counts differ between " + a.pred[i] + " and " + a.ref[i]);
        }
        reports.push_back(evaluate_complex(ref, pred));
        json entry = reports.back();
        entry["pred"] = a.pred[i];
        entry["ref"] = a.ref[i];
        per_complex.push_back(entry);
    }

    json report = {{"schema_version", kSchemaVersion}, {"command", "eval"}, {"complexes", per_complex}};
    using Field = double MetricReport::*;
    const std::vector<std::pair<std::string, Field>> fields = {{"crmsd", &MetricReport::crmsd},
                                                               {"irmsd", &MetricReport::irmsd},
                                                               {"dockq_lite", &MetricReport::dockq},
                                                               {"fnat", &MetricReport::fnat},
                                                               {"lrmsd", &MetricReport::lrmsd}};
    std::vector<Summary> summaries;
    json aggregate = json::object();
    for (const auto& [name, field] : fields) {
        std::vector<double> values;
        for (const auto& r : reports) values.push_back(r.*field);
        summaries.push_back(summarize(values));
        aggregate[name] = {{"median", summaries.back().median}, {"mean", summaries.back().mean}, {"std", summaries.back().std}};
    }
    report["aggregate"] = aggregate;

    if (!a.csv.empty()) {
        std::ostringstream csv;
        csv << std::setprecision(17) << "stat";
        for (const auto& f : fields) csv << ',' << f.first;
        csv << '\n';
        const std::vector<std::pair<std::string, double Summary::*>> stats = {
            {"median", &Summary::median}, {"mean", &Summary::mean}, {"std", &Summary::std}};
        for (const auto& [label, member] : stats) {
            csv << label;
            for (const auto& s : summaries) csv << ',' << s.*member;
            csv << '\n';
        }
        write_text(a.csv, csv.str());
    }
    const std::string text = report.dump(2) + "\n";
    if (!a.report.empty()) write_text(a.report, text);
    out << text;
    return kOk;
}


struct SynthArgs {
    int n = 1;
    std::string out;
    int ligand_size = SynthConfig{}.ligand_size;
    int receptor_size = SynthConfig{}.receptor_size;
};

int cmd_synth(const SynthArgs& a, const GlobalOptions& g, std::ostream& out) {
    if (a.n < 1) throw CommandError(kFailure, "--n must be at least 1");
    SynthConfig cfg;
    cfg.ligand_size = a.ligand_size;
    cfg.receptor_size = a.receptor_size;
    std::mt19937_64 rng(g.seed_or(kDefaultSeed));
    json names = json::array();
    for (int i = 0; i < a.n; ++i) {
        std::ostringstream name;
        name << "synth_" << std::setw(4) << std::setfill('0') << i;
        write_synthetic(a.out, make_synthetic(rng, cfg, name.str()));
        names.push_back(name.str());
    }
    out << json{{"schema_version", kSchemaVersion}, {"command", "synth"}, {"out", a.out}, {"complexes", names}}.dump(2)
        << '\n';
    return kOk;
}


int cmd_inspect(const std::string& path, std::ostream& out) {
    require_file(path, "checkpoint");
    const Checkpoint ck = load_checkpoint(path);
    json tensors = json::array();
    for (std::size_t i = 0; i < ck.params.names().size(); ++i) {
        tensors.push_back({{"name", ck.params.names()[i]}, {"shape", ck.params.tensors()[i].shape}});
    }
    json extra = json::array();
    for (const auto& [name, t] : ck.extra) extra.push_back({{"name", name}, {"shape", t.shape}});
    const json report = {{"schema_version", kSchemaVersion},
                         {"command", "inspect"},
                         {"config", ck.params.config},
                         {"meta", ck.meta},
                         {"parameters", ck.params.total_size()},
                         {"tensors", tensors},
                         {"extra", extra}};
    out << report.dump(2) << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Rigid protein docking with paraboloid interfaces", "paradock"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    std::uint64_t seed = kDefaultSeed;
    auto* seed_opt = app.add_option("--seed", seed, "random seed");
    app.add_option("--threads", global.threads, "worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
    app.add_option("--config", global.config, "JSON configuration file (train)");

    DockArgs dock_args;
    auto* dock_cmd = app.add_subcommand("dock", "dock a ligand onto a receptor");
    dock_cmd->add_option("--ligand", dock_args.ligand, "ligand PDB")->required();
    dock_cmd->add_option("--receptor", dock_args.receptor, "receptor PDB")->required();
    dock_cmd->add_option("--params", dock_args.params, "model checkpoint");
    dock_cmd->add_option("--oracle", dock_args.oracle, "synthetic truth JSON used in place of the network");
    dock_cmd->add_option("--out", dock_args.out, "docked complex PDB");
    dock_cmd->add_option("--report", dock_args.report, "JSON report");
    dock_cmd->add_flag("--no-refine", dock_args.no_refine, "skip the refinement rotation");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a model");
    train_cmd->add_option("--data", train_args.data, "directory of NAME_ligand.pdb / NAME_receptor.pdb pairs")->required();
    train_cmd->add_option("--val", train_args.val, "validation directory (default: the training set)");
    train_cmd->add_option("--out", train_args.out, "output directory")->required();
    train_cmd->add_option("--init", train_args.init, "start from this checkpoint");
    train_cmd->add_option("--ablation", train_args.ablation, "loss toggle: full, -fit, -overlap, -ref, ...");
    train_cmd->add_flag("--no-refine", train_args.no_refine, "train without the refinement rotation");
    train_cmd->add_option("--max-steps", train_args.max_steps, "stop after this many optimizer steps");
    train_cmd->add_option("--epochs", train_args.epochs, "number of epochs");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "score predicted complexes against references");
    eval_cmd->add_option("--pred", eval_args.pred, "predicted complex PDB (repeatable)")->required();
    eval_cmd->add_option("--ref", eval_args.ref, "reference complex PDB (repeatable)")->required();
    eval_cmd->add_option("--split", eval_args.split, "LIGAND_CHAINS:RECEPTOR_CHAINS")->required();
    eval_cmd->add_option("--report", eval_args.report, "JSON report");
    eval_cmd->add_option("--csv", eval_args.csv, "aggregate CSV (median, mean, std rows)");

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate synthetic complexes");
    synth_cmd->add_option("--n", synth_args.n, "number of complexes")->required();
    synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
    synth_cmd->add_option("--ligand-size", synth_args.ligand_size, "ligand residues");
    synth_cmd->add_option("--receptor-size", synth_args.receptor_size, "receptor residues");

    std::string inspect_path;
    auto* inspect_cmd = app.add_subcommand("inspect", "describe a checkpoint");
    inspect_cmd->add_option("--params", inspect_path, "checkpoint")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kFailure;
    }
    if (seed_opt->count() > 0) global.seed = seed;

    try {
        if (!global.config.empty() && !train_cmd->parsed()) {
            throw CommandError(kFailure, "--config is read by the train command only");
        }
        if (dock_cmd->parsed()) return cmd_dock(dock_args, global, out);
        if (train_cmd->parsed()) return cmd_train(train_args, global, out, err);
        if (eval_cmd->parsed()) return cmd_eval(eval_args, out);
        if (synth_cmd->parsed()) return cmd_synth(synth_args, global, out);
        if (inspect_cmd->parsed()) return cmd_inspect(inspect_path, out);
    } catch (const CommandError& e) {
        err << "error: " << e.what() << '\n';
        return e.code();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}

}  // namespace paradock::cli
