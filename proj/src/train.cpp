#include "paradock/train.hpp"

#include "paradock/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace paradock {

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"model", c.model},
                       {"learning_rate", c.learning_rate},
                       {"weights", c.weights},
                       {"refine", c.refine},
                       {"seed", c.seed},
                       {"epochs", c.epochs},
                       {"max_steps", c.max_steps},
                       {"batch_size", c.batch_size},
                       {"patience", c.patience},
                       {"top_k_checkpoints", c.top_k_checkpoints},
                       {"translation_range", c.translation_range},
                       {"clip_norm", c.clip_norm}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    const TrainConfig d;
    c.model = j.contains("model") ? j.at("model").get<ModelConfig>() : d.model;
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.weights = j.contains("weights") ? j.at("weights").get<LossWeights>() : d.weights;
    c.refine = j.value("refine", d.refine);
    c.seed = j.value("seed", d.seed);
    c.epochs = j.value("epochs", d.epochs);
    c.max_steps = j.value("max_steps", d.max_steps);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.patience = j.value("patience", d.patience);
    c.top_k_checkpoints = j.value("top_k_checkpoints", d.top_k_checkpoints);
    c.translation_range = j.value("translation_range", d.translation_range);
    c.clip_norm = j.value("clip_norm", d.clip_norm);
    c.model.validate();
    if (!(c.learning_rate > 0.0)) throw Error(ErrorCode::ConfigError, "learning_rate must be positive");
    if (c.epochs < 1 || c.batch_size < 1 || c.patience < 1 || c.top_k_checkpoints < 1 || c.max_steps < 0) {
        throw Error(ErrorCode::ConfigError, "epochs, batch_size, patience and top_k_checkpoints must be positive");
    }
    if (c.translation_range < 0.0 || !(c.clip_norm > 0.0)) {
        throw Error(ErrorCode::ConfigError, "translation_range must be >= 0 and clip_norm > 0");
    }
}

ComplexRecord make_record(std::string name, const ProteinStructure& ligand_bound, const ProteinStructure& receptor,
                          const GraphConfig& cfg) {
    ComplexRecord r;
    r.name = std::move(name);
    r.ligand = build_graph(ligand_bound, cfg);
    r.receptor = build_graph(receptor, cfg);
    try {
        r.pockets = extract_pockets(r.ligand.coords, r.receptor.coords);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoContacts) throw;
    }
    return r;
}

ComplexRecord record_from_synthetic(const SyntheticComplex& c, const GraphConfig& cfg) {
    const ProteinStructure lig = c.ligand_structure();
    const ProteinStructure docked = lig.with_coords(apply(c.receptor_motion, c.ligand_bound));
    return make_record(c.name, docked, c.receptor_structure(), cfg);
}

std::vector<ComplexRecord> load_dataset(const std::filesystem::path& dir, const GraphConfig& cfg) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
    const std::string suffix = "_ligand.pdb";
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string file = entry.path().filename().string();
        if (file.size() > suffix.size() && file.compare(file.size() - suffix.size(), suffix.size(), suffix) == 0) {
            names.push_back(file.substr(0, file.size() - suffix.size()));
        }
    }
    std::sort(names.begin(), names.end());
    std::vector<ComplexRecord> out;
    for (const auto& name : names) {
        const fs::path rec_path = dir / (name + "_receptor.pdb");
        if (!fs::exists(rec_path)) throw Error(ErrorCode::IoError, "missing " + rec_path.string());
        ProteinStructure lig = read_pdb(dir / (name + suffix));
        ProteinStructure rec = read_pdb(rec_path);
        const fs::path truth = dir / (name + "_truth.json");
        if (fs::exists(truth)) {
            const SyntheticComplex c = read_synthetic_truth(truth);
            if (static_cast<std::size_t>(c.ligand_bound.rows()) != lig.residue_count() ||
                static_cast<std::size_t>(c.receptor_bound.rows()) != rec.residue_count()) {
                throw Error(ErrorCode::ShapeMismatch, "truth file does not match the PDB pair for " + name);
            }
            lig = lig.with_coords(apply(c.receptor_motion, c.ligand_bound));
            rec = rec.with_coords(c.receptor_unbound());
        }
        out.push_back(make_record(name, lig, rec, cfg));
    }
    return out;
}

Augmentation draw_augmentation(std::mt19937_64& rng, double translation_range) {
    Augmentation a;
    a.rotation = random_rotation(rng);
    std::uniform_real_distribution<double> u(-translation_range, translation_range);
    a.translation = Vec3(u(rng), u(rng), u(rng));
    return a;
}

TrainingExample augment(const ComplexRecord& rec, const Augmentation& aug) {
    RigidTransform t;
    t.rotation = aug.rotation;
    t.translation = aug.translation;
    TrainingExample ex;
    ex.id = rec.name;
    ex.ligand = moved(rec.ligand, t);
    ex.receptor = rec.receptor;
    ex.sample.ligand = ex.ligand.coords;
    ex.sample.receptor = rec.receptor.coords;
    if (rec.pockets.size() > 0) {
        ex.sample.ligand_pockets = track_pockets(rec.pockets, t, Side::Ligand).ligand_midpoints;
        ex.sample.receptor_pockets = rec.pockets.receptor_midpoints;
    }
    ex.sample.q_gt = aug.rotation;
    ex.sample.t_gt = aug.translation;
    return ex;
}

GradientSet GradientSet::zeros_like(const ModelParams& p) {
    GradientSet g;
    for (const auto& t : p.tensors()) g.values.emplace_back(t.size(), 0.0);
    return g;
}

double GradientSet::norm() const {
    double s = 0.0;
    for (const auto& v : values)
        for (double x : v) s += x * x;
    return std::sqrt(s);
}

void GradientSet::scale(double factor) {
    for (auto& v : values)
        for (double& x : v) x *= factor;
}

void GradientSet::add(const GradientSet& other) {
    if (other.values.size() != values.size()) throw Error(ErrorCode::ShapeMismatch, "gradient sets differ");
    for (std::size_t i = 0; i < values.size(); ++i)
        for (std::size_t k = 0; k < values[i].size(); ++k) values[i][k] += other.values[i][k];
}

namespace {

DockOptions training_dock_options(bool refine) {
    DockOptions o;
    o.refine = refine;
    o.policy = DegeneracyPolicy::Regularize;
    return o;
}

template <typename S>
LossTermsT<S> example_terms(const BoundParams<S>& p, const TrainingExample& ex, const LossWeights& w, bool refine,
                            const EvalOptions& opt, std::size_t index) {
    ForwardOptions fwd;
    fwd.training = opt.training;
    fwd.rng = opt.rng;
    const HeadOutputsT<S> heads = run_heads<S>(ex.ligand, ex.receptor, p, fwd);
    for (const auto* m : {&heads.ligand_F, &heads.receptor_F, &heads.ligand_E, &heads.receptor_E}) {
        for (Eigen::Index i = 0; i < m->size(); ++i) {
            if (!std::isfinite(static_cast<double>(ad::value(m->data()[i])))) {
                throw Error(ErrorCode::NonFiniteLoss, "non-finite network output on sample " + ex.id);
            }
        }
    }
    const DockPredictionT<S> pred =
        dock_from_heads<S>(heads, centroid(ex.ligand.coords), centroid(ex.receptor.coords), training_dock_options(refine));
    std::optional<Eigen::Matrix2d> target;
    if (opt.fixed_targets != nullptr) target = opt.fixed_targets->at(index);
    return loss_terms<S>(pred, ex.sample, w, target);
}

void accumulate(LossReport& sum, const LossReport& r) {
    sum.fit += r.fit;
    sum.overlap += r.overlap;
    sum.refinement += r.refinement;
    sum.dock += r.dock;
    sum.total += r.total;
    sum.refinement_skipped += r.refinement_skipped;
    sum.no_contacts += r.no_contacts;
}

void check_finite(const LossReport& r, const std::string& id) {
    if (!std::isfinite(r.total) || !std::isfinite(r.fit) || !std::isfinite(r.overlap) ||
        !std::isfinite(r.refinement) || !std::isfinite(r.dock)) {
        throw Error(ErrorCode::NonFiniteLoss, "non-finite loss on sample " + id);
    }
}

// The refinement term only supervises the angle, so it is dropped with it.
LossWeights effective_weights(LossWeights w, bool refine) {
    if (!refine) w.refinement = 0.0;
    return w;
}

void check_batch(const std::vector<TrainingExample>& batch, const EvalOptions& opt) {
    if (batch.empty()) throw Error(ErrorCode::ConfigError, "empty batch");
    if (opt.training && opt.rng == nullptr) throw Error(ErrorCode::ConfigError, "training evaluation needs an rng");
    if (opt.fixed_targets != nullptr && opt.fixed_targets->size() != batch.size()) {
        throw Error(ErrorCode::ShapeMismatch, "one refinement target per example");
    }
}

}  // namespace

LossResult evaluate_loss(const ModelParams& params, const std::vector<TrainingExample>& batch,
                         const LossWeights& requested, bool refine, const EvalOptions& opt) {
    check_batch(batch, opt);
    const LossWeights weights = effective_weights(requested, refine);
    const BoundParams<double> p(params);
    LossResult out;
    out.report.weights = weights;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const LossReport r = make_report<double>(example_terms<double>(p, batch[i], weights, refine, opt, i), weights);
        check_finite(r, batch[i].id);
        accumulate(out.report, r);
    }
    return out;
}

LossResult loss_gradient(const ModelParams& params, const std::vector<TrainingExample>& batch,
                         const LossWeights& requested, bool refine, const EvalOptions& opt) {
    check_batch(batch, opt);
    const LossWeights weights = effective_weights(requested, refine);
    LossResult out;
    out.report.weights = weights;
    out.gradient = GradientSet::zeros_like(params);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        ad::Tape tape;
        ad::TapeScope scope(tape);
        const BoundParams<ad::Var> p(params);
        const LossTermsT<ad::Var> terms = example_terms<ad::Var>(p, batch[i], weights, refine, opt, i);
        const ad::Var total = weighted_total<ad::Var>(terms, weights);
        const LossReport r = make_report<ad::Var>(terms, weights);
        check_finite(r, batch[i].id);
        accumulate(out.report, r);
        if (total.is_constant()) continue;
        const std::vector<double> adj = tape.adjoints(total.id());
        const auto& ids = p.leaf_ids();
        for (std::size_t n = 0; n < ids.size(); ++n) {
            auto& g = out.gradient.values[n];
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += adj[static_cast<std::size_t>(ids[n]) + k];
        }
    }
    for (const auto& v : out.gradient.values) {
        for (double x : v) {
            if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteLoss, "non-finite gradient");
        }
    }
    return out;
}

std::vector<std::optional<Eigen::Matrix2d>> refinement_targets(const ModelParams& params,
                                                                const std::vector<TrainingExample>& batch,
                                                                bool refine) {
    const BoundParams<double> p(params);
    std::vector<std::optional<Eigen::Matrix2d>> out;
    for (const auto& ex : batch) {
        const HeadOutputs heads = run_heads<double>(ex.ligand, ex.receptor, p);
        const DockPrediction pred = dock_from_heads<double>(heads, centroid(ex.ligand.coords),
                                                            centroid(ex.receptor.coords), training_dock_options(refine));
        if (ex.sample.ligand_pockets.rows() == 0) {
            out.emplace_back(std::nullopt);
            continue;
        }
        out.push_back(refinement_target(ex.sample.ligand_pockets, ex.sample.receptor_pockets,
                                        pred.interfaces.ligand_frame, pred.interfaces.receptor_frame));
    }
    return out;
}

double clip_gradient(GradientSet& g, double max_norm) {
    const double n = g.norm();
    if (n > max_norm) g.scale(max_norm / n);
    return n;
}

Adam::Adam(const ModelParams& p) {
    for (const auto& t : p.tensors()) {
        m_.emplace_back(t.size(), 0.0);
        v_.emplace_back(t.size(), 0.0);
    }
}

void Adam::step(ModelParams& p, const GradientSet& g, double lr) {
    if (g.values.size() != m_.size()) throw Error(ErrorCode::ShapeMismatch, "gradient does not match optimizer");
    ++step_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
    auto& tensors = p.tensors();
    for (std::size_t n = 0; n < tensors.size(); ++n) {
        auto& data = tensors[n].data;
        for (std::size_t k = 0; k < data.size(); ++k) {
            const double gk = g.values[n][k];
            m_[n][k] = kBeta1 * m_[n][k] + (1.0 - kBeta1) * gk;
            v_[n][k] = kBeta2 * v_[n][k] + (1.0 - kBeta2) * gk * gk;
            const double mhat = m_[n][k] / c1;
            const double vhat = v_[n][k] / c2;
            data[k] -= lr * mhat / (std::sqrt(vhat) + kEps);
        }
    }
}

std::vector<std::pair<std::string, Tensor>> Adam::state(const ModelParams& p) const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t n = 0; n < p.names().size(); ++n) {
        out.emplace_back("adam.m/" + p.names()[n], Tensor{p.tensors()[n].shape, m_[n]});
        out.emplace_back("adam.v/" + p.names()[n], Tensor{p.tensors()[n].shape, v_[n]});
    }
    out.emplace_back("adam.step", Tensor{{1}, {static_cast<double>(step_)}});
    return out;
}

Adam Adam::from_state(const ModelParams& p, const std::vector<std::pair<std::string, Tensor>>& extra) {
    Adam a(p);
    for (const auto& [name, t] : extra) {
        if (name == "adam.step") {
            a.step_ = static_cast<long>(t.data.at(0));
            continue;
        }
        const bool is_m = name.rfind("adam.m/", 0) == 0;
        const bool is_v = name.rfind("adam.v/", 0) == 0;
        if (!is_m && !is_v) continue;
        const std::string param = name.substr(7);
        const auto& names = p.names();
        const auto it = std::find(names.begin(), names.end(), param);
        if (it == names.end()) throw Error(ErrorCode::ParseError, "optimizer state for unknown tensor " + param);
        const auto idx = static_cast<std::size_t>(it - names.begin());
        if (t.data.size() != p.tensors()[idx].size()) throw Error(ErrorCode::ShapeMismatch, "optimizer state " + name);
        (is_m ? a.m_ : a.v_)[idx] = t.data;
    }
    return a;
}

double mean_loss(const ModelParams& params, const std::vector<ComplexRecord>& records,
                 const std::vector<Augmentation>& augs, const LossWeights& weights, bool refine) {
    if (records.empty() || records.size() != augs.size()) {
        throw Error(ErrorCode::ConfigError, "mean_loss needs one augmentation per record");
    }
    std::vector<TrainingExample> batch;
    for (std::size_t i = 0; i < records.size(); ++i) batch.push_back(augment(records[i], augs[i]));
    return evaluate_loss(params, batch, weights, refine).report.total / static_cast<double>(records.size());
}

namespace {

struct Retained {
    double loss;
    int epoch;
    std::filesystem::path path;
};

}  // namespace

TrainResult train_loop(ModelParams params, const std::vector<ComplexRecord>& train,
                       const std::vector<ComplexRecord>& val_in, const TrainConfig& cfg,
                       const std::filesystem::path& out_dir, std::ostream* log) {
    if (train.empty()) throw Error(ErrorCode::ConfigError, "empty training set");
    const std::vector<ComplexRecord>& val = val_in.empty() ? train : val_in;
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    std::mt19937_64 rng(cfg.seed);
    std::mt19937_64 val_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
    std::vector<Augmentation> val_augs;
    for (std::size_t i = 0; i < val.size(); ++i) val_augs.push_back(draw_augmentation(val_rng, cfg.translation_range));

    Adam adam(params);
    TrainResult result;
    result.best_params = params;
    std::vector<Retained> retained;
    int since_best = 0;
    double best = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        bool out_of_steps = false;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            std::vector<TrainingExample> batch;
            for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
                batch.push_back(augment(train[order[i]], draw_augmentation(rng, cfg.translation_range)));
            }
            EvalOptions opt;
            opt.training = true;
            opt.rng = &rng;
            LossResult step = loss_gradient(params, batch, cfg.weights, cfg.refine, opt);
            const double grad_norm = clip_gradient(step.gradient, cfg.clip_norm);
            adam.step(params, step.gradient, cfg.learning_rate);
            ++result.steps;
            if (log != nullptr) {
                nlohmann::json line = step.report;
                line["event"] = "step";
                line["step"] = result.steps;
                line["epoch"] = epoch;
                line["sample"] = batch.front().id;
                line["grad_norm"] = grad_norm;
                line["lr"] = cfg.learning_rate;
                *log << line.dump() << '\n';
            }
            if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) {
                out_of_steps = true;
                break;
            }
        }

        const double val_loss = mean_loss(params, val, val_augs, cfg.weights, cfg.refine);
        result.val_losses.push_back(val_loss);
        result.epochs_run = epoch + 1;
        const bool improved = val_loss < best;
        if (improved) {
            best = val_loss;
            result.best_val_loss = val_loss;
            result.best_epoch = epoch;
            result.best_params = params;
            since_best = 0;
        } else {
            ++since_best;
        }

        if (!out_dir.empty()) {
            const bool keep = static_cast<int>(retained.size()) < cfg.top_k_checkpoints ||
                              val_loss < retained.back().loss;
            if (keep) {
                Checkpoint ck;
                ck.params = params;
                ck.extra = adam.state(params);
                ck.meta = {{"epoch", epoch}, {"step", result.steps}, {"val_loss", val_loss}, {"train_config", cfg}};
                const auto path = out_dir / ("epoch_" + std::to_string(epoch) + ".ckpt");
                save_checkpoint(path.string(), ck);
                retained.push_back({val_loss, epoch, path});
                std::stable_sort(retained.begin(), retained.end(),
                                 [](const Retained& a, const Retained& b) { return a.loss < b.loss; });
                while (static_cast<int>(retained.size()) > cfg.top_k_checkpoints) {
                    std::filesystem::remove(retained.back().path);
                    retained.pop_back();
                }
            }
        }

        if (log != nullptr) {
            nlohmann::json line = {{"event", "epoch"},       {"epoch", epoch},         {"step", result.steps},
                                   {"val_loss", val_loss},   {"improved", improved},   {"since_best", since_best}};
            *log << line.dump() << '\n';
        }
        if (since_best >= cfg.patience) {
            result.early_stopped = true;
            break;
        }
        if (out_of_steps) break;
    }

    for (const auto& r : retained) result.checkpoints.push_back(r.path);
    if (!out_dir.empty()) {
        nlohmann::json index = nlohmann::json::array();
        for (const auto& r : retained) index.push_back({{"path", r.path.filename().string()}, {"epoch", r.epoch}, {"val_loss", r.loss}});
        std::ofstream(out_dir / "checkpoints.json") << index.dump(2) << '\n';
    }
    result.params = std::move(params);
    return result;
}

}  // namespace paradock
