#pragma once

// Training: augmentation, exact gradients through the whole docking
// pipeline, Adam, early stopping and top-k checkpoints.

#include "paradock/losses.hpp"
#include "paradock/synth.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace paradock {

struct TrainConfig {
    ModelConfig model{};
    double learning_rate = 2e-4;
    LossWeights weights{};
    bool refine = true;
    std::uint64_t seed = 20240607;
    int epochs = 100;
    int max_steps = 0;              // 0: no step limit
    int batch_size = 1;
    int patience = 8;
    int top_k_checkpoints = 10;
    double translation_range = 10.0;
    double clip_norm = 1.0;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// One bound complex: ligand already placed next to the receptor.
struct ComplexRecord {
    std::string name;
    ProteinGraph ligand;    // bound pose
    ProteinGraph receptor;
    PocketSet pockets;      // from the bound pose; may be empty
};

ComplexRecord make_record(std::string name, const ProteinStructure& ligand_bound, const ProteinStructure& receptor,
                          const GraphConfig& cfg);

// Bound ligand expressed next to the generator's unbound receptor.
ComplexRecord record_from_synthetic(const SyntheticComplex& c, const GraphConfig& cfg);

// Pairs NAME_ligand.pdb / NAME_receptor.pdb in a directory, sorted by name.
// With NAME_truth.json the ligand is first docked onto the receptor using
// the recorded ground truth; otherwise the pair is taken as bound.
std::vector<ComplexRecord> load_dataset(const std::filesystem::path& dir, const GraphConfig& cfg);

struct Augmentation {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
};

Augmentation draw_augmentation(std::mt19937_64& rng, double translation_range);

// Ligand presented as rotation * bound + translation; receptor untouched.
struct TrainingExample {
    std::string id;
    ProteinGraph ligand;
    ProteinGraph receptor;
    LossSample sample;
};

TrainingExample augment(const ComplexRecord& rec, const Augmentation& aug);

// One array per parameter tensor, same order and sizes.
struct GradientSet {
    std::vector<std::vector<double>> values;

    static GradientSet zeros_like(const ModelParams& p);
    double norm() const;
    void scale(double factor);
    void add(const GradientSet& other);
};

struct EvalOptions {
    bool training = false;          // dropout
    std::mt19937_64* rng = nullptr; // required when training
    // Refinement targets per example; derived from the prediction when absent.
    const std::vector<std::optional<Eigen::Matrix2d>>* fixed_targets = nullptr;
};

struct LossResult {
    LossReport report;     // summed over the batch
    GradientSet gradient;  // empty unless gradients were requested
};

// With refine off the refinement weight is treated as 0.
LossResult evaluate_loss(const ModelParams& params, const std::vector<TrainingExample>& batch,
                         const LossWeights& weights, bool refine, const EvalOptions& opt = {});

LossResult loss_gradient(const ModelParams& params, const std::vector<TrainingExample>& batch,
                         const LossWeights& weights, bool refine, const EvalOptions& opt = {});

// Refinement targets of the current prediction, for finite-difference runs.
std::vector<std::optional<Eigen::Matrix2d>> refinement_targets(const ModelParams& params,
                                                                const std::vector<TrainingExample>& batch,
                                                                bool refine);

// Returns the norm before clipping.
double clip_gradient(GradientSet& g, double max_norm);

class Adam {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    Adam() = default;
    explicit Adam(const ModelParams& p);

    void step(ModelParams& p, const GradientSet& g, double lr);
    long steps() const { return step_; }

    // Stored as extra checkpoint tensors adam.m/NAME, adam.v/NAME, adam.step.
    std::vector<std::pair<std::string, Tensor>> state(const ModelParams& p) const;
    static Adam from_state(const ModelParams& p, const std::vector<std::pair<std::string, Tensor>>& extra);

private:
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    long step_ = 0;
};

struct TrainResult {
    ModelParams params;       // final parameters
    ModelParams best_params;  // lowest validation loss
    double best_val_loss = 0.0;
    int best_epoch = -1;
    int epochs_run = 0;
    int steps = 0;
    bool early_stopped = false;
    std::vector<double> val_losses;
    std::vector<std::filesystem::path> checkpoints;  // retained, best first
};

// Mean eval-mode total loss over records at fixed augmentations.
double mean_loss(const ModelParams& params, const std::vector<ComplexRecord>& records,
                 const std::vector<Augmentation>& augs, const LossWeights& weights, bool refine);

// Trains from params. With an empty out_dir no files are written. `log`
// receives one JSON object per line per step and per epoch.
TrainResult train_loop(ModelParams params, const std::vector<ComplexRecord>& train,
                       const std::vector<ComplexRecord>& val, const TrainConfig& cfg,
                       const std::filesystem::path& out_dir = {}, std::ostream* log = nullptr);

}  // namespace paradock
