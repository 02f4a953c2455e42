#pragma once

// Pairwise-independent equivariant network over a ligand/receptor pair.
//
// Each layer runs, per protein, an equivariant message block whose scalar
// channel is aggregated by multi-head graph attention, then an update block;
// afterwards both proteins exchange invariant features only. Hidden features
// H are invariant to rigid motions of either protein; the vector channels V
// rotate with their own protein.

#include "paradock/nn.hpp"
#include "paradock/protein.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace paradock {

using nn::MatX;

struct ModelConfig {
    int hidden = 128;    // H
    int embed = 64;      // D: residue-type embedding and positional widths
    int layers = 2;      // L
    int heads = 16;      // U
    int m_blocks = 3;    // M: rotation head sums M 3x3 blocks
    GraphConfig graph{};
    double dropout = 0.1;
    // Attention logits are scaled by 1/sqrt(H); the per-head variant uses
    // 1/sqrt(H/U).
    bool per_head_attention_scale = false;
    double vector_norm_eps = 1e-8;

    int head_rows() const { return 3 * m_blocks + 1; }
    double attention_scale() const;
    void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Row-major dense array.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    std::size_t size() const { return data.size(); }
    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
};

struct ParamSpec {
    std::string name;
    std::vector<int> shape;
    int fan_in;
};

std::vector<ParamSpec> param_specs(const ModelConfig& cfg);

class ModelParams {
public:
    ModelConfig config;

    ModelParams() = default;
    explicit ModelParams(const ModelConfig& cfg);  // zero-filled

    const std::vector<std::string>& names() const { return names_; }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    std::vector<Tensor>& tensors() { return tensors_; }

    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    std::size_t total_size() const;

    void add(std::string name, Tensor t);

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
};

// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every entry, seeded.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

std::string layer_param(int layer, const std::string& name);

// Parameters materialised as matrices of scalar type S. For ad::Var each
// entry is a leaf on the active tape; leaf_ids() maps back to tensors.
template <typename S>
class BoundParams {
public:
    explicit BoundParams(const ModelParams& params);

    const MatX<S>& operator[](const std::string& name) const;
    const ModelConfig& config() const { return config_; }
    // Tape id of the first entry of each tensor (row-major order), for S = ad::Var.
    const std::vector<std::int32_t>& leaf_ids() const { return leaf_ids_; }

private:
    ModelConfig config_;
    std::unordered_map<std::string, MatX<S>> mats_;
    std::vector<std::int32_t> leaf_ids_;
};

template <typename S>
struct NodeState {
    MatX<S> h;                // N x H
    std::array<MatX<S>, 3> v; // per spatial axis, N x H
};

struct ForwardOptions {
    bool training = false;        // enables attention dropout
    std::mt19937_64* rng = nullptr;
};

template <typename S>
struct GtlResult {
    MatX<S> aggregated;  // N x H, mean over in-neighbours
    MatX<S> attention;   // E x U softmax weights
};

// m_{j->i} = FC(concat(h_j, e_{j->i})), one row per edge.
template <typename S>
MatX<S> edge_message(const MatX<S>& h, const ProteinGraph& g, const BoundParams<S>& p, int layer);

template <typename S>
GtlResult<S> gtl_forward(const MatX<S>& messages, const ProteinGraph& g, const BoundParams<S>& p, int layer,
                         const ForwardOptions& opt = {});

template <typename S>
NodeState<S> initial_state(const ProteinGraph& g, const BoundParams<S>& p);

template <typename S>
NodeState<S> painn_block(const NodeState<S>& state, const ProteinGraph& g, const BoundParams<S>& p, int layer,
                         const ForwardOptions& opt = {});

// sigmoid(mean over the other protein's nodes of h_self W h_other^T), N_self x 1.
template <typename S>
MatX<S> inter_gate(const MatX<S>& h_self, const MatX<S>& h_other, const MatX<S>& w);

template <typename S>
std::pair<MatX<S>, MatX<S>> inter_update(const MatX<S>& h1, const MatX<S>& h2, const BoundParams<S>& p,
                                         int layer);

template <typename S>
struct PairState {
    NodeState<S> ligand;
    NodeState<S> receptor;
};

template <typename S>
PairState<S> epit_forward(const ProteinGraph& ligand, const ProteinGraph& receptor, const BoundParams<S>& p,
                          const ForwardOptions& opt = {});

// Invariant graph-level output in R^4 for protein p given the other's features.
template <typename S>
MatX<S> compute_F(const MatX<S>& h_self, const MatX<S>& h_other, const BoundParams<S>& p);

// Equivariant (3M+1) x 3 output; row r is a 3-vector.
template <typename S>
MatX<S> compute_E(const NodeState<S>& state, const BoundParams<S>& p);

// Checkpoint: text manifest + little-endian float64 blob.
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    ModelParams params;
    std::vector<std::pair<std::string, Tensor>> extra;  // e.g. optimizer state
    nlohmann::json meta = nlohmann::json::object();
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace paradock
