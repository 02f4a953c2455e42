#include "paradock/epit.hpp"

#include "paradock/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace paradock {

using nn::fc;
using nn::is_tape_v;
using nn::linear;

double ModelConfig::attention_scale() const {
    const double width = per_head_attention_scale ? static_cast<double>(hidden) / heads : hidden;
    return 1.0 / std::sqrt(width);
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
    if (hidden < 1) fail("hidden must be positive");
    if (embed < 2 || embed % 2 != 0) fail("embed must be a positive even number");
    if (layers < 0) fail("layers must be non-negative");
    if (heads < 1) fail("heads must be positive");
    if (m_blocks < 1) fail("m_blocks must be positive");
    if (graph.k < 1) fail("k must be positive");
    if (graph.rbf_size < 1) fail("rbf_size must be positive");
    if (graph.embed_dim != embed) fail("graph.embed_dim must equal embed");
    if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"hidden", c.hidden},
                       {"embed", c.embed},
                       {"layers", c.layers},
                       {"heads", c.heads},
                       {"m_blocks", c.m_blocks},
                       {"k", c.graph.k},
                       {"rbf_size", c.graph.rbf_size},
                       {"rbf_sigma", c.graph.rbf_sigma},
                       {"rbf_max", c.graph.rbf_max},
                       {"dropout", c.dropout},
                       {"per_head_attention_scale", c.per_head_attention_scale},
                       {"vector_norm_eps", c.vector_norm_eps}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig d;
    c.hidden = j.value("hidden", d.hidden);
    c.embed = j.value("embed", d.embed);
    c.layers = j.value("layers", d.layers);
    c.heads = j.value("heads", d.heads);
    c.m_blocks = j.value("m_blocks", d.m_blocks);
    c.graph.k = j.value("k", d.graph.k);
    c.graph.rbf_size = j.value("rbf_size", d.graph.rbf_size);
    c.graph.rbf_sigma = j.value("rbf_sigma", d.graph.rbf_sigma);
    c.graph.rbf_max = j.value("rbf_max", d.graph.rbf_max);
    c.graph.embed_dim = c.embed;
    c.dropout = j.value("dropout", d.dropout);
    c.per_head_attention_scale = j.value("per_head_attention_scale", d.per_head_attention_scale);
    c.vector_norm_eps = j.value("vector_norm_eps", d.vector_norm_eps);
}

std::string layer_param(int layer, const std::string& name) {
    return "layer" + std::to_string(layer) + "." + name;
}

namespace {

void add_linear(std::vector<ParamSpec>& out, const std::string& name, int out_dim, int in_dim, bool bias = true) {
    out.push_back({name + ".w", {out_dim, in_dim}, in_dim});
    if (bias) out.push_back({name + ".b", {1, out_dim}, in_dim});
}

}  // namespace

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
    const int h = cfg.hidden;
    const int d = cfg.embed;
    const int e = cfg.graph.edge_dim();
    const int u = cfg.heads;
    std::vector<ParamSpec> s;
    s.push_back({"embed.residue", {kNumResidueTypes, d}, 1});
    add_linear(s, "embed.proj", h, 2 * d);
    for (int l = 0; l < cfg.layers; ++l) {
        auto n = [l](const char* x) { return layer_param(l, x); };
        add_linear(s, n("msg.fc1"), h, h + e);
        add_linear(s, n("msg.fc2"), h, h);
        add_linear(s, n("gtl.qkv1"), h, h);
        add_linear(s, n("gtl.qkv2"), 3 * u * h, h);
        add_linear(s, n("gtl.out1"), h, u * h);
        add_linear(s, n("gtl.out2"), h, h);
        add_linear(s, n("vec.phi1"), h, h);
        add_linear(s, n("vec.phi2"), 2 * h, h);
        add_linear(s, n("vec.filter"), 2 * h, e);
        add_linear(s, n("upd.U"), h, h, false);
        add_linear(s, n("upd.V"), h, h, false);
        add_linear(s, n("upd.fc1"), h, 2 * h);
        add_linear(s, n("upd.fc2"), 3 * h, h);
        s.push_back({n("inter.W"), {h, h}, h});
        add_linear(s, n("inter.fc1"), h, h);
        add_linear(s, n("inter.fc2"), h, h);
    }
    s.push_back({"head.F.W", {h, h}, h});
    add_linear(s, "head.F.fc1", h, h);
    add_linear(s, "head.F.fc2", 4, h);
    add_linear(s, "head.E", cfg.head_rows(), h, false);
    return s;
}

ModelParams::ModelParams(const ModelConfig& cfg) : config(cfg) {
    cfg.validate();
    for (const auto& spec : param_specs(cfg)) {
        std::size_t n = 1;
        for (int dim : spec.shape) n *= static_cast<std::size_t>(dim);
        add(spec.name, Tensor{spec.shape, std::vector<double>(n, 0.0)});
    }
}

const Tensor& ModelParams::at(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw Error(ErrorCode::ConfigError, "unknown parameter " + name);
    return tensors_[it->second];
}

Tensor& ModelParams::at(const std::string& name) {
    return const_cast<Tensor&>(std::as_const(*this).at(name));
}

std::size_t ModelParams::total_size() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

void ModelParams::add(std::string name, Tensor t) {
    if (index_.count(name) > 0) throw Error(ErrorCode::ConfigError, "duplicate parameter " + name);
    index_.emplace(name, tensors_.size());
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(t));
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams params(cfg);
    std::mt19937_64 rng(seed);
    const auto specs = param_specs(cfg);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(specs[i].fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& x : params.tensors()[i].data) x = dist(rng);
    }
    return params;
}

template <typename S>
BoundParams<S>::BoundParams(const ModelParams& params) : config_(params.config) {
    const auto& names = params.names();
    const auto& tensors = params.tensors();
    for (std::size_t n = 0; n < names.size(); ++n) {
        const Tensor& t = tensors[n];
        MatX<S> m(t.rows(), t.cols());
        std::int32_t first = -1;
        for (int r = 0; r < t.rows(); ++r) {
            for (int c = 0; c < t.cols(); ++c) {
                const double x = t.data[static_cast<std::size_t>(r) * t.cols() + c];
                if constexpr (is_tape_v<S>) {
                    m(r, c) = ad::Var::leaf(x);
                    if (first < 0) first = m(r, c).id();
                } else {
                    m(r, c) = static_cast<S>(x);
                }
            }
        }
        leaf_ids_.push_back(first);
        mats_.emplace(names[n], std::move(m));
    }
}

template <typename S>
const MatX<S>& BoundParams<S>::operator[](const std::string& name) const {
    const auto it = mats_.find(name);
    if (it == mats_.end()) throw Error(ErrorCode::ConfigError, "unknown parameter " + name);
    return it->second;
}

namespace {

template <typename S>
MatX<S> empty_bias() {
    return MatX<S>(0, 0);
}

template <typename S>
MatX<S> apply_fc(const MatX<S>& x, const BoundParams<S>& p, const std::string& fc1, const std::string& fc2) {
    return fc<S>(x, p[fc1 + ".w"], p[fc1 + ".b"], p[fc2 + ".w"], p[fc2 + ".b"]);
}

template <typename S>
MatX<S> hcat(const MatX<S>& a, const MatX<S>& b) {
    MatX<S> out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

template <typename S>
MatX<S> gather_rows(const MatX<S>& x, const std::vector<int>& rows) {
    MatX<S> out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
    return out;
}

template <typename S>
MatX<S> constant_matrix(const Eigen::MatrixXd& x) {
    return x.cast<S>();
}

// Sum of edge rows into their destination nodes, optionally averaged.
template <typename S>
MatX<S> scatter_to_targets(const MatX<S>& edges, const ProteinGraph& g, bool mean) {
    const int n = g.num_nodes();
    MatX<S> out = MatX<S>::Zero(n, edges.cols());
    for (int i = 0; i < n; ++i) {
        const int begin = g.offsets[i];
        const int end = g.offsets[i + 1];
        if (begin == end) continue;
        const double scale = mean ? 1.0 / (end - begin) : 1.0;
        for (Eigen::Index c = 0; c < edges.cols(); ++c) {
            if constexpr (is_tape_v<S>) {
                ad::NodeBuilder nb;
                double acc = 0.0;
                for (int e = begin; e < end; ++e) {
                    acc += edges(e, c).value();
                    nb.add(edges(e, c), scale);
                }
                out(i, c) = nb.finish(acc * scale);
            } else {
                S acc = S(0);
                for (int e = begin; e < end; ++e) acc += edges(e, c);
                out(i, c) = acc * static_cast<S>(scale);
            }
        }
    }
    return out;
}

template <typename S>
S dot_range(const MatX<S>& a, Eigen::Index row, Eigen::Index a0, const MatX<S>& b, Eigen::Index b0,
            Eigen::Index width) {
    if constexpr (is_tape_v<S>) {
        ad::NodeBuilder nb;
        double acc = 0.0;
        for (Eigen::Index c = 0; c < width; ++c) {
            const ad::Var& x = a(row, a0 + c);
            const ad::Var& y = b(row, b0 + c);
            acc += x.value() * y.value();
            nb.add(x, y.value());
            nb.add(y, x.value());
        }
        return nb.finish(acc);
    } else {
        return a.row(row).segment(a0, width).dot(b.row(row).segment(b0, width));
    }
}

}  // namespace

template <typename S>
MatX<S> edge_message(const MatX<S>& h, const ProteinGraph& g, const BoundParams<S>& p, int layer) {
    const MatX<S> input = hcat<S>(gather_rows<S>(h, g.source), constant_matrix<S>(g.edge_features));
    return apply_fc<S>(input, p, layer_param(layer, "msg.fc1"), layer_param(layer, "msg.fc2"));
}

template <typename S>
GtlResult<S> gtl_forward(const MatX<S>& messages, const ProteinGraph& g, const BoundParams<S>& p, int layer,
                         const ForwardOptions& opt) {
    const ModelConfig& cfg = p.config();
    const int h = cfg.hidden;
    const int u = cfg.heads;
    const int num_edges = g.num_edges();
    const double scale = cfg.attention_scale();
    using std::exp;

    const MatX<S> qkv = apply_fc<S>(messages, p, layer_param(layer, "gtl.qkv1"), layer_param(layer, "gtl.qkv2"));

    MatX<S> logits(num_edges, u);
    for (int e = 0; e < num_edges; ++e) {
        for (int head = 0; head < u; ++head) {
            logits(e, head) = dot_range<S>(qkv, e, head * h, qkv, (u + head) * h, h) * static_cast<S>(scale);
        }
    }

    MatX<S> attention(num_edges, u);
    for (int i = 0; i < g.num_nodes(); ++i) {
        const int begin = g.offsets[i];
        const int end = g.offsets[i + 1];
        for (int head = 0; head < u; ++head) {
            double top = -std::numeric_limits<double>::infinity();
            for (int e = begin; e < end; ++e) top = std::max(top, static_cast<double>(ad::value(logits(e, head))));
            S total = S(0);
            for (int e = begin; e < end; ++e) {
                attention(e, head) = exp(logits(e, head) - static_cast<S>(top));
                total = total + attention(e, head);
            }
            for (int e = begin; e < end; ++e) attention(e, head) = attention(e, head) / total;
        }
    }

    MatX<S> weighted(num_edges, u * h);
    for (int e = 0; e < num_edges; ++e) {
        for (int head = 0; head < u; ++head) {
            const S a = attention(e, head);
            for (int c = 0; c < h; ++c) weighted(e, head * h + c) = a * qkv(e, (2 * u + head) * h + c);
        }
    }

    if (opt.training && cfg.dropout > 0.0) {
        if (opt.rng == nullptr) throw Error(ErrorCode::ConfigError, "training forward needs an rng");
        std::bernoulli_distribution keep(1.0 - cfg.dropout);
        const S inv_keep = static_cast<S>(1.0 / (1.0 - cfg.dropout));
        for (Eigen::Index e = 0; e < weighted.rows(); ++e) {
            for (Eigen::Index c = 0; c < weighted.cols(); ++c) {
                weighted(e, c) = keep(*opt.rng) ? weighted(e, c) * inv_keep : S(0);
            }
        }
    }

    const MatX<S> mixed = apply_fc<S>(weighted, p, layer_param(layer, "gtl.out1"), layer_param(layer, "gtl.out2"));
    return {scatter_to_targets<S>(mixed, g, true), std::move(attention)};
}

template <typename S>
NodeState<S> initial_state(const ProteinGraph& g, const BoundParams<S>& p) {
    const int n = g.num_nodes();
    const MatX<S>& table = p["embed.residue"];
    MatX<S> types(n, table.cols());
    for (int i = 0; i < n; ++i) types.row(i) = table.row(g.residue_types[i]);
    const MatX<S> input = hcat<S>(types, constant_matrix<S>(g.positional));
    NodeState<S> state;
    state.h = linear<S>(input, p["embed.proj.w"], p["embed.proj.b"]);
    for (auto& axis : state.v) axis = MatX<S>::Zero(n, p.config().hidden);
    return state;
}

template <typename S>
NodeState<S> painn_block(const NodeState<S>& state, const ProteinGraph& g, const BoundParams<S>& p, int layer,
                         const ForwardOptions& opt) {
    const ModelConfig& cfg = p.config();
    const int h = cfg.hidden;
    const int n = g.num_nodes();
    const int num_edges = g.num_edges();
    NodeState<S> out = state;

    // Message block. Vector gates come from the block input features.
    if (num_edges > 0) {
        const MatX<S> messages = edge_message<S>(state.h, g, p, layer);
        const GtlResult<S> gtl = gtl_forward<S>(messages, g, p, layer, opt);

        const MatX<S> phi = apply_fc<S>(state.h, p, layer_param(layer, "vec.phi1"), layer_param(layer, "vec.phi2"));
        const MatX<S> filter = linear<S>(constant_matrix<S>(g.edge_features), p[layer_param(layer, "vec.filter.w")],
                                         p[layer_param(layer, "vec.filter.b")]);
        const MatX<S> gates = gather_rows<S>(phi, g.source).cwiseProduct(filter);  // E x 2H

        Eigen::MatrixXd directions(num_edges, 3);
        for (int e = 0; e < num_edges; ++e) {
            const Vec3 d = g.coords.row(g.target[e]) - g.coords.row(g.source[e]);
            const double len = d.norm();
            directions.row(e) = len > 0.0 ? Vec3(d / len) : Vec3::Zero();
        }

        for (int axis = 0; axis < 3; ++axis) {
            MatX<S> per_edge(num_edges, h);
            for (int e = 0; e < num_edges; ++e) {
                const int j = g.source[e];
                const S dir = static_cast<S>(directions(e, axis));
                for (int c = 0; c < h; ++c) {
                    per_edge(e, c) = gates(e, c) * state.v[axis](j, c) + gates(e, h + c) * dir;
                }
            }
            out.v[axis] = out.v[axis] + scatter_to_targets<S>(per_edge, g, false);
        }
        out.h = out.h + gtl.aggregated;
    }

    // Update block.
    std::array<MatX<S>, 3> uv;
    std::array<MatX<S>, 3> vv;
    const MatX<S> none = empty_bias<S>();
    for (int axis = 0; axis < 3; ++axis) {
        uv[axis] = linear<S>(out.v[axis], p[layer_param(layer, "upd.U.w")], none);
        vv[axis] = linear<S>(out.v[axis], p[layer_param(layer, "upd.V.w")], none);
    }
    MatX<S> norms(n, h);
    MatX<S> inner(n, h);
    const S eps = static_cast<S>(cfg.vector_norm_eps);
    using std::sqrt;
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < h; ++c) {
            norms(i, c) = sqrt(vv[0](i, c) * vv[0](i, c) + vv[1](i, c) * vv[1](i, c) + vv[2](i, c) * vv[2](i, c) + eps);
            inner(i, c) = uv[0](i, c) * vv[0](i, c) + uv[1](i, c) * vv[1](i, c) + uv[2](i, c) * vv[2](i, c);
        }
    }
    const MatX<S> a = apply_fc<S>(hcat<S>(out.h, norms), p, layer_param(layer, "upd.fc1"), layer_param(layer, "upd.fc2"));
    for (int axis = 0; axis < 3; ++axis) {
        out.v[axis] = out.v[axis] + a.leftCols(h).cwiseProduct(uv[axis]);
    }
    out.h = out.h + a.middleCols(h, h).cwiseProduct(inner) + a.rightCols(h);
    return out;
}

template <typename S>
MatX<S> inter_gate(const MatX<S>& h_self, const MatX<S>& h_other, const MatX<S>& w) {
    // mean_k (x W y_k^T) = (x W) . mean_k y_k
    const MatX<S> other_mean = nn::column_mean<S>(h_other);
    const MatX<S> xw = linear<S>(h_self, w.transpose(), empty_bias<S>());
    MatX<S> score = linear<S>(xw, other_mean, empty_bias<S>());
    for (Eigen::Index i = 0; i < score.rows(); ++i) score(i, 0) = nn::sigmoid<S>(score(i, 0));
    return score;
}

template <typename S>
std::pair<MatX<S>, MatX<S>> inter_update(const MatX<S>& h1, const MatX<S>& h2, const BoundParams<S>& p,
                                         int layer) {
    const MatX<S>& w = p[layer_param(layer, "inter.W")];
    auto update = [&](const MatX<S>& self, const MatX<S>& other) {
        const MatX<S> beta = inter_gate<S>(self, other, w);
        const MatX<S> f = apply_fc<S>(self, p, layer_param(layer, "inter.fc1"), layer_param(layer, "inter.fc2"));
        MatX<S> out = self;
        for (Eigen::Index i = 0; i < self.rows(); ++i) {
            for (Eigen::Index c = 0; c < self.cols(); ++c) out(i, c) = out(i, c) + beta(i, 0) * f(i, c);
        }
        return out;
    };
    return {update(h1, h2), update(h2, h1)};
}

template <typename S>
PairState<S> epit_forward(const ProteinGraph& ligand, const ProteinGraph& receptor, const BoundParams<S>& p,
                          const ForwardOptions& opt) {
    PairState<S> s{initial_state<S>(ligand, p), initial_state<S>(receptor, p)};
    for (int l = 0; l < p.config().layers; ++l) {
        s.ligand = painn_block<S>(s.ligand, ligand, p, l, opt);
        s.receptor = painn_block<S>(s.receptor, receptor, p, l, opt);
        auto [h1, h2] = inter_update<S>(s.ligand.h, s.receptor.h, p, l);
        s.ligand.h = std::move(h1);
        s.receptor.h = std::move(h2);
    }
    return s;
}

template <typename S>
MatX<S> compute_F(const MatX<S>& h_self, const MatX<S>& h_other, const BoundParams<S>& p) {
    const MatX<S> gate = inter_gate<S>(h_self, h_other, p["head.F.W"]);
    MatX<S> gated = h_self;
    for (Eigen::Index i = 0; i < gated.rows(); ++i) {
        for (Eigen::Index c = 0; c < gated.cols(); ++c) gated(i, c) = gated(i, c) * gate(i, 0);
    }
    return nn::column_sum<S>(apply_fc<S>(gated, p, "head.F.fc1", "head.F.fc2"));
}

template <typename S>
MatX<S> compute_E(const NodeState<S>& state, const BoundParams<S>& p) {
    const MatX<S>& w = p["head.E.w"];
    MatX<S> out(w.rows(), 3);
    for (int axis = 0; axis < 3; ++axis) {
        const MatX<S> pooled = nn::column_sum<S>(MatX<S>(state.h.cwiseProduct(state.v[axis])));  // 1 x H
        out.col(axis) = linear<S>(pooled, w, empty_bias<S>()).transpose();
    }
    return out;
}

#define PARADOCK_INSTANTIATE(S)                                                                                  \
    template class BoundParams<S>;                                                                               \
    template MatX<S> edge_message<S>(const MatX<S>&, const ProteinGraph&, const BoundParams<S>&, int);           \
    template GtlResult<S> gtl_forward<S>(const MatX<S>&, const ProteinGraph&, const BoundParams<S>&, int,        \
                                         const ForwardOptions&);                                                 \
    template NodeState<S> initial_state<S>(const ProteinGraph&, const BoundParams<S>&);                         \
    template NodeState<S> painn_block<S>(const NodeState<S>&, const ProteinGraph&, const BoundParams<S>&, int,  \
                                         const ForwardOptions&);                                                 \
    template MatX<S> inter_gate<S>(const MatX<S>&, const MatX<S>&, const MatX<S>&);                          \
    template std::pair<MatX<S>, MatX<S>> inter_update<S>(const MatX<S>&, const MatX<S>&, const BoundParams<S>&, \
                                                         int);                                                   \
    template PairState<S> epit_forward<S>(const ProteinGraph&, const ProteinGraph&, const BoundParams<S>&,      \
                                          const ForwardOptions&);                                                \
    template MatX<S> compute_F<S>(const MatX<S>&, const MatX<S>&, const BoundParams<S>&);                       \
    template MatX<S> compute_E<S>(const NodeState<S>&, const BoundParams<S>&);

PARADOCK_INSTANTIATE(double)
PARADOCK_INSTANTIATE(float)
PARADOCK_INSTANTIATE(ad::Var)

#undef PARADOCK_INSTANTIATE

// Checkpoint I/O

namespace {

constexpr const char* kMagic = "paradock-checkpoint";

void append_le(std::string& blob, double x) {
    static_assert(sizeof(double) == 8);
    std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

double read_le(const char* p) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
    return std::bit_cast<double>(bits);
}

std::string shape_string(const std::vector<int>& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) s += 'x';
        s += std::to_string(shape[i]);
    }
    return s.empty() ? "1" : s;
}

std::vector<int> parse_shape(const std::string& s) {
    std::vector<int> shape;
    std::stringstream in(s);
    std::string part;
    while (std::getline(in, part, 'x')) shape.push_back(std::stoi(part));
    return shape;
}

[[noreturn]] void bad_checkpoint(const std::string& path, const std::string& why) {
    throw Error(ErrorCode::ParseError, "checkpoint " + path + ": " + why);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ostringstream head;
    std::string blob;
    head << kMagic << " v" << kCheckpointVersion << '\n';
    head << "config " << nlohmann::json(ckpt.params.config).dump() << '\n';
    head << "meta " << ckpt.meta.dump() << '\n';
    auto emit = [&](const std::string& name, const Tensor& t) {
        head << "tensor " << name << ' ' << shape_string(t.shape) << " offset " << blob.size() << '\n';
        for (double x : t.data) append_le(blob, x);
    };
    for (std::size_t i = 0; i < ckpt.params.names().size(); ++i) emit(ckpt.params.names()[i], ckpt.params.tensors()[i]);
    for (const auto& [name, t] : ckpt.extra) emit("extra/" + name, t);
    head << "end " << blob.size() << '\n';

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    const std::string text = head.str();
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);

    std::string line;
    if (!std::getline(in, line) || line != std::string(kMagic) + " v" + std::to_string(kCheckpointVersion)) {
        bad_checkpoint(path, "unrecognised header");
    }

    Checkpoint ckpt;
    ModelConfig cfg;
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::size_t offset;
    };
    std::vector<Entry> entries;
    std::size_t blob_size = 0;
    bool ended = false;
    while (!ended && std::getline(in, line)) {
        std::istringstream fields(line);
        std::string kind;
        fields >> kind;
        if (kind == "config") {
            try {
                cfg = nlohmann::json::parse(line.substr(7)).get<ModelConfig>();
            } catch (const nlohmann::json::exception& e) {
                bad_checkpoint(path, std::string("bad config: ") + e.what());
            }
        } else if (kind == "meta") {
            try {
                ckpt.meta = nlohmann::json::parse(line.substr(5));
            } catch (const nlohmann::json::exception& e) {
                bad_checkpoint(path, std::string("bad meta: ") + e.what());
            }
        } else if (kind == "tensor") {
            Entry e;
            std::string shape;
            std::string word;
            fields >> e.name >> shape >> word >> e.offset;
            if (!fields || word != "offset") bad_checkpoint(path, "bad tensor line: " + line);
            e.shape = parse_shape(shape);
            entries.push_back(std::move(e));
        } else if (kind == "end") {
            fields >> blob_size;
            ended = true;
        } else {
            bad_checkpoint(path, "unexpected line: " + line);
        }
    }
    if (!ended) bad_checkpoint(path, "missing end marker");

    std::string blob(blob_size, '\0');
    in.read(blob.data(), static_cast<std::streamsize>(blob_size));
    if (static_cast<std::size_t>(in.gcount()) != blob_size) bad_checkpoint(path, "truncated data");

    cfg.validate();
    ckpt.params = ModelParams(cfg);
    std::vector<bool> seen(ckpt.params.names().size(), false);
    for (const auto& e : entries) {
        Tensor t;
        t.shape = e.shape;
        std::size_t n = 1;
        for (int d : e.shape) n *= static_cast<std::size_t>(d);
        if (e.offset + 8 * n > blob_size) bad_checkpoint(path, "tensor " + e.name + " out of range");
        t.data.resize(n);
        for (std::size_t i = 0; i < n; ++i) t.data[i] = read_le(blob.data() + e.offset + 8 * i);

        if (e.name.rfind("extra/", 0) == 0) {
            ckpt.extra.emplace_back(e.name.substr(6), std::move(t));
            continue;
        }
        if (!ckpt.params.contains(e.name)) bad_checkpoint(path, "unknown tensor " + e.name);
        Tensor& dst = ckpt.params.at(e.name);
        if (dst.shape != t.shape) bad_checkpoint(path, "shape mismatch for " + e.name);
        dst = std::move(t);
        const auto& names = ckpt.params.names();
        seen[static_cast<std::size_t>(std::find(names.begin(), names.end(), e.name) - names.begin())] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) bad_checkpoint(path, "missing tensor " + ckpt.params.names()[i]);
    }
    return ckpt;
}

}  // namespace paradock
