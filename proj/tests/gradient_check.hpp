#pragma once

#include "paradock/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace paradock::testing {

inline ModelConfig tiny_model() {
    ModelConfig m;
    m.hidden = 8;
    m.embed = 8;
    m.layers = 1;
    m.heads = 2;
    m.m_blocks = 1;
    m.graph.k = 4;
    m.graph.embed_dim = 8;
    m.graph.rbf_size = 6;
    return m;
}

inline SynthConfig tiny_synth(int ligand, int receptor) {
    SynthConfig s;
    s.ligand_size = ligand;
    s.receptor_size = receptor;
    return s;
}

struct GroupError {
    std::string name;
    double analytic_norm = 0.0;
    double numeric_norm = 0.0;
    double relative = 0.0;  // |g_ad - g_fd| / max(|g_ad|, |g_fd|); 0 when both vanish
};

// Central differences over every parameter entry, refinement targets frozen
// at the base parameters and dropout off.
inline std::vector<GroupError> finite_difference_check(const ModelParams& params,
                                                       const std::vector<TrainingExample>& batch,
                                                       const LossWeights& w, bool refine, double step = 1e-5,
                                                       double vanish = 1e-10) {
    const auto targets = refinement_targets(params, batch, refine);
    EvalOptions opt;
    opt.fixed_targets = &targets;
    const GradientSet analytic = loss_gradient(params, batch, w, refine, opt).gradient;
    ModelParams probe = params;
    std::vector<GroupError> out;
    for (std::size_t n = 0; n < probe.tensors().size(); ++n) {
        auto& data = probe.tensors()[n].data;
        double diff2 = 0.0, a2 = 0.0, f2 = 0.0;
        for (std::size_t k = 0; k < data.size(); ++k) {
            const double keep = data[k];
            data[k] = keep + step;
            const double up = evaluate_loss(probe, batch, w, refine, opt).report.total;
            data[k] = keep - step;
            const double down = evaluate_loss(probe, batch, w, refine, opt).report.total;
            data[k] = keep;
            const double fd = (up - down) / (2.0 * step);
            const double ad = analytic.values[n][k];
            diff2 += (ad - fd) * (ad - fd);
            a2 += ad * ad;
            f2 += fd * fd;
        }
        GroupError e;
        e.name = probe.names()[n];
        e.analytic_norm = std::sqrt(a2);
        e.numeric_norm = std::sqrt(f2);
        const double scale = std::max(e.analytic_norm, e.numeric_norm);
        e.relative = scale < vanish ? 0.0 : std::sqrt(diff2) / scale;
        out.push_back(e);
    }
    return out;
}

inline double worst_relative(const std::vector<GroupError>& errors) {
    double worst = 0.0;
    for (const auto& e : errors) worst = std::max(worst, e.relative);
    return worst;
}

}  // namespace paradock::testing
