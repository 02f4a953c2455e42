#include "paradock/losses.hpp"

namespace paradock {

Points standard_frame(const Points& pockets, const RigidTransform& frame) {
    return apply(frame.inverse(), pockets);
}

std::optional<Eigen::Matrix2d> refinement_target(const Points& ligand_pockets, const Points& receptor_pockets,
                                                 const RigidTransform& ligand_frame,
                                                 const RigidTransform& receptor_frame) {
    const Points p1 = standard_frame(ligand_pockets, ligand_frame);
    const Points p2 = standard_frame(receptor_pockets, receptor_frame);
    const Points2 xy1 = p1.leftCols<2>();
    const Points2 xy2 = p2.leftCols<2>();
    try {
        return kabsch2d<double>(xy1, xy2);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DegenerateConfiguration || e.code() == ErrorCode::TooFewPoints) {
            return std::nullopt;
        }
        throw;
    }
}

void to_json(nlohmann::json& j, const LossWeights& w) {
    j = nlohmann::json{{"fit", w.fit}, {"overlap", w.overlap}, {"refinement", w.refinement}, {"dock", w.dock}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
    const LossWeights d;
    w.fit = j.value("fit", d.fit);
    w.overlap = j.value("overlap", d.overlap);
    w.refinement = j.value("refinement", d.refinement);
    w.dock = j.value("dock", d.dock);
    for (double x : {w.fit, w.overlap, w.refinement, w.dock}) {
        if (!(x >= 0.0)) throw Error(ErrorCode::ConfigError, "loss weights must be non-negative");
    }
}

const std::vector<std::string>& ablation_names() {
    static const std::vector<std::string> names = {"full",     "-fit",         "-overlap",   "-ref",
                                                   "-fit-overlap", "-fit-ref", "-overlap-ref"};
    return names;
}

LossWeights ablation_weights(const std::string& name) {
    LossWeights w;
    if (name == "full") return w;
    if (name == "-fit") {
        w.fit = 0.0;
    } else if (name == "-overlap") {
        w.overlap = 0.0;
    } else if (name == "-ref") {
        w.refinement = 0.0;
    } else if (name == "-fit-overlap") {
        w.fit = w.overlap = 0.0;
    } else if (name == "-fit-ref") {
        w.fit = w.refinement = 0.0;
    } else if (name == "-overlap-ref") {
        w.overlap = w.refinement = 0.0;
    } else {
        throw Error(ErrorCode::ConfigError, "unknown ablation '" + name + "'");
    }
    return w;
}

void to_json(nlohmann::json& j, const LossReport& r) {
    j = nlohmann::json{{"fit", r.fit},
                       {"overlap", r.overlap},
                       {"refinement", r.refinement},
                       {"dock", r.dock},
                       {"total", r.total},
                       {"weights", r.weights},
                       {"refinement_skipped", r.refinement_skipped},
                       {"no_contacts", r.no_contacts}};
}

}  // namespace paradock
