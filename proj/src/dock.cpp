#include "paradock/dock.hpp"

namespace paradock {

Vec3 centroid(const Points& coords) {
    if (coords.rows() == 0) throw Error(ErrorCode::EmptyStructure, "centroid of an empty point set");
    return coords.colwise().mean().transpose();
}

DockingResult dock(const ProteinGraph& ligand, const ProteinGraph& receptor, const ModelParams& params,
                   const DockOptions& opt) {
    const BoundParams<double> p(params);
    DockingResult out;
    out.heads = run_heads<double>(ligand, receptor, p);
    out.prediction = dock_from_heads<double>(out.heads, centroid(ligand.coords), centroid(receptor.coords), opt);
    out.docked_ligand = apply(out.prediction.transform, ligand.coords);
    return out;
}

}  // namespace paradock
