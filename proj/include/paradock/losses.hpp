#pragma once

// Training objectives on a predicted interface pair and docking motion.

#include "paradock/dock.hpp"

#include <json.hpp>

#include <optional>

namespace paradock {

template <typename S>
S quadric_value(const QuadricT<S>& q, const Points& x, Eigen::Index row) {
    const Vec3T<S> p = x.row(row).transpose().cast<S>();
    return q.evaluate(p);
}

// sqrt(max(x, 0)) with zero derivative at and below 0.
template <typename S>
S sqrt_relu(const S& x) {
    using std::sqrt;
    using ad::sqrt;
    return ad::value(x) > 0.0 ? S(sqrt(x)) : S(0.0);
}

// Pocket points of each protein, in that protein's input pose, lie on its
// surface and on the tangent plane at the peak.
template <typename S>
S fit_loss(const InterfacePredictionT<S>& iface, const Points& ligand_pockets, const Points& receptor_pockets) {
    using std::abs;
    using ad::abs;
    const Eigen::Index k = ligand_pockets.rows();
    if (k == 0 || receptor_pockets.rows() == 0) throw Error(ErrorCode::NoContacts, "fit loss needs pockets");
    if (receptor_pockets.rows() != k) throw Error(ErrorCode::ShapeMismatch, "pocket counts differ");
    S total(0.0);
    for (Side side : {Side::Ligand, Side::Receptor}) {
        const Points& pockets = side == Side::Ligand ? ligand_pockets : receptor_pockets;
        const QuadricT<S>& q = iface.surface(side);
        const Vec3T<S> peak = iface.peak(side);
        const Vec3T<S> normal = iface.normal(side);
        for (Eigen::Index i = 0; i < k; ++i) {
            const S phi = quadric_value<S>(q, pockets, i);
            const Vec3T<S> offset = pockets.row(i).transpose().cast<S>() - peak;
            total = total + phi * phi + abs(offset.dot(normal));
        }
    }
    return total / S(static_cast<double>(k));
}

// The ligand on one side of its surface and the receptor on the other,
// whichever assignment is cheaper.
template <typename S>
S overlap_loss(const InterfacePredictionT<S>& iface, const Points& ligand, const Points& receptor) {
    S lig_pos(0.0), lig_neg(0.0), rec_pos(0.0), rec_neg(0.0);
    for (Eigen::Index i = 0; i < ligand.rows(); ++i) {
        const S phi = quadric_value<S>(iface.ligand_surface, ligand, i);
        lig_pos = lig_pos + sqrt_relu<S>(phi);
        lig_neg = lig_neg + sqrt_relu<S>(-phi);
    }
    for (Eigen::Index i = 0; i < receptor.rows(); ++i) {
        const S phi = quadric_value<S>(iface.receptor_surface, receptor, i);
        rec_pos = rec_pos + sqrt_relu<S>(phi);
        rec_neg = rec_neg + sqrt_relu<S>(-phi);
    }
    const S n1(static_cast<double>(ligand.rows()));
    const S n2(static_cast<double>(receptor.rows()));
    const S first = lig_pos / n1 + rec_neg / n2;
    const S second = lig_neg / n1 + rec_pos / n2;
    return ad::value(first) <= ad::value(second) ? first : second;
}

// Standard-frame pockets Q^T (P - t).
Points standard_frame(const Points& pockets, const RigidTransform& frame);

// Planar alignment of the two proteins' standard-frame pockets, used as a
// fixed target for the refinement rotation. Empty when the alignment is
// undetermined.
std::optional<Eigen::Matrix2d> refinement_target(const Points& ligand_pockets, const Points& receptor_pockets,
                                                 const RigidTransform& ligand_frame,
                                                 const RigidTransform& receptor_frame);

template <typename S>
S refinement_loss(const S& theta, const Eigen::Matrix2d& target) {
    const Mat3T<S> qr = refinement_rotation<S>(theta);
    S total(0.0);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            const S d = qr(r, c) - S(target(r, c));
            total = total + d * d;
        }
    }
    return total;
}

// The ligand was presented as Q_gt X* + t_gt; the exact answer undoes that.
template <typename S>
S dock_loss(const RigidTransformT<S>& pred, const Mat3& q_gt, const Vec3& t_gt) {
    const Mat3T<S> rot_err = pred.rotation - q_gt.transpose().cast<S>();
    const Vec3T<S> t_err = pred.translation + (q_gt.transpose() * t_gt).cast<S>();
    S total(0.0);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) total = total + rot_err(r, c) * rot_err(r, c);
        total = total + t_err(r) * t_err(r);
    }
    return total;
}

struct LossWeights {
    double fit = 1.0;
    double overlap = 1.0;
    double refinement = 1.0;
    double dock = 1.0;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

// Named loss-toggle configurations: full, -fit, -overlap, -ref,
// -fit-overlap, -fit-ref, -overlap-ref.
LossWeights ablation_weights(const std::string& name);
const std::vector<std::string>& ablation_names();

template <typename S>
struct LossTermsT {
    S fit = S(0.0);
    S overlap = S(0.0);
    S refinement = S(0.0);
    S dock = S(0.0);
    bool refinement_skipped = false;
    bool no_contacts = false;
};

template <typename S>
S weighted_total(const LossTermsT<S>& t, const LossWeights& w) {
    S total(0.0);
    if (w.fit != 0.0) total = total + S(w.fit) * t.fit;
    if (w.overlap != 0.0) total = total + S(w.overlap) * t.overlap;
    if (w.refinement != 0.0) total = total + S(w.refinement) * t.refinement;
    if (w.dock != 0.0) total = total + S(w.dock) * t.dock;
    return total;
}

struct LossReport {
    double fit = 0.0;
    double overlap = 0.0;
    double refinement = 0.0;
    double dock = 0.0;
    double total = 0.0;
    LossWeights weights;
    int refinement_skipped = 0;
    int no_contacts = 0;
};

void to_json(nlohmann::json& j, const LossReport& r);

// Everything a loss evaluation needs about one complex besides the network.
struct LossSample {
    Points ligand;            // input (unbound) pose
    Points receptor;
    Points ligand_pockets;    // tracked to the ligand's input pose; may be empty
    Points receptor_pockets;
    Mat3 q_gt = Mat3::Identity();
    Vec3 t_gt = Vec3::Zero();
};

// Skipped terms (weight 0, no pockets, undetermined alignment) are exactly 0.
// A fixed refinement target overrides the one derived from the prediction.
template <typename S>
LossTermsT<S> loss_terms(const DockPredictionT<S>& pred, const LossSample& s, const LossWeights& w,
                         const std::optional<Eigen::Matrix2d>& fixed_target = std::nullopt) {
    LossTermsT<S> t;
    const bool has_pockets = s.ligand_pockets.rows() > 0 && s.receptor_pockets.rows() > 0;
    t.no_contacts = !has_pockets;
    if (w.fit != 0.0 && has_pockets) t.fit = fit_loss<S>(pred.interfaces, s.ligand_pockets, s.receptor_pockets);
    if (w.overlap != 0.0) t.overlap = overlap_loss<S>(pred.interfaces, s.ligand, s.receptor);
    if (w.refinement != 0.0 && has_pockets) {
        std::optional<Eigen::Matrix2d> target = fixed_target;
        if (!target) {
            auto value_frame = [](const RigidTransformT<S>& f) {
                RigidTransform out;
                out.rotation = f.rotation.unaryExpr([](const S& x) { return static_cast<double>(ad::value(x)); });
                out.translation = f.translation.unaryExpr([](const S& x) { return static_cast<double>(ad::value(x)); });
                return out;
            };
            target = refinement_target(s.ligand_pockets, s.receptor_pockets,
                                       value_frame(pred.interfaces.ligand_frame),
                                       value_frame(pred.interfaces.receptor_frame));
        }
        if (target) {
            t.refinement = refinement_loss<S>(pred.theta, *target);
        } else {
            t.refinement_skipped = true;
        }
    }
    if (w.dock != 0.0) t.dock = dock_loss<S>(pred.transform, s.q_gt, s.t_gt);
    return t;
}

template <typename S>
LossReport make_report(const LossTermsT<S>& t, const LossWeights& w) {
    LossReport r;
    r.fit = ad::value(t.fit);
    r.overlap = ad::value(t.overlap);
    r.refinement = ad::value(t.refinement);
    r.dock = ad::value(t.dock);
    r.total = ad::value(weighted_total<S>(t, w));
    r.weights = w;
    r.refinement_skipped = t.refinement_skipped ? 1 : 0;
    r.no_contacts = t.no_contacts ? 1 : 0;
    return r;
}

}  // namespace paradock
