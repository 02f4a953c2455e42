#pragma once

// From network head outputs to a shared paraboloid interface, one rigid
// frame per protein, and the ligand-to-receptor docking motion.

#include "paradock/epit.hpp"
#include "paradock/geometry.hpp"

#include <Eigen/LU>

namespace paradock {

// Raise at inference; during training a near-singular head matrix is nudged
// by 1e-6 I so the step can still produce gradients.
enum class DegeneracyPolicy { Raise, Regularize };

inline constexpr double kDegenerateDet = 1e-10;
inline constexpr double kHeadRegularizer = 1e-6;

template <typename S>
struct HeadOutputsT {
    MatX<S> ligand_F;    // 1 x 4
    MatX<S> receptor_F;  // 1 x 4
    MatX<S> ligand_E;    // (3M+1) x 3
    MatX<S> receptor_E;
};
using HeadOutputs = HeadOutputsT<double>;

template <typename S>
StandardParaboloidT<S> predict_standard_form(const MatX<S>& f1, const MatX<S>& f2) {
    StandardParaboloidT<S> s;
    s.lambda1 = nn::softplus<S>(f1(0, 0) + f2(0, 0));
    s.lambda2 = nn::softplus<S>(f1(0, 1) + f2(0, 1));
    s.beta = f1(0, 2) + f2(0, 2);
    return s;
}

template <typename S>
S refinement_angle(const MatX<S>& f1, const MatX<S>& f2) {
    return f1(0, 3) - f2(0, 3);
}

// Sum of the M 3x3 blocks of E, each transposed so that rotating the input
// by W maps the sum R to W R.
template <typename S>
Mat3T<S> head_matrix(const MatX<S>& e) {
    const Eigen::Index m = (e.rows() - 1) / 3;
    Mat3T<S> r = Mat3T<S>::Zero();
    for (Eigen::Index j = 0; j < m; ++j) r = r + e.block(3 * j, 0, 3, 3).transpose();
    return r;
}

template <typename S>
RigidTransformT<S> predict_se3(const MatX<S>& e, const Vec3& centroid,
                               DegeneracyPolicy policy = DegeneracyPolicy::Raise) {
    if (e.cols() != 3 || e.rows() < 4 || (e.rows() - 1) % 3 != 0) {
        throw Error(ErrorCode::ShapeMismatch, "head output must be (3M+1) x 3");
    }
    Mat3T<S> r = head_matrix<S>(e);
    const Mat3 values = r.unaryExpr([](const S& x) { return static_cast<double>(ad::value(x)); });
    const double det = values.determinant();
    if (!std::isfinite(det)) throw Error(ErrorCode::DegenerateHead, "non-finite head matrix");
    if (det < 0.0) r = -r;
    if (std::abs(det) < kDegenerateDet) {
        if (policy == DegeneracyPolicy::Raise) {
            throw Error(ErrorCode::DegenerateHead, "head matrix is singular (|det| < 1e-10)");
        }
        r = r + Mat3T<S>::Identity() * S(kHeadRegularizer);
    }
    RigidTransformT<S> t;
    try {
        t.rotation = polar_rotation(r);
    } catch (const Error& err) {
        throw Error(ErrorCode::DegenerateHead, err.what());
    }
    t.translation = e.row(e.rows() - 1).transpose() + centroid.cast<S>();
    return t;
}

// A = Q L Q^T, b = Q b* - 2 Q L Q^T t, c = t^T Q L Q^T t - t^T Q b*.
template <typename S>
QuadricT<S> to_general_form(const StandardParaboloidT<S>& s, const RigidTransformT<S>& T) {
    const QuadricT<S> std_form = s.as_quadric();
    const Mat3T<S>& q = T.rotation;
    const Vec3T<S>& t = T.translation;
    QuadricT<S> out;
    out.A = q * std_form.A * q.transpose();
    const Vec3T<S> qb = q * std_form.b;
    out.b = qb - S(2.0) * (out.A * t);
    out.c = t.dot(out.A * t) - t.dot(qb);
    return out;
}

template <typename S>
struct InterfacePredictionT {
    StandardParaboloidT<S> standard;
    RigidTransformT<S> ligand_frame;
    RigidTransformT<S> receptor_frame;
    QuadricT<S> ligand_surface;
    QuadricT<S> receptor_surface;

    const RigidTransformT<S>& frame(Side side) const { return side == Side::Ligand ? ligand_frame : receptor_frame; }
    const QuadricT<S>& surface(Side side) const {
        return side == Side::Ligand ? ligand_surface : receptor_surface;
    }
    Vec3T<S> peak(Side side) const { return frame(side).translation; }
    // Image of the standard z axis.
    Vec3T<S> normal(Side side) const { return frame(side).rotation.col(2); }
};
using InterfacePrediction = InterfacePredictionT<double>;

struct DockOptions {
    bool refine = true;  // false: refinement rotation is the identity
    DegeneracyPolicy policy = DegeneracyPolicy::Raise;
};

template <typename S>
struct DockPredictionT {
    RigidTransformT<S> transform;  // ligand input pose -> docked pose
    InterfacePredictionT<S> interfaces;
    S theta = S(0.0);
};
using DockPrediction = DockPredictionT<double>;

template <typename S>
DockPredictionT<S> dock_from_heads(const HeadOutputsT<S>& heads, const Vec3& ligand_centroid,
                                   const Vec3& receptor_centroid, const DockOptions& opt = {}) {
    DockPredictionT<S> out;
    InterfacePredictionT<S>& iface = out.interfaces;
    iface.standard = predict_standard_form<S>(heads.ligand_F, heads.receptor_F);
    iface.ligand_frame = predict_se3<S>(heads.ligand_E, ligand_centroid, opt.policy);
    iface.receptor_frame = predict_se3<S>(heads.receptor_E, receptor_centroid, opt.policy);
    iface.ligand_surface = to_general_form<S>(iface.standard, iface.ligand_frame);
    iface.receptor_surface = to_general_form<S>(iface.standard, iface.receptor_frame);
    out.theta = refinement_angle<S>(heads.ligand_F, heads.receptor_F);
    const Mat3T<S> qr = opt.refine ? refinement_rotation<S>(out.theta) : Mat3T<S>::Identity();
    out.transform = compose_relative<S>(iface.ligand_frame, iface.receptor_frame, qr);
    return out;
}

template <typename S>
HeadOutputsT<S> run_heads(const ProteinGraph& ligand, const ProteinGraph& receptor, const BoundParams<S>& p,
                          const ForwardOptions& fwd = {}) {
    const PairState<S> s = epit_forward<S>(ligand, receptor, p, fwd);
    return {compute_F<S>(s.ligand.h, s.receptor.h, p), compute_F<S>(s.receptor.h, s.ligand.h, p),
            compute_E<S>(s.ligand, p), compute_E<S>(s.receptor, p)};
}

Vec3 centroid(const Points& coords);

struct DockingResult {
    DockPrediction prediction;
    HeadOutputs heads;
    Points docked_ligand;
};

DockingResult dock(const ProteinGraph& ligand, const ProteinGraph& receptor, const ModelParams& params,
                   const DockOptions& opt = {});

}  // namespace paradock
