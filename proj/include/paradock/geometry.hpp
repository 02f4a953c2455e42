#pragma once

// Rigid-motion and quadric-surface algebra.
//
// Convention: column vectors everywhere, x' = Q x + t. Point clouds are
// stored one point per row (N x 3); applying a transform to a cloud is
// P * Q^T + 1 t^T.

#include "paradock/autodiff.hpp"
#include "paradock/error.hpp"

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <type_traits>

namespace paradock {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;

template <typename S>
using Vec3T = Eigen::Matrix<S, 3, 1>;
template <typename S>
using Mat3T = Eigen::Matrix<S, 3, 3>;

template <typename S>
struct RigidTransformT {
    Mat3T<S> rotation = Mat3T<S>::Identity();
    Vec3T<S> translation = Vec3T<S>::Zero();

    static RigidTransformT identity() { return {}; }

    Vec3T<S> apply(const Vec3T<S>& x) const { return rotation * x + translation; }

    RigidTransformT inverse() const {
        RigidTransformT inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(inv.rotation * translation);
        return inv;
    }

    // (this ∘ other)(x) = this(other(x))
    RigidTransformT after(const RigidTransformT& other) const {
        RigidTransformT out;
        out.rotation = rotation * other.rotation;
        out.translation = rotation * other.translation + translation;
        return out;
    }
};

using RigidTransform = RigidTransformT<double>;

// Transform every row of a point cloud.
Points apply(const RigidTransform& t, const Points& points);

// Orthonormality and det = +1 within tol.
bool is_rotation(const Mat3& q, double tol = 1e-9);

// Geodesic angle of a rotation (radians, in [0, pi]).
double rotation_angle(const Mat3& q);

// Quadric <Ax,x> + <b,x> + c = 0.
template <typename S>
struct QuadricT {
    Mat3T<S> A = Mat3T<S>::Zero();
    Vec3T<S> b = Vec3T<S>::Zero();
    S c = S(0.0);

    S evaluate(const Vec3T<S>& x) const { return x.dot(A * x) + b.dot(x) + c; }
};

using Quadric = QuadricT<double>;

// lambda1 x^2 + lambda2 y^2 + beta z = 0, peak at the origin, axis z.
template <typename S>
struct StandardParaboloidT {
    S lambda1 = S(1.0);
    S lambda2 = S(1.0);
    S beta = S(0.0);

    QuadricT<S> as_quadric() const {
        QuadricT<S> q;
        q.A(0, 0) = lambda1;
        q.A(1, 1) = lambda2;
        q.b(2) = beta;
        return q;
    }
};

using StandardParaboloid = StandardParaboloidT<double>;

// Coefficients of the image of q under x -> Q x + t.
template <typename S>
QuadricT<S> transform_quadric(const QuadricT<S>& q, const RigidTransformT<S>& T) {
    const Mat3T<S>& Q = T.rotation;
    const Vec3T<S>& t = T.translation;
    const Mat3T<S> QAQt = Q * q.A * Q.transpose();
    const Mat3T<S> sym = q.A + q.A.transpose();
    const Vec3T<S> Qb = Q * q.b;
    QuadricT<S> out;
    out.A = QAQt;
    out.b = Qb - Q * sym * Q.transpose() * t;
    out.c = q.c + t.dot(QAQt * t) - t.dot(Qb);
    return out;
}

// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi sweeps.
// Eigenvalues ascending; eigenvectors are the matching columns.
struct SymmetricEigen3 {
    Vec3 values;
    Mat3 vectors;
};
SymmetricEigen3 jacobi_eigen(const Mat3& symmetric);

// Principal square root of a symmetric PSD matrix.
Mat3 sqrt_psd3(const Mat3& L);

// Rotation factor Q = (R R^T)^(-1/2) R of the polar decomposition.
// Requires det(R) > 0 and sigma_min >= 1e-8 sigma_max.
Mat3 polar_rotation(const Mat3& R);

// Same rotation; on a tape, records the exact Jacobian of the polar factor.
Mat3T<ad::Var> polar_rotation(const Mat3T<ad::Var>& R);

template <typename Derived>
    requires(std::is_same_v<typename Derived::Scalar, double> && !std::is_same_v<Derived, Mat3>)
Mat3 polar_rotation(const Eigen::MatrixBase<Derived>& R) {
    return polar_rotation(Mat3(R));
}

// Ligand-to-receptor motion Q2 Qr Q1^T, t2 - Q2 Qr Q1^T t1.
template <typename S>
RigidTransformT<S> compose_relative(const RigidTransformT<S>& T1, const RigidTransformT<S>& T2,
                                    const Mat3T<S>& Qr) {
    RigidTransformT<S> out;
    out.rotation = T2.rotation * Qr * T1.rotation.transpose();
    out.translation = T2.translation - out.rotation * T1.translation;
    return out;
}

// [[cos, sin, 0], [-sin, cos, 0], [0, 0, 1]]
template <typename S>
Mat3T<S> refinement_rotation(const S& theta) {
    using std::cos;
    using std::sin;
    using ad::cos;
    using ad::sin;
    const S c = cos(theta);
    const S s = sin(theta);
    Mat3T<S> q = Mat3T<S>::Identity();
    q(0, 0) = c;
    q(0, 1) = s;
    q(1, 0) = -s;
    q(1, 1) = c;
    return q;
}

// Least-squares rigid transform T minimising sum |T(P_i) - Q_i|^2.
RigidTransform kabsch(const Points& P, const Points& Q);

// Planar rotation R (det +1) minimising sum |R p_i - q_i|^2 after both sets
// are mean-centred.
template <typename S>
Eigen::Matrix<S, 2, 2> kabsch2d(const Eigen::Matrix<S, Eigen::Dynamic, 2>& P,
                                const Eigen::Matrix<S, Eigen::Dynamic, 2>& Q) {
    using std::sqrt;
    using ad::sqrt;
    if (P.rows() != Q.rows()) throw Error(ErrorCode::ShapeMismatch, "kabsch2d: point counts differ");
    if (P.rows() < 2) throw Error(ErrorCode::TooFewPoints, "kabsch2d needs at least 2 points");
    const Eigen::Matrix<S, 1, 2> pm = P.colwise().mean();
    const Eigen::Matrix<S, 1, 2> qm = Q.colwise().mean();
    S cos_sum(0.0);
    S sin_sum(0.0);
    double spread_p = 0.0;
    double spread_q = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        const S px = P(i, 0) - pm(0), py = P(i, 1) - pm(1);
        const S qx = Q(i, 0) - qm(0), qy = Q(i, 1) - qm(1);
        cos_sum += px * qx + py * qy;
        sin_sum += px * qy - py * qx;
        spread_p += ad::value(px) * ad::value(px) + ad::value(py) * ad::value(py);
        spread_q += ad::value(qx) * ad::value(qx) + ad::value(qy) * ad::value(qy);
    }
    const S r = sqrt(cos_sum * cos_sum + sin_sum * sin_sum);
    if (spread_p < 1e-20 || spread_q < 1e-20 || ad::value(r) < 1e-12) {
        throw Error(ErrorCode::DegenerateConfiguration, "kabsch2d: planar alignment is undetermined");
    }
    Eigen::Matrix<S, 2, 2> rot;
    rot(0, 0) = cos_sum / r;
    rot(0, 1) = -sin_sum / r;
    rot(1, 0) = sin_sum / r;
    rot(1, 1) = cos_sum / r;
    return rot;
}

// Haar-uniform rotation (uniform unit quaternion).
Mat3 random_rotation(std::mt19937_64& rng);

// Rotation about a unit axis by angle (right-hand rule).
Mat3 axis_angle(const Vec3& axis, double angle);

}  // namespace paradock
