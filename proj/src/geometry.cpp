#include "paradock/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <numbers>

namespace paradock {

Points apply(const RigidTransform& t, const Points& points) {
    Points out = points * t.rotation.transpose();
    out.rowwise() += t.translation.transpose();
    return out;
}

bool is_rotation(const Mat3& q, double tol) {
    return (q.transpose() * q - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(q.determinant() - 1.0) <= tol;
}

double rotation_angle(const Mat3& q) {
    const double c = std::clamp((q.trace() - 1.0) / 2.0, -1.0, 1.0);
    // acos loses precision near 0; use the skew part there.
    const Vec3 w(q(2, 1) - q(1, 2), q(0, 2) - q(2, 0), q(1, 0) - q(0, 1));
    return std::atan2(0.5 * w.norm(), c);
}

SymmetricEigen3 jacobi_eigen(const Mat3& symmetric) {
    Mat3 a = 0.5 * (symmetric + symmetric.transpose());
    Mat3 v = Mat3::Identity();
    constexpr int kMaxSweeps = 30;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        const double off = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
        const double scale = a.squaredNorm();
        if (off == 0.0 || off <= 1e-36 * scale) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
                rot(p, p) = c;
                rot(q, q) = c;
                rot(p, q) = s;
                rot(q, p) = -s;
                a = rot.transpose() * a * rot;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                v = v * rot;
            }
        }
    }
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });
    SymmetricEigen3 out;
    for (int k = 0; k < 3; ++k) {
        out.values(k) = a(order[k], order[k]);
        out.vectors.col(k) = v.col(order[k]);
    }
    return out;
}

Mat3 sqrt_psd3(const Mat3& L) {
    if ((L - L.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw Error(ErrorCode::NotPSD, "sqrt_psd3: matrix is not symmetric");
    }
    const SymmetricEigen3 eig = jacobi_eigen(L);
    if (eig.values(0) < -1e-10) {
        throw Error(ErrorCode::NotPSD, "sqrt_psd3: negative eigenvalue " + std::to_string(eig.values(0)));
    }
    const Vec3 roots = eig.values.cwiseMax(0.0).cwiseSqrt();
    return eig.vectors * roots.asDiagonal() * eig.vectors.transpose();
}

namespace {

struct PolarParts {
    Mat3 rotation;
    Mat3 basis;    // eigenvectors of R R^T
    Vec3 singular; // square roots of its eigenvalues
};

PolarParts polar_parts(const Mat3& R) {
    if (!(R.determinant() > 0.0)) {
        throw Error(ErrorCode::DegenerateMatrix, "polar_rotation requires det(R) > 0");
    }
    const SymmetricEigen3 eig = jacobi_eigen(R * R.transpose());
    const Vec3 sigma = eig.values.cwiseMax(0.0).cwiseSqrt();
    if (sigma(0) < 1e-8 * sigma(2)) {
        throw Error(ErrorCode::NearSingular, "polar_rotation: smallest singular value too small");
    }
    const Mat3 inv_root = eig.vectors * sigma.cwiseInverse().asDiagonal() * eig.vectors.transpose();
    return {inv_root * R, eig.vectors, sigma};
}

}  // namespace

Mat3 polar_rotation(const Mat3& R) { return polar_parts(R).rotation; }

Mat3T<ad::Var> polar_rotation(const Mat3T<ad::Var>& R) {
    Mat3 values;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) values(i, j) = R(i, j).value();
    const PolarParts parts = polar_parts(values);
    const Mat3& Q = parts.rotation;
    const Mat3& S = parts.basis;
    Mat3 denom;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) denom(i, j) = parts.singular(i) + parts.singular(j);

    // With R = U Q and dQ = Omega Q, U Omega + Omega U = dR Q^T - Q dR^T,
    // so for an upstream gradient G: dL/dR = (Y - Y^T) Q, where
    // Y = S ((S^T G Q^T S) ./ (s_i + s_j)) S^T.
    Mat3T<ad::Var> out;
    for (int k = 0; k < 3; ++k) {
        for (int l = 0; l < 3; ++l) {
            Mat3 G = Mat3::Zero();
            G(k, l) = 1.0;
            const Mat3 M = (S.transpose() * G * Q.transpose() * S).cwiseQuotient(denom);
            const Mat3 Y = S * M * S.transpose();
            const Mat3 J = (Y - Y.transpose()) * Q;
            ad::NodeBuilder nb;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) nb.add(R(i, j), J(i, j));
            out(k, l) = nb.finish(Q(k, l));
        }
    }
    return out;
}

RigidTransform kabsch(const Points& P, const Points& Q) {
    if (P.rows() != Q.rows()) throw Error(ErrorCode::ShapeMismatch, "kabsch: point counts differ");
    if (P.rows() < 3) throw Error(ErrorCode::TooFewPoints, "kabsch needs at least 3 points");
    const Vec3 pm = P.colwise().mean().transpose();
    const Vec3 qm = Q.colwise().mean().transpose();
    const Points Pc = P.rowwise() - pm.transpose();
    const Points Qc = Q.rowwise() - qm.transpose();
    const Mat3 H = Pc.transpose() * Qc;
    Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 s = svd.singularValues();
    if (s(0) < 1e-10 || s(1) < 1e-10 * s(0)) {
        throw Error(ErrorCode::DegenerateConfiguration, "kabsch: points are collinear or coincident");
    }
    const Mat3 U = svd.matrixU();
    const Mat3 V = svd.matrixV();
    Vec3 d(1.0, 1.0, 1.0);
    if ((V * U.transpose()).determinant() < 0.0) d(2) = -1.0;
    RigidTransform out;
    out.rotation = V * d.asDiagonal() * U.transpose();
    out.translation = qm - out.rotation * pm;
    return out;
}

Mat3 random_rotation(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u1 = unit(rng);
    const double u2 = unit(rng);
    const double u3 = unit(rng);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double a = std::sqrt(1.0 - u1);
    const double b = std::sqrt(u1);
    const Eigen::Quaterniond q(a * std::sin(two_pi * u2), a * std::cos(two_pi * u2),
                               b * std::sin(two_pi * u3), b * std::cos(two_pi * u3));
    return q.normalized().toRotationMatrix();
}

Mat3 axis_angle(const Vec3& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace paradock
