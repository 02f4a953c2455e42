#pragma once

#include "paradock/geometry.hpp"

#include <random>

namespace paradock::testing {

inline RigidTransform random_transform(std::mt19937_64& rng, double spread = 10.0) {
    std::uniform_real_distribution<double> u(-spread, spread);
    RigidTransform t;
    t.rotation = random_rotation(rng);
    t.translation = Vec3(u(rng), u(rng), u(rng));
    return t;
}

inline Points random_points(std::mt19937_64& rng, int n, double spread = 10.0) {
    std::uniform_real_distribution<double> u(-spread, spread);
    Points p(n, 3);
    for (int i = 0; i < n; ++i) p.row(i) << u(rng), u(rng), u(rng);
    return p;
}

inline StandardParaboloid random_paraboloid(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> lam(0.05, 2.0);
    std::uniform_real_distribution<double> beta(0.5, 3.0);
    std::bernoulli_distribution sign(0.5);
    return {lam(rng), lam(rng), sign(rng) ? beta(rng) : -beta(rng)};
}

// Points lying exactly on a standard paraboloid (beta != 0).
inline Points sample_surface(std::mt19937_64& rng, const StandardParaboloid& s, int n) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    Points p(n, 3);
    for (int i = 0; i < n; ++i) {
        const double x = u(rng), y = u(rng);
        p.row(i) << x, y, -(s.lambda1 * x * x + s.lambda2 * y * y) / s.beta;
    }
    return p;
}

inline double max_abs_diff(const Mat3& a, const Mat3& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace paradock::testing
