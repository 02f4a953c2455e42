#include "doctest.h"
#include "test_support.hpp"

#include "paradock/losses.hpp"

#include <cmath>

using namespace paradock;
using paradock::testing::random_points;
using paradock::testing::random_transform;

namespace {

InterfacePrediction make_interface(const StandardParaboloid& s, const RigidTransform& t1, const RigidTransform& t2) {
    InterfacePrediction i;
    i.standard = s;
    i.ligand_frame = t1;
    i.receptor_frame = t2;
    i.ligand_surface = to_general_form<double>(s, t1);
    i.receptor_surface = to_general_form<double>(s, t2);
    return i;
}

Points rows(std::initializer_list<Vec3> pts) {
    Points p(static_cast<Eigen::Index>(pts.size()), 3);
    Eigen::Index r = 0;
    for (const Vec3& v : pts) p.row(r++) = v.transpose();
    return p;
}

Points planar_rotate(const Points& p, double theta) {
    Mat3 q = refinement_rotation<double>(theta);
    return p * q.transpose();
}

}  // namespace

TEST_CASE("fit_loss: peaks, surface point and duplication") {
    std::mt19937_64 rng(1);
    const StandardParaboloid s{0.5, 1.5, -2.0};
    const RigidTransform t1 = random_transform(rng), t2 = random_transform(rng);
    const InterfacePrediction iface = make_interface(s, t1, t2);
    const Points at_peak1 = rows({t1.translation, t1.translation});
    const Points at_peak2 = rows({t2.translation, t2.translation});
    CHECK(fit_loss<double>(iface, at_peak1, at_peak2) < 1e-20);

    // Standard frame, identity T: (1, 0, z) on the surface has z = -lambda1 / beta.
    const InterfacePrediction std_iface = make_interface(s, RigidTransform::identity(), RigidTransform::identity());
    const double z = -s.lambda1 / s.beta;
    const Points on_surface = rows({Vec3(1, 0, z)});
    const Points origin = rows({Vec3::Zero()});
    CHECK(fit_loss<double>(std_iface, on_surface, origin) == doctest::Approx(std::abs(z)).epsilon(1e-15));

    const Points p1 = random_points(rng, 5), p2 = random_points(rng, 5);
    Points d1(10, 3), d2(10, 3);
    d1 << p1, p1;
    d2 << p2, p2;
    CHECK(fit_loss<double>(iface, d1, d2) == doctest::Approx(fit_loss<double>(iface, p1, p2)).epsilon(1e-14));
    CHECK_THROWS_AS(fit_loss<double>(iface, Points(0, 3), Points(0, 3)), Error);
}

TEST_CASE("overlap_loss: separation, scalar branches and sign symmetry") {
    // Standard surface z = -(x^2 + y^2)/beta with beta = 1: phi = x^2 + y^2 + z.
    const StandardParaboloid s{1.0, 1.0, 1.0};
    const InterfacePrediction iface = make_interface(s, RigidTransform::identity(), RigidTransform::identity());
    const Points below = rows({Vec3(0, 0, -1), Vec3(0.5, 0, -2)});
    const Points above = rows({Vec3(0, 0, 1), Vec3(1, 1, 0.5)});
    CHECK(overlap_loss<double>(iface, below, above) == 0.0);
    CHECK(overlap_loss<double>(iface, above, below) == 0.0);

    // phi = 4 for both single nodes: branches are 2 + 0 and 0 + 2.
    const Points four = rows({Vec3(0, 0, 4)});
    CHECK(overlap_loss<double>(iface, four, four) == doctest::Approx(2.0).epsilon(1e-15));

    std::mt19937_64 rng(4);
    const RigidTransform t1 = random_transform(rng), t2 = random_transform(rng);
    const InterfacePrediction a = make_interface(StandardParaboloid{0.3, 0.8, -1.2}, t1, t2);
    InterfacePrediction b = a;
    for (Quadric* q : {&b.ligand_surface, &b.receptor_surface}) {
        q->A = -q->A;
        q->b = -q->b;
        q->c = -q->c;
    }
    const Points x1 = random_points(rng, 12), x2 = random_points(rng, 9);
    const double la = overlap_loss<double>(a, x1, x2);
    CHECK(la > 0.0);
    CHECK(overlap_loss<double>(b, x1, x2) == doctest::Approx(la).epsilon(1e-14));
}

TEST_CASE("refinement_loss: planar fixtures") {
    std::mt19937_64 rng(2);
    const Points p1 = random_points(rng, 6, 3.0);
    const double quarter = M_PI / 4.0;
    const Points p2 = planar_rotate(p1, quarter);
    const RigidTransform id;

    auto same = refinement_target(p1, p1, id, id);
    REQUIRE(same.has_value());
    CHECK(refinement_loss<double>(0.0, *same) < 1e-24);

    auto target = refinement_target(p1, p2, id, id);
    REQUIRE(target.has_value());
    CHECK(refinement_loss<double>(quarter, *target) < 1e-24);
    CHECK(refinement_loss<double>(0.0, *target) == doctest::Approx(4.0 - 4.0 * std::cos(quarter)).epsilon(1e-12));
    CHECK(refinement_loss<double>(0.0, *target) == doctest::Approx(1.17157).epsilon(1e-5));

    // Frames are removed before the planar alignment.
    const RigidTransform t1 = random_transform(rng), t2 = random_transform(rng);
    auto framed = refinement_target(apply(t1, p1), apply(t2, p2), t1, t2);
    REQUIRE(framed.has_value());
    CHECK((*framed - *target).cwiseAbs().maxCoeff() < 1e-12);

    // All pockets at one point: undetermined.
    const Points point = rows({Vec3(1, 2, 3), Vec3(1, 2, 3)});
    CHECK_FALSE(refinement_target(point, point, id, id).has_value());
}

TEST_CASE("dock_loss: exact inverse and Frobenius angle formula") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const RigidTransform gt = random_transform(rng);
        const RigidTransform inv = gt.inverse();
        CHECK(dock_loss<double>(inv, gt.rotation, gt.translation) < 1e-24);
        CHECK(inv.after(gt).translation.norm() < 1e-12);

        const double phi = std::uniform_real_distribution<double>(0.0, M_PI)(rng);
        const Vec3 axis = Vec3::Random().normalized();
        RigidTransform off = inv;
        off.rotation = axis_angle(axis, phi) * inv.rotation;
        const double direct = (off.rotation - gt.rotation.transpose()).squaredNorm();
        CHECK(dock_loss<double>(off, gt.rotation, gt.translation) == doctest::Approx(direct).epsilon(1e-12));
        CHECK(direct == doctest::Approx(8.0 * std::pow(std::sin(phi / 2.0), 2)).epsilon(1e-12));
    }
    CHECK(dock_loss<double>(RigidTransform::identity(), Mat3::Identity(), Vec3::Zero()) == 0.0);
}

TEST_CASE("total: weights, ablations and report") {
    LossTermsT<double> t;
    t.fit = 1.5;
    t.overlap = 2.0;
    t.refinement = 0.25;
    t.dock = 4.0;
    CHECK(weighted_total<double>(t, LossWeights{}) == 7.75);
    CHECK(weighted_total<double>(t, LossWeights{0, 0, 0, 0}) == 0.0);
    CHECK(weighted_total<double>(t, ablation_weights("-fit-overlap")) == 4.25);
    CHECK(ablation_names().size() == 7);
    for (const auto& name : ablation_names()) CHECK_NOTHROW(ablation_weights(name));
    CHECK_THROWS_AS(ablation_weights("bogus"), Error);

    const LossReport r = make_report<double>(t, ablation_weights("-ref"));
    CHECK(r.total == 7.5);
    const nlohmann::json j = r;
    CHECK(j["weights"]["refinement"] == 0.0);
    CHECK(j["dock"] == 4.0);
    CHECK_THROWS_AS(nlohmann::json({{"fit", -1.0}}).get<LossWeights>(), Error);
}

TEST_CASE("losses: invariant under a rigid motion of one protein and its interface") {
    std::mt19937_64 rng(8);
    const StandardParaboloid s{0.4, 0.9, -1.1};
    const RigidTransform t1 = random_transform(rng), t2 = random_transform(rng);
    const InterfacePrediction iface = make_interface(s, t1, t2);
    const Points x1 = random_points(rng, 10), x2 = random_points(rng, 12);
    const Points k1 = random_points(rng, 4), k2 = random_points(rng, 4);
    const double fit = fit_loss<double>(iface, k1, k2);
    const double over = overlap_loss<double>(iface, x1, x2);
    const Eigen::Matrix2d target = *refinement_target(k1, k2, t1, t2);
    for (int i = 0; i < 20; ++i) {
        const RigidTransform m = random_transform(rng);
        const InterfacePrediction mi = make_interface(s, m.after(t1), t2);
        CHECK(std::abs(fit_loss<double>(mi, apply(m, k1), k2) - fit) < 1e-8);
        CHECK(std::abs(overlap_loss<double>(mi, apply(m, x1), x2) - over) < 1e-8);
        const Eigen::Matrix2d moved = *refinement_target(apply(m, k1), k2, m.after(t1), t2);
        CHECK((moved - target).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("loss_terms: skipped components are exactly zero") {
    std::mt19937_64 rng(6);
    const InterfacePrediction iface =
        make_interface(StandardParaboloid{0.4, 0.9, -1.1}, random_transform(rng), random_transform(rng));
    DockPrediction pred;
    pred.interfaces = iface;
    pred.transform = random_transform(rng);
    pred.theta = 0.3;
    LossSample sample;
    sample.ligand = random_points(rng, 6);
    sample.receptor = random_points(rng, 7);

    const auto no_pockets = loss_terms<double>(pred, sample, LossWeights{});
    CHECK(no_pockets.no_contacts);
    CHECK(no_pockets.fit == 0.0);
    CHECK(no_pockets.refinement == 0.0);
    CHECK(no_pockets.overlap > 0.0);
    CHECK(no_pockets.dock > 0.0);

    sample.ligand_pockets = random_points(rng, 3);
    sample.receptor_pockets = random_points(rng, 3);
    for (const auto& name : ablation_names()) {
        const LossWeights w = ablation_weights(name);
        const auto t = loss_terms<double>(pred, sample, w);
        CHECK((w.fit == 0.0) == (t.fit == 0.0));
        CHECK((w.overlap == 0.0) == (t.overlap == 0.0));
        CHECK((w.refinement == 0.0) == (t.refinement == 0.0));
        CHECK(t.dock > 0.0);
    }
}
