#include "doctest.h"
#include "test_support.hpp"

#include "paradock/dock.hpp"

#include <cmath>

using namespace paradock;
using paradock::testing::random_points;
using paradock::testing::random_transform;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.embed = 8;
    cfg.graph.embed_dim = 8;
    cfg.graph.k = 6;
    return cfg;
}

ProteinGraph random_graph(std::mt19937_64& rng, int n, const GraphConfig& cfg) {
    const Points x = random_points(rng, n, 7.0);
    std::vector<int> types(n), pos(n);
    for (int i = 0; i < n; ++i) {
        types[i] = (3 * i + 1) % kNumResidueTypes;
        pos[i] = i;
    }
    return build_graph(x, types, pos, cfg);
}

double quadric_diff(const Quadric& a, const Quadric& b) {
    return std::max({(a.A - b.A).cwiseAbs().maxCoeff(), (a.b - b.b).cwiseAbs().maxCoeff(), std::abs(a.c - b.c)});
}

double transform_diff(const RigidTransform& a, const RigidTransform& b) {
    return std::max((a.rotation - b.rotation).cwiseAbs().maxCoeff(),
                    (a.translation - b.translation).cwiseAbs().maxCoeff());
}

Eigen::MatrixXd row4(double a, double b, double c, double d) {
    Eigen::MatrixXd f(1, 4);
    f << a, b, c, d;
    return f;
}

// E whose blocks sum (after transposition) to q, last row t.
Eigen::MatrixXd head_for(const Mat3& q, const Vec3& t, int m) {
    Eigen::MatrixXd e(3 * m + 1, 3);
    for (int j = 0; j < m; ++j) e.block(3 * j, 0, 3, 3) = q.transpose() / m;
    e.row(3 * m) = t.transpose();
    return e;
}

}  // namespace

TEST_CASE("predict_standard_form: softplus of summed outputs") {
    const auto s = predict_standard_form<double>(row4(0.3, -0.2, 0.4, 5), row4(-0.3, 0.2, 0.6, -1));
    CHECK(s.lambda1 == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(s.lambda2 == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(s.beta == doctest::Approx(1.0).epsilon(1e-15));

    const auto big = predict_standard_form<double>(row4(40, 30, 1, 0), row4(10, 5, -1, 0));
    CHECK(big.lambda1 == doctest::Approx(50.0).epsilon(1e-15));
    CHECK(big.lambda2 == doctest::Approx(35.0).epsilon(1e-15));
    CHECK(big.beta == 0.0);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(0.0, 20.0);
    for (int i = 0; i < 200; ++i) {
        const auto r = predict_standard_form<double>(row4(nd(rng), nd(rng), 0, 0), row4(nd(rng), nd(rng), 0, 0));
        CHECK(r.lambda1 > 0.0);
        CHECK(r.lambda2 > 0.0);
    }
}

TEST_CASE("refinement_angle: difference of the last outputs") {
    const Eigen::MatrixXd a = row4(0, 0, 0, 1.25), b = row4(1, 2, 3, -0.5);
    CHECK(refinement_angle<double>(a, a) == 0.0);
    CHECK(refinement_angle<double>(a, b) == 1.75);
    CHECK(refinement_angle<double>(b, a) == -1.75);
    CHECK(refinement_angle<double>(row4(0, 0, 0, 10), row4(0, 0, 0, 0)) == 10.0);  // not wrapped
}

TEST_CASE("predict_se3: rotation blocks, sign rule and degeneracy") {
    std::mt19937_64 rng(5);
    const Mat3 q = random_rotation(rng);
    const Vec3 c(1.0, -2.0, 3.5);
    const RigidTransform t = predict_se3<double>(head_for(q, Vec3::Zero(), 3), c);
    CHECK(testing::max_abs_diff(t.rotation, q) < 1e-12);
    CHECK((t.translation - c).norm() < 1e-15);

    // det < 0: same result as the negated blocks.
    Eigen::MatrixXd neg = head_for(q, Vec3(0.5, 0, 0), 3);
    neg.topRows(9) *= -1.0;
    const RigidTransform tn = predict_se3<double>(neg, c);
    CHECK(testing::max_abs_diff(tn.rotation, q) < 1e-12);
    CHECK((tn.translation - (c + Vec3(0.5, 0, 0))).norm() < 1e-15);

    // Generic non-orthogonal head.
    Eigen::MatrixXd e = Eigen::MatrixXd::Random(10, 3);
    const RigidTransform g = predict_se3<double>(e, Vec3::Zero());
    CHECK(is_rotation(g.rotation));
    Eigen::MatrixXd e_flip = e;
    e_flip.topRows(9) *= -1.0;
    CHECK(testing::max_abs_diff(predict_se3<double>(e_flip, Vec3::Zero()).rotation, g.rotation) < 1e-12);

    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(10, 3);
    CHECK_THROWS_AS(predict_se3<double>(zero, c), Error);
    try {
        predict_se3<double>(zero, c);
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::DegenerateHead);
    }
    const RigidTransform reg = predict_se3<double>(zero, c, DegeneracyPolicy::Regularize);
    CHECK(testing::max_abs_diff(reg.rotation, Mat3::Identity()) < 1e-12);
    CHECK_THROWS_AS(predict_se3<double>(Eigen::MatrixXd::Zero(9, 3), c), Error);
}

TEST_CASE("predict_se3: equivariant through the network heads") {
    const ModelConfig cfg = small_config();
    const BoundParams<double> p(init_params(cfg, 3));
    std::mt19937_64 rng(9);
    const ProteinGraph g1 = random_graph(rng, 9, cfg.graph);
    const ProteinGraph g2 = random_graph(rng, 11, cfg.graph);
    const HeadOutputs h = run_heads<double>(g1, g2, p);
    const RigidTransform ref = predict_se3<double>(h.ligand_E, centroid(g1.coords));
    for (int trial = 0; trial < 10; ++trial) {
        const RigidTransform w = random_transform(rng);
        const ProteinGraph g1m = moved(g1, w);
        const HeadOutputs hm = run_heads<double>(g1m, g2, p);
        const RigidTransform got = predict_se3<double>(hm.ligand_E, centroid(g1m.coords));
        CHECK(transform_diff(got, w.after(ref)) < 1e-9);
    }
}

TEST_CASE("to_general_form: identity, fixed case and agreement with transform_quadric") {
    const StandardParaboloid s{0.7, 1.3, -2.0};
    const Quadric id = to_general_form<double>(s, RigidTransform::identity());
    CHECK(quadric_diff(id, s.as_quadric()) == 0.0);

    RigidTransform up;
    up.translation = Vec3(0, 0, 1);
    const Quadric q = to_general_form<double>(StandardParaboloid{1, 1, 1}, up);
    Quadric expect;
    expect.A = Vec3(1, 1, 0).asDiagonal();
    expect.b = Vec3(0, 0, 1);
    expect.c = -1.0;
    CHECK(quadric_diff(q, expect) < 1e-15);

    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const StandardParaboloid r = testing::random_paraboloid(rng);
        const RigidTransform t = random_transform(rng);
        const Quadric a = to_general_form<double>(r, t);
        const Quadric b = transform_quadric(r.as_quadric(), t);
        const double scale = std::max(1.0, std::abs(b.c));
        CHECK(quadric_diff(a, b) < 1e-12 * scale);
    }
}

TEST_CASE("dock_from_heads: oracle heads recover the composed motion") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const RigidTransform t1 = random_transform(rng);
        const RigidTransform t2 = random_transform(rng);
        const Vec3 c1 = Vec3::Random(), c2 = Vec3::Random();
        HeadOutputs h;
        h.ligand_F = row4(0.1, 0.2, -1.0, 0.3);
        h.receptor_F = row4(-0.2, 0.4, -0.5, -0.1);
        h.ligand_E = head_for(t1.rotation, t1.translation - c1, 3);
        h.receptor_E = head_for(t2.rotation, t2.translation - c2, 3);
        const DockPrediction d = dock_from_heads<double>(h, c1, c2);
        CHECK(d.theta == doctest::Approx(0.4));
        const RigidTransform expect = compose_relative<double>(t1, t2, refinement_rotation<double>(0.4));
        CHECK(transform_diff(d.transform, expect) < 1e-12);
        CHECK(transform_diff(d.interfaces.ligand_frame, t1) < 1e-12);
        CHECK(std::abs(d.interfaces.normal(Side::Receptor).norm() - 1.0) < 1e-12);
        CHECK((d.interfaces.peak(Side::Ligand) - t1.translation).norm() < 1e-12);

        DockOptions no_ref;
        no_ref.refine = false;
        const DockPrediction n = dock_from_heads<double>(h, c1, c2, no_ref);
        const RigidTransform plain = compose_relative<double>(n.interfaces.ligand_frame, n.interfaces.receptor_frame,
                                                              Mat3::Identity());
        CHECK(n.transform.rotation == plain.rotation);
        CHECK(n.transform.translation == plain.translation);

        // Both general surfaces pull back to the shared standard form.
        for (Side side : {Side::Ligand, Side::Receptor}) {
            const Quadric back = transform_quadric(d.interfaces.surface(side), d.interfaces.frame(side).inverse());
            CHECK(quadric_diff(back, d.interfaces.standard.as_quadric()) < 1e-10);
        }
    }
}

TEST_CASE("dock: identity heads give the identity motion") {
    HeadOutputs h;
    h.ligand_F = row4(0, 0, 1, 0.2);
    h.receptor_F = row4(0, 0, 1, 0.2);
    h.ligand_E = head_for(Mat3::Identity(), Vec3::Zero(), 3);
    h.receptor_E = head_for(Mat3::Identity(), Vec3::Zero(), 3);
    const DockPrediction d = dock_from_heads<double>(h, Vec3(1, 2, 3), Vec3(1, 2, 3));
    CHECK(transform_diff(d.transform, RigidTransform::identity()) < 1e-15);
}

TEST_CASE("dock: independent motions leave the docked complex unchanged") {
    const ModelConfig cfg = small_config();
    const ModelParams params = init_params(cfg, 17);
    std::mt19937_64 rng(13);
    const ProteinGraph lig = random_graph(rng, 8, cfg.graph);
    const ProteinGraph rec = random_graph(rng, 10, cfg.graph);
    const DockingResult ref = dock(lig, rec, params);
    CHECK((ref.docked_ligand - apply(ref.prediction.transform, lig.coords)).cwiseAbs().maxCoeff() == 0.0);

    auto cross = [](const Points& a, const Points& b) {
        Eigen::MatrixXd d(a.rows(), b.rows());
        for (int i = 0; i < a.rows(); ++i)
            for (int j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).norm();
        return d;
    };
    const Eigen::MatrixXd d_ref = cross(ref.docked_ligand, rec.coords);

    for (int trial = 0; trial < 20; ++trial) {
        const RigidTransform m1 = random_transform(rng);
        const RigidTransform m2 = random_transform(rng);
        const ProteinGraph lig_m = moved(lig, m1);
        const ProteinGraph rec_m = moved(rec, m2);
        const DockingResult out = dock(lig_m, rec_m, params);
        CHECK((cross(out.docked_ligand, rec_m.coords) - d_ref).cwiseAbs().maxCoeff() < 1e-6);
        // Ligand pre-moved: composed motion is unchanged.
        const DockingResult only_lig = dock(lig_m, rec, params);
        CHECK(transform_diff(only_lig.prediction.transform.after(m1), ref.prediction.transform) < 1e-6);
        // Receptor moved: docked ligand follows exactly.
        const DockingResult only_rec = dock(lig, rec_m, params);
        CHECK((only_rec.docked_ligand - apply(m2, ref.docked_ligand)).cwiseAbs().maxCoeff() < 1e-6);

        // Ligand surface moves per the transport rule; receptor surface is untouched.
        const InterfacePrediction& a = ref.prediction.interfaces;
        const InterfacePrediction& b = only_lig.prediction.interfaces;
        const Quadric moved_surface = transform_quadric(a.ligand_surface, m1);
        CHECK(quadric_diff(b.ligand_surface, moved_surface) < 1e-8 * std::max(1.0, std::abs(moved_surface.c)));
        CHECK(quadric_diff(b.receptor_surface, a.receptor_surface) < 1e-8);
        CHECK(only_lig.prediction.theta == doctest::Approx(ref.prediction.theta).epsilon(1e-12));
    }
}
