#include "doctest.h"
#include "gradient_check.hpp"

#include "paradock/error.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

using namespace paradock;
using paradock::testing::finite_difference_check;
using paradock::testing::tiny_model;
using paradock::testing::tiny_synth;
using paradock::testing::worst_relative;

namespace {

std::vector<ComplexRecord> tiny_records(std::uint64_t seed, int count, int ligand = 5, int receptor = 5) {
    std::mt19937_64 rng(seed);
    std::vector<ComplexRecord> out;
    for (int i = 0; i < count; ++i) {
        const SyntheticComplex c = make_synthetic(rng, tiny_synth(ligand, receptor), "c" + std::to_string(i));
        out.push_back(record_from_synthetic(c, tiny_model().graph));
    }
    return out;
}

std::vector<TrainingExample> tiny_batch(std::uint64_t seed, int count) {
    std::mt19937_64 rng(seed + 100);
    std::vector<TrainingExample> out;
    for (const auto& r : tiny_records(seed, count)) out.push_back(augment(r, draw_augmentation(rng, 10.0)));
    return out;
}

LossWeights only(double fit, double overlap, double refinement, double dock) {
    LossWeights w;
    w.fit = fit;
    w.overlap = overlap;
    w.refinement = refinement;
    w.dock = dock;
    return w;
}

TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.learning_rate = 1e-2;
    cfg.epochs = 3;
    return cfg;
}

}  // namespace

TEST_CASE("augment moves the ligand and its pockets, not the receptor") {
    const ComplexRecord rec = tiny_records(1, 1).front();
    REQUIRE(rec.pockets.size() > 0);
    std::mt19937_64 rng(2);
    const Augmentation aug = draw_augmentation(rng, 10.0);
    const TrainingExample ex = augment(rec, aug);
    RigidTransform t;
    t.rotation = aug.rotation;
    t.translation = aug.translation;
    CHECK((ex.sample.ligand - apply(t, rec.ligand.coords)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ex.sample.receptor == rec.receptor.coords);
    CHECK((ex.sample.ligand_pockets - apply(t, rec.pockets.ligand_midpoints)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ex.sample.receptor_pockets == rec.pockets.receptor_midpoints);
    CHECK(ex.sample.q_gt == aug.rotation);
    CHECK(ex.sample.t_gt == aug.translation);
    CHECK(ex.ligand.edge_features == rec.ligand.edge_features);

    const TrainingExample plain = augment(rec, Augmentation{});
    CHECK(plain.sample.ligand == rec.ligand.coords);
}

TEST_CASE("interface losses do not depend on the augmentation") {
    const ComplexRecord rec = tiny_records(3, 1).front();
    const ModelParams params = init_params(tiny_model(), 4);
    const LossWeights w = only(1, 1, 1, 0);
    const double base = evaluate_loss(params, {augment(rec, Augmentation{})}, w, true).report.total;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 5; ++i) {
        const double moved = evaluate_loss(params, {augment(rec, draw_augmentation(rng, 10.0))}, w, true).report.total;
        CHECK(std::abs(moved - base) < 1e-8 * std::max(1.0, std::abs(base)));
    }

    // The docking loss is invariant to the rotation drawn; the translation
    // enters through (Q - I) and only cancels for an identity prediction.
    const LossWeights all;
    const double full = evaluate_loss(params, {augment(rec, Augmentation{})}, all, true).report.total;
    for (int i = 0; i < 5; ++i) {
        Augmentation spin;
        spin.rotation = random_rotation(rng);
        const double moved = evaluate_loss(params, {augment(rec, spin)}, all, true).report.total;
        CHECK(std::abs(moved - full) < 1e-6);
    }
}

TEST_CASE("gradients match central differences on a tiny model") {
    const ModelParams params = init_params(tiny_model(), 6);
    const auto batch = tiny_batch(7, 2);
    const std::vector<std::pair<std::string, LossWeights>> cases = {
        {"fit", only(1, 0, 0, 0)},        {"overlap", only(0, 1, 0, 0)}, {"refinement", only(0, 0, 1, 0)},
        {"dock", only(0, 0, 0, 1)},       {"all", only(1, 1, 1, 1)},
    };
    for (const auto& [label, w] : cases) {
        CAPTURE(label);
        const auto errors = finite_difference_check(params, batch, w, true);
        for (const auto& e : errors) {
            CAPTURE(e.name);
            CHECK(e.relative < 1e-4);
        }
        CHECK(worst_relative(errors) < 1e-4);
    }
}

TEST_CASE("duplicated batch doubles the gradient; zero weights give zero gradient") {
    const ModelParams params = init_params(tiny_model(), 8);
    const auto batch = tiny_batch(9, 1);
    const auto twice = std::vector<TrainingExample>{batch.front(), batch.front()};
    const LossWeights w;
    const LossResult one = loss_gradient(params, batch, w, true);
    const LossResult two = loss_gradient(params, twice, w, true);
    CHECK(two.report.total == doctest::Approx(2.0 * one.report.total).epsilon(1e-14));
    for (std::size_t n = 0; n < one.gradient.values.size(); ++n)
        for (std::size_t k = 0; k < one.gradient.values[n].size(); ++k)
            CHECK(two.gradient.values[n][k] == doctest::Approx(2.0 * one.gradient.values[n][k]).epsilon(1e-12));

    const LossResult none = loss_gradient(params, batch, only(0, 0, 0, 0), true);
    CHECK(none.report.total == 0.0);
    CHECK(none.gradient.norm() == 0.0);
}

TEST_CASE("non-finite parameters raise NonFiniteLoss") {
    ModelParams params = init_params(tiny_model(), 10);
    params.tensors().front().data[0] = std::numeric_limits<double>::quiet_NaN();
    const auto batch = tiny_batch(11, 1);
    try {
        (void)evaluate_loss(params, batch, LossWeights{}, true);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFiniteLoss);
    }
}

TEST_CASE("clipping and Adam") {
    ModelParams p = init_params(tiny_model(), 12);
    GradientSet g = GradientSet::zeros_like(p);
    g.values[0][0] = 3.0;
    g.values[1][0] = -4.0;
    CHECK(clip_gradient(g, 1.0) == doctest::Approx(5.0));
    CHECK(g.norm() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g.values[0][0] == doctest::Approx(0.6));

    const ModelParams before = p;
    Adam adam(p);
    adam.step(p, g, 0.01);
    CHECK(adam.steps() == 1);
    // First step: lr * g / (|g| + eps) per entry.
    CHECK(p.tensors()[0].data[0] - before.tensors()[0].data[0] == doctest::Approx(-0.01 * 0.6 / (0.6 + 1e-8)));
    CHECK(p.tensors()[1].data[0] - before.tensors()[1].data[0] == doctest::Approx(0.01 * 0.8 / (0.8 + 1e-8)));
    CHECK(p.tensors()[0].data[1] == before.tensors()[0].data[1]);

    Adam restored = Adam::from_state(p, adam.state(p));
    ModelParams a = p, b = p;
    adam.step(a, g, 0.01);
    restored.step(b, g, 0.01);
    CHECK(a.tensors()[0].data == b.tensors()[0].data);
    CHECK(restored.steps() == 2);
}

TEST_CASE("train_loop: deterministic, early stopping, top-k checkpoints") {
    const auto train = tiny_records(13, 3);
    const ModelParams params = init_params(tiny_model(), 14);
    TrainConfig cfg = tiny_train_config();

    std::ostringstream log;
    const TrainResult a = train_loop(params, train, {}, cfg, {}, &log);
    const TrainResult b = train_loop(params, train, {}, cfg);
    CHECK(a.steps == 9);
    CHECK(a.params.tensors()[0].data == b.params.tensors()[0].data);
    CHECK(a.val_losses == b.val_losses);
    CHECK(log.str().find("\"event\":\"step\"") != std::string::npos);
    CHECK(log.str().find("\"event\":\"epoch\"") != std::string::npos);

    TrainConfig stalled = cfg;
    stalled.weights = only(0, 0, 0, 0);
    stalled.patience = 1;
    stalled.epochs = 10;
    const TrainResult s = train_loop(params, train, {}, stalled);
    CHECK(s.early_stopped);
    CHECK(s.epochs_run == 2);

    TrainConfig capped = cfg;
    capped.max_steps = 4;
    CHECK(train_loop(params, train, {}, capped).steps == 4);

    const auto dir = std::filesystem::temp_directory_path() / "paradock_test_train";
    std::filesystem::remove_all(dir);
    TrainConfig keep_one = cfg;
    keep_one.top_k_checkpoints = 1;
    const TrainResult k = train_loop(params, train, {}, keep_one, dir);
    REQUIRE(k.checkpoints.size() == 1);
    int files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".ckpt") ++files;
    CHECK(files == 1);
    const Checkpoint ck = load_checkpoint(k.checkpoints.front().string());
    CHECK(ck.meta.at("val_loss").get<double>() == k.best_val_loss);
    CHECK(ck.meta.at("epoch").get<int>() == k.best_epoch);
    std::mt19937_64 rng(15);
    std::vector<Augmentation> augs;
    for (std::size_t i = 0; i < train.size(); ++i) augs.push_back(draw_augmentation(rng, 10.0));
    CHECK(mean_loss(ck.params, train, augs, cfg.weights, true) == mean_loss(k.best_params, train, augs, cfg.weights, true));
    std::filesystem::remove_all(dir);
}

TEST_CASE("dataset directory loads docked pairs from truth files") {
    const auto dir = std::filesystem::temp_directory_path() / "paradock_test_dataset";
    std::filesystem::remove_all(dir);
    std::mt19937_64 rng(16);
    std::vector<SyntheticComplex> made;
    for (int i = 0; i < 3; ++i) {
        made.push_back(make_synthetic(rng, tiny_synth(6, 7), "d" + std::to_string(i)));
        write_synthetic(dir, made.back());
    }
    const auto records = load_dataset(dir, tiny_model().graph);
    REQUIRE(records.size() == 3);
    for (int i = 0; i < 3; ++i) {
        const ComplexRecord direct = record_from_synthetic(made[i], tiny_model().graph);
        CHECK(records[i].name == made[i].name);
        CHECK((records[i].ligand.coords - direct.ligand.coords).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(records[i].pockets.size() == direct.pockets.size());
    }
    CHECK_THROWS_AS(load_dataset(dir / "missing", tiny_model().graph), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("train config JSON") {
    TrainConfig c = tiny_train_config();
    c.weights = only(0.5, 0, 1, 2);
    const nlohmann::json j = c;
    const TrainConfig back = j.get<TrainConfig>();
    CHECK(back.learning_rate == c.learning_rate);
    CHECK(back.weights.fit == 0.5);
    CHECK(back.model.hidden == 8);
    nlohmann::json bad = j;
    bad["learning_rate"] = -1.0;
    CHECK_THROWS_AS(bad.get<TrainConfig>(), Error);
}
