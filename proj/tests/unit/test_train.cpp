// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>

#include "doctest.h"
#include "temp_dir.hpp"
#include "train_fixtures.hpp"

#include "alia/content_store.hpp"
#include "alia/data/config.hpp"
#include "alia/data/manifest.hpp"
#include "alia/data/synthetic.hpp"
#include "alia/error.hpp"
#include "alia/rng.hpp"
#include "alia/train/charts.hpp"
#include "alia/train/experiment.hpp"
#include "alia/train/policy.hpp"
#include "alia/train/reference.hpp"

using namespace alia;
using namespace alia::train;

namespace {

// Straight from the definitions, one sample at a time, no confusion matrix.
double brute_macro_f1(std::size_t k, const std::vector<std::size_t>& t, const std::vector<std::size_t>& p) {
    double sum = 0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            tp += t[i] == c && p[i] == c;
            fp += t[i] != c && p[i] == c;
            fn += t[i] == c && p[i] != c;
        }
        if (tp + fn == 0) continue;
        ++used;
        sum += tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    }
    return sum / static_cast<double>(used);
}

double brute_balanced(std::size_t k, const std::vector<std::size_t>& t, const std::vector<std::size_t>& p) {
    double sum = 0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t hit = 0, n = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i] != c) continue;
            ++n;
            hit += p[i] == c;
        }
        if (n == 0) continue;
        ++used;
        sum += static_cast<double>(hit) / static_cast<double>(n);
    }
    return sum / static_cast<double>(used);
}

struct Synthetic {
    testing::TempDir dir;
    data::DatasetConfig cfg;
    data::Dataset ds;
    std::shared_ptr<ImageStore> store;
    data::StoreImageSource images;

    Synthetic()
        : cfg(data::load_dataset_config(data::write_synthetic_dataset(dir.path()))),
          ds(data::load_manifest(cfg.manifest)),
          store(std::make_shared<ImageStore>(dir / "images")),
          images(store, dir.path()) {}
};

}  // namespace

TEST_CASE("metric examples") {
    std::vector<std::size_t> truth = {0, 0, 1, 1}, pred = {0, 0, 0, 0};
    CHECK(compute_metric(MetricKind::balanced_accuracy, 2, truth, pred).value == doctest::Approx(0.5));
    CHECK(compute_metric(MetricKind::macro_f1, 2, truth, pred).value == doctest::Approx(1.0 / 3.0));
    CHECK(compute_metric(MetricKind::macro_f1, 2, truth, truth).value == 1.0);
    CHECK(compute_metric(MetricKind::accuracy, 2, truth, pred).value == 0.5);

    // constant prediction over K balanced classes
    std::vector<std::size_t> t5, p5;
    for (std::size_t c = 0; c < 5; ++c)
        for (int i = 0; i < 3; ++i) {
            t5.push_back(c);
            p5.push_back(2);
        }
    CHECK(compute_metric(MetricKind::balanced_accuracy, 5, t5, p5).value == doctest::Approx(0.2));

    // class 2 has no test examples and is excluded
    auto m = compute_metric(MetricKind::macro_f1, 3, truth, truth);
    CHECK(m.excluded == std::vector<std::size_t>{2});
    CHECK(std::isnan(m.per_class[2]));
    CHECK(m.value == 1.0);
}

TEST_CASE("metric oracle on random prediction sets") {
    SplitMix64 rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t k = 2 + rng.below(4), n = 1 + rng.below(20);
        std::vector<std::size_t> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng.below(k);
            p[i] = rng.below(k);
        }
        REQUIRE(compute_metric(MetricKind::macro_f1, k, t, p).value == doctest::Approx(brute_macro_f1(k, t, p)).epsilon(1e-12));
        REQUIRE(compute_metric(MetricKind::balanced_accuracy, k, t, p).value ==
                doctest::Approx(brute_balanced(k, t, p)).epsilon(1e-12));
    }
}

TEST_CASE("aggregation and report round trip") {
    std::vector<double> v = {0.70, 0.72, 0.74};
    auto [mean, sd] = mean_std(v);
    CHECK(mean == doctest::Approx(0.72));
    CHECK(sd == doctest::Approx(std::sqrt(0.0008 / 3)));
    MetricReport r{MetricKind::macro_f1, mean, sd, v, {0, 1, 2}, {{"jay", 0.5}}};
    CHECK(report_from_json(report_to_json(r)) == r);
}

TEST_CASE("train config validation and json") {
    TrainConfig c;
    c.variant = Variant::randaug;
    c.seed = 3;
    CHECK(config_from_json(config_to_json(c)) == c);
    CHECK(parse_variant("alia") == Variant::alia);
    CHECK(parse_variant("+real") == Variant::real);
    c.epochs = 0;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
}

TEST_CASE("cutmix mixes boxes and targets consistently") {
    std::vector<Sample> batch;
    for (int i = 0; i < 4; ++i) {
        Image img(32, 32);
        std::fill(img.pixels.begin(), img.pixels.end(), static_cast<std::uint8_t>(40 * i + 10));
        std::vector<double> target(4, 0.0);
        target[static_cast<std::size_t>(i)] = 1.0;
        batch.push_back({img, target});
    }
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto mixed = batch;
        SplitMix64 rng(seed);
        CutMix().apply(mixed, rng);
        for (std::size_t i = 0; i < mixed.size(); ++i) {
            const auto& s = mixed[i];
            double sum = 0;
            for (double t : s.target) sum += t;
            CHECK(sum == doctest::Approx(1.0));
            std::size_t partner = (i + 3) % 4;
            std::size_t pasted = 0;
            for (std::size_t p = 0; p < s.image.pixels.size(); p += 3)
                pasted += s.image.pixels[p] == batch[partner].image.pixels[0];
            // pasted area share equals the partner's target weight
            CHECK(static_cast<double>(pasted) / (32.0 * 32.0) == doctest::Approx(s.target[partner]));
            CHECK(s.target[i] == doctest::Approx(1.0 - s.target[partner]));
        }
    }
    auto a = batch, b = batch;
    SplitMix64 r1(9), r2(9);
    CutMix().apply(a, r1);
    CutMix().apply(b, r2);
    CHECK(a[0].image == b[0].image);
}

TEST_CASE("randaugment magnitude table and ops") {
    CHECK(op_magnitude(RandAugmentOp::shear_x, 9, 31, 32, 32) == doctest::Approx(0.09));
    CHECK(op_magnitude(RandAugmentOp::rotate, 9, 31, 32, 32) == doctest::Approx(9.0));
    CHECK(op_magnitude(RandAugmentOp::posterize, 9, 31, 32, 32) == 7.0);
    CHECK(op_magnitude(RandAugmentOp::solarize, 9, 31, 32, 32) == doctest::Approx(178.5));
    CHECK(op_magnitude(RandAugmentOp::translate_x, 30, 31, 331, 331) == doctest::Approx(150.0));

    Image img(8, 8);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 5);
    CHECK(apply_op(img, RandAugmentOp::identity, 0) == img);
    CHECK(apply_op(img, RandAugmentOp::rotate, 0) == img);
    CHECK(apply_op(img, RandAugmentOp::brightness, 0) == img);
    auto sol = apply_op(img, RandAugmentOp::solarize, 128);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(sol.pixels[i] == (img.pixels[i] >= 128 ? 255 - img.pixels[i] : img.pixels[i]));
    auto post = apply_op(img, RandAugmentOp::posterize, 4);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(post.pixels[i] == (img.pixels[i] & 0xF0));
    auto shifted = apply_op(img, RandAugmentOp::translate_x, 2);
    CHECK(shifted.at(0, 0)[0] == 0);  // black fill
    CHECK(shifted.at(2, 0)[0] == img.at(0, 0)[0]);

    Image flat(4, 4);
    std::fill(flat.pixels.begin(), flat.pixels.end(), 77);
    CHECK(apply_op(flat, RandAugmentOp::equalize, 0) == flat);
    CHECK(apply_op(flat, RandAugmentOp::autocontrast, 0) == flat);

    CHECK_THROWS_AS(RandAugment(2, 31, 31), RangeError);
    SplitMix64 r1(1), r2(1);
    CHECK(RandAugment().augment(img, r1) == RandAugment().augment(img, r2));
    CHECK(make_policy("none") == nullptr);
    CHECK(make_policy("cutmix")->name() == "cutmix");
}

TEST_CASE("linear probe learns the synthetic dataset deterministically") {
    Synthetic s;
    LinearProbeTrainer trainer;
    TrainConfig config;
    config.learning_rate = 0.05;
    config.epochs = 60;
    auto a = trainer.fit(config, s.ds, s.images);
    auto b = trainer.fit(config, s.ds, s.images);
    CHECK(a.model->serialize() == b.model->serialize());
    CHECK(a.validation >= 0.9);
    CHECK(evaluate(*a.model, s.ds, s.images, MetricKind::balanced_accuracy).value >= 0.9);

    auto loaded = trainer.load(a.model->serialize());
    auto rec = s.ds.split(data::Split::test).front();
    CHECK(loaded->softmax(s.images.load(rec)) == a.model->softmax(s.images.load(rec)));

    config.variant = Variant::cutmix;
    CHECK(trainer.fit(config, s.ds, s.images).validation >= 0.5);
    config.variant = Variant::randaug;
    auto r1 = trainer.fit(config, s.ds, s.images);
    auto r2 = trainer.fit(config, s.ds, s.images);
    CHECK(r1.model->serialize() == r2.model->serialize());
}

TEST_CASE("scripted trainer hits its planted score") {
    auto f = testing::make_train_fixture(20, 40, 0);
    ScriptedTrainer trainer([](const TrainSummary&) { return 0.625; });
    auto fit = trainer.fit(TrainConfig{}, f.dataset, *f.images);
    CHECK(fit.validation == 0.625);
    CHECK(evaluate(*fit.model, f.dataset, *f.images, MetricKind::balanced_accuracy).value == 0.625);
    auto reloaded = trainer.load(fit.model->serialize());
    CHECK(evaluate(*reloaded, f.dataset, *f.images, MetricKind::balanced_accuracy).value == 0.625);
}

TEST_CASE("hyperparameter sweep") {
    auto f = testing::make_train_fixture(5, 5, 0);
    ScriptedTrainer planted(planted_hparam_surface(1e-3, 1e-4));
    auto sweep = sweep_hyperparams(planted, f.dataset, *f.images, TrainConfig{}, kLearningRateGrid, kWeightDecayGrid, 4);
    CHECK(sweep.points.size() == 20);
    CHECK(sweep.best.learning_rate == 1e-3);
    CHECK(sweep.best.weight_decay == 1e-4);

    std::vector<double> one_lr = {0.01}, one_wd = {0.001};
    auto single = sweep_hyperparams(planted, f.dataset, *f.images, TrainConfig{}, one_lr, one_wd);
    CHECK(single.best.learning_rate == 0.01);
    CHECK(single.best.weight_decay == 0.001);

    ScriptedTrainer flat([](const TrainSummary&) { return 0.5; });
    auto tie = sweep_hyperparams(flat, f.dataset, *f.images, TrainConfig{});
    CHECK(tie.best.learning_rate == 1e-5);
    CHECK(tie.best.weight_decay == 1e-5);

    ScriptedTrainer picky([](const TrainSummary& s) {
        if (s.config.learning_rate > 1e-3) throw BackendError("diverged");
        return 0.5 + s.config.learning_rate;
    });
    auto partial = sweep_hyperparams(picky, f.dataset, *f.images, TrainConfig{});
    CHECK(partial.best.learning_rate == 1e-3);
    CHECK(partial.points.back().error == "diverged");

    ScriptedTrainer broken([](const TrainSummary&) -> double { throw BackendError("no gpu"); });
    CHECK_THROWS_AS(sweep_hyperparams(broken, f.dataset, *f.images, TrainConfig{}), BackendError);
}

TEST_CASE("run_variant keeps per-class parity with the extra split") {
    auto f = testing::make_train_fixture(10, 10, 12, 4);
    ScriptedTrainer trainer([](const TrainSummary& s) { return 0.5 + 0.01 * static_cast<double>(s.added); });
    RunOptions options;
    options.metric = MetricKind::balanced_accuracy;
    auto extra = data::class_distribution(f.dataset, data::Split::extra);

    for (auto v : {Variant::alia, Variant::real, Variant::txt2img}) {
        TrainConfig c;
        c.variant = v;
        auto pool = v == Variant::real ? real_pool(f.dataset) : f.pool;
        auto run = run_variant(std::string(to_string(v)), f.dataset, pool, trainer, c, *f.images, options);
        CHECK(run.added == extra);
        CHECK(run.report.per_seed.size() == 3);
        CHECK(run.report.mean == doctest::Approx(0.62).epsilon(0.02));
    }
    TrainConfig base;
    auto baseline = run_variant("baseline", f.dataset, {}, trainer, base, *f.images, options);
    CHECK(baseline.report.mean == 0.5);
    CHECK(baseline.added.total() == 0);

    // deterministic
    TrainConfig c;
    c.variant = Variant::alia;
    auto a = run_variant("+alia", f.dataset, f.pool, trainer, c, *f.images, options);
    auto b = run_variant("+alia", f.dataset, f.pool, trainer, c, *f.images, options);
    CHECK(a.report == b.report);

    // shortage propagates
    std::vector<data::ImageRecord> small(f.pool.begin(), f.pool.begin() + 2);
    CHECK_THROWS_AS(run_variant("+alia", f.dataset, small, trainer, c, *f.images, options), ShortageError);
}

TEST_CASE("results ledger resumes finished seeds") {
    testing::TempDir dir;
    auto f = testing::make_train_fixture(10, 10, 12, 4);
    std::atomic<int> fits{0};
    ScriptedTrainer trainer([&](const TrainSummary&) {
        ++fits;
        return 0.75;
    });
    TrainConfig c;
    c.variant = Variant::alia;
    RunOptions options;
    MetricReport first;
    {
        ResultsLedger ledger(dir / "results.jsonl");
        options.ledger = &ledger;
        first = run_variant("+alia", f.dataset, f.pool, trainer, c, *f.images, options).report;
        CHECK(ledger.size() == 3);
    }
    CHECK(fits == 3);
    ResultsLedger reopened(dir / "results.jsonl");
    options.ledger = &reopened;
    auto again = run_variant("+alia", f.dataset, f.pool, trainer, c, *f.images, options);
    CHECK(fits == 3);
    CHECK(again.reused == 3);
    CHECK(again.report == first);

    options.seeds = {0, 1, 2, 3};
    auto more = run_variant("+alia", f.dataset, f.pool, trainer, c, *f.images, options);
    CHECK(fits == 4);
    CHECK(more.reused == 3);
}

TEST_CASE("quantity ablation recovers the planted peak") {
    auto f = testing::make_train_fixture(100, 200, 100);
    ScriptedTrainer trainer(planted_quantity_surface(0.075));
    RunOptions options;
    options.metric = MetricKind::balanced_accuracy;
    std::vector<double> fractions = {0.025, 0.05, 0.10, 0.25, 0.5, 1.0};
    auto points = ablation_quantity(f.dataset, f.pool, fractions, trainer, TrainConfig{}, *f.images, options);
    REQUIRE(points.size() == 6);
    for (const auto& p : points) CHECK(p.report.has_value());
    CHECK(points[0].requested == 8);
    CHECK(points[5].requested == 300);
    auto best = best_fraction(points);
    REQUIRE(best);
    CHECK((*best == 0.05 || *best == 0.10));

    std::vector<double> zero = {0.0};
    auto base = ablation_quantity(f.dataset, f.pool, zero, trainer, TrainConfig{}, *f.images, options);
    CHECK(base[0].requested == 0);
    CHECK(base[0].report->mean == doctest::Approx(0.70).epsilon(0.01));

    std::vector<double> too_many = {0.05, 2.0};
    auto short_points = ablation_quantity(f.dataset, f.pool, too_many, trainer, TrainConfig{}, *f.images, options);
    CHECK(short_points[0].report.has_value());
    CHECK_FALSE(short_points[1].report.has_value());
    CHECK_FALSE(short_points[1].diagnostic.empty());
}

TEST_CASE("prompt quality and edit method ablations") {
    auto f = testing::make_train_fixture(10, 10, 12, 4);
    ScriptedTrainer trainer([](const TrainSummary&) { return 0.6; });
    RunOptions options;
    auto pq = ablation_prompt_quality(f.dataset, f.pool, f.pool, f.pool, trainer, TrainConfig{}, *f.images, options);
    CHECK(pq.user_prompt.per_seed.size() == 3);
    CHECK(pq.alia_filtered.per_seed.size() == 3);
    auto em = ablation_edit_method(f.dataset, f.pool, f.pool, trainer, TrainConfig{}, *f.images, options);
    CHECK(em.img2img.mean == em.instruct_pix2pix.mean);
    CHECK_THROWS_AS(ablation_edit_method(f.dataset, f.pool, {}, trainer, TrainConfig{}, *f.images, options),
                    PreconditionError);
}

TEST_CASE("charts and reference constants") {
    auto svg = bar_chart_svg("iWildCam", "macro F1", {{"baseline", 0.6, 0.02}, {"+alia", 0.7, 0.01}});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("+alia") != std::string::npos);
    CHECK(svg == bar_chart_svg("iWildCam", "macro F1", {{"baseline", 0.6, 0.02}, {"+alia", 0.7, 0.01}}));
    auto curve = curve_svg("quantity", "fraction", "accuracy", {{0.05, 0.7, 0}, {0.1, 0.72, 0.01}}, true);
    CHECK(curve.find("<polyline") != std::string::npos);
    CHECK(find_prompt_quality_reference("iwildcam")->alia_filtered.mean == 72.34);
    CHECK(find_prompt_quality_reference("imagenet") == nullptr);
}
