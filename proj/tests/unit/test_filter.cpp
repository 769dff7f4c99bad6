// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <set>

#include "doctest.h"
#include "temp_dir.hpp"

#include "alia/data/synthetic.hpp"
#include "alia/error.hpp"
#include "alia/filter/filters.hpp"
#include "alia/rng.hpp"

using namespace alia;
using namespace alia::filter;

namespace {

// Scores looked up by image digest.
class MapZeroShot : public ZeroShotClassifier {
public:
    std::map<std::string, std::vector<double>> by_digest;
    std::vector<double> scores(const Image& image, std::span<const std::string>) const override {
        return by_digest.at(image.digest());
    }
};

class MapClassifier : public TaskClassifier {
public:
    explicit MapClassifier(std::vector<std::string> classes) : classes_(std::move(classes)) {}
    std::map<std::string, std::vector<double>> by_digest;
    std::vector<double> softmax(const Image& image) const override { return by_digest.at(image.digest()); }
    const std::vector<std::string>& classes() const override { return classes_; }

private:
    std::vector<std::string> classes_;
};

Image tiny(int seed) {
    Image img(2, 2);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(seed * 7 + i);
    return img;
}

std::vector<double> random_softmax(std::size_t k, SplitMix64& rng) {
    std::vector<double> p(k);
    double s = 0;
    for (auto& x : p) s += (x = rng.uniform() + 1e-3);
    for (auto& x : p) x /= s;
    return p;
}

}  // namespace

TEST_CASE("threshold examples") {
    const std::vector<std::string> classes = {"A", "B"};
    std::vector<std::vector<double>> probs = {{0.9, 0.1}, {0.7, 0.3}, {0.4, 0.6}};
    std::vector<std::size_t> labels = {0, 0, 1};
    auto t = thresholds_from_scores(probs, labels, classes);
    CHECK(t.t["A"] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(t.t["B"] == 0.6);
    CHECK(t.support["A"] == 2);

    std::vector<std::vector<double>> uniform(4, std::vector<double>(4, 0.25));
    const std::vector<std::string> four = {"a", "b", "c", "d"};
    auto u = thresholds_from_scores(uniform, std::vector<std::size_t>{0, 1, 2, 3}, four);
    for (const auto& [c, v] : u.t) CHECK(v == 0.25);

    try {
        thresholds_from_scores(std::span(probs).first(2), std::span(labels).first(2), classes);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::missing_class);
    }
    CHECK(thresholds_from_json(thresholds_to_json(t)) == t);
}

TEST_CASE("threshold oracle on random inputs") {
    SplitMix64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 1 + rng.below(10);
        const std::size_t n = k + rng.below(200 - k + 1);
        std::vector<std::string> classes;
        for (std::size_t c = 0; c < k; ++c) classes.push_back("c" + std::to_string(c));
        std::vector<std::vector<double>> probs;
        std::vector<std::size_t> labels;
        for (std::size_t i = 0; i < n; ++i) {
            probs.push_back(random_softmax(k, rng));
            labels.push_back(i < k ? i : rng.below(k));
        }
        auto t = thresholds_from_scores(probs, labels, classes);
        for (std::size_t c = 0; c < k; ++c) {
            double s = 0;
            int m = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (labels[i] == c) {
                    s += probs[i][c];
                    ++m;
                }
            }
            CHECK(std::abs(t.t[classes[c]] - s / m) <= 1e-12);
        }
    }
}

TEST_CASE("compute_class_thresholds over a dataset") {
    testing::TempDir dir;
    data::MemoryImageSource images;
    std::vector<data::ImageRecord> recs;
    MapClassifier clf({"A", "B"});
    const std::vector<std::pair<std::string, double>> rows = {{"A", 0.9}, {"A", 0.7}, {"B", 0.5}};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        data::ImageRecord r;
        r.id = "r" + std::to_string(i);
        r.uri = r.id;
        r.label = rows[i].first;
        images.add(r.uri, tiny(static_cast<int>(i)));
        const double p = rows[i].second;
        clf.by_digest[tiny(static_cast<int>(i)).digest()] = r.label == "A" ? std::vector{p, 1 - p} : std::vector{1 - p, p};
        recs.push_back(r);
    }
    data::Dataset ds(recs, {"A", "B"}, "thing");
    auto t = compute_class_thresholds(clf, ds, images, 2);
    CHECK(t.t["A"] == doctest::Approx(0.8));
    CHECK(t.t["B"] == 0.5);
}

TEST_CASE("confidence rule examples") {
    const std::vector<double> t = {0.8, 0.6};
    auto a = confidence_decision(std::vector{0.95, 0.05}, 0, t);
    CHECK_FALSE(a.keep);
    CHECK(a.failure == FailureKind::identity);
    auto b = confidence_decision(std::vector{0.30, 0.70}, 0, t);
    CHECK_FALSE(b.keep);
    CHECK(b.failure == FailureKind::class_corruption);
    CHECK(b.predicted == 1);
    auto c = confidence_decision(std::vector{0.55, 0.45}, 0, std::vector{0.60, 0.60});
    CHECK(c.keep);
    // Equality filters; ties go to the lowest index.
    CHECK_FALSE(confidence_decision(std::vector{0.6, 0.4}, 0, std::vector{0.6, 0.9}).keep);
    CHECK(confidence_decision(std::vector{0.5, 0.5}, 1, std::vector{0.4, 0.9}).predicted == 0);
}

TEST_CASE("confidence rule properties") {
    SplitMix64 rng(2);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t k = 2 + rng.below(8);
        auto p = random_softmax(k, rng);
        std::vector<double> t(k), higher(k);
        for (std::size_t i = 0; i < k; ++i) {
            t[i] = rng.uniform();
            higher[i] = t[i] + rng.uniform() * 0.2;
        }
        const std::size_t y = rng.below(k);
        // Raising thresholds never turns a keep into a filter.
        if (confidence_decision(p, y, t).keep) CHECK(confidence_decision(p, y, higher).keep);
        // Degenerate bounds.
        CHECK_FALSE(confidence_decision(p, y, std::vector<double>(k, 0.0)).keep);
        CHECK(confidence_decision(p, y, std::vector<double>(k, 1.0 + 1e-9)).keep);
        // Swapping two non-argmax classes (with their thresholds) does not change keep.
        const auto yhat = argmax(p);
        std::vector<std::size_t> others;
        for (std::size_t i = 0; i < k; ++i) {
            if (i != yhat) others.push_back(i);
        }
        if (others.size() >= 2) {
            auto p2 = p;
            auto t2 = t;
            std::swap(p2[others[0]], p2[others[1]]);
            std::swap(t2[others[0]], t2[others[1]]);
            if (argmax(p2) == yhat) CHECK(confidence_decision(p2, y, t2).keep == confidence_decision(p, y, t).keep);
        }
    }
}

TEST_CASE("semantic rule") {
    CHECK(semantic_decision(std::vector{0.9, 0.5, 0.1}).keep);
    auto d = semantic_decision(std::vector{0.3, 0.2, 0.2, 0.2, 0.6, 0.1});
    CHECK_FALSE(d.keep);
    CHECK(d.argmax == 4);
    CHECK(semantic_decision(std::vector{0.5, 0.5}).keep);
    CHECK_FALSE(semantic_decision(std::vector{0.5, 0.5}, SemanticTie::filter).keep);
    CHECK_THROWS_AS(semantic_decision(std::vector{0.5}), PreconditionError);

    FilterConfig cfg;
    CHECK(cfg.semantic.task_prompt == "a photo of a bird");
    CHECK(cfg.semantic.distractors == std::vector<std::string>{"a photo of an object", "a photo of a scene",
                                                                "a photo of geometric shapes", "a photo", "an image"});
    MapZeroShot zs;
    const Image img = tiny(1);
    zs.by_digest[img.digest()] = {0.1, 0.1, 0.1, 0.1, 0.3, 0.1};
    auto v = semantic_filter(zs, img, "e", cfg.semantic.task_prompt, cfg.semantic.distractors);
    CHECK_FALSE(v.keep);
    CHECK(v.failure == FailureKind::total);
    CHECK(v.prompts[*v.top_prompt] == "a photo");
    CHECK(verdict_from_json(verdict_to_json(v)).scores == v.scores);
}

TEST_CASE("knn filter") {
    KnnIndex idx({"b", "a", "c"}, {"X", "Y", "Y"}, {{1, 0}, {1, 0}, {0, 1}});
    // "a" and "b" tie at distance 0; the lower id wins.
    auto hit = idx.nearest(std::vector{2.0, 0.0});
    CHECK(idx.id(hit.index) == "a");
    CHECK(hit.distance == doctest::Approx(0.0));
    CHECK(idx.label(idx.nearest(std::vector{0.1, 1.0}).index) == "Y");

    StubEmbedder emb;
    const Image img = data::render_synthetic_image("cardinal", "sky", 1);
    const auto f = emb.embed(img);
    KnnIndex one({"only"}, {"cardinal"}, {f});
    CHECK(knn_filter(emb, one, img, "e", "cardinal").keep);
    auto v = knn_filter(emb, one, img, "e", "bluejay");
    CHECK_FALSE(v.keep);
    CHECK(v.failure == FailureKind::neighbor_mismatch);
    CHECK_THROWS_AS(KnnIndex({}, {}, {}), PreconditionError);
}

TEST_CASE("stub zero-shot prefers the task prompt when an object is visible") {
    StubZeroShotClassifier zs("a photo of a bird");
    const std::vector<std::string> prompts = {"a photo of a bird", "a photo"};
    auto s = zs.scores(data::render_synthetic_image("cardinal", "sky", 2), prompts);
    CHECK(s[0] > s[1]);
    Image flat(16, 16);
    std::fill(flat.pixels.begin(), flat.pixels.end(), 100);
    auto f = zs.scores(flat, prompts);
    CHECK(f[0] < f[1]);
}

namespace {

struct PipelineFixture {
    testing::TempDir dir;
    ImageStore store{dir / "gen"};
    MapZeroShot zs;
    MapClassifier clf{{"A", "B"}};
    ThresholdTable thresholds{{{"A", 0.8}, {"B", 0.6}}, {{"A", 2}, {"B", 2}}};
    std::vector<edit::AugmentationRecord> edits;

    void add(const std::string& id, const std::string& label, std::vector<double> sem, std::vector<double> probs) {
        const Image img = tiny(static_cast<int>(edits.size()) + 1);
        edit::AugmentationRecord r;
        r.edit_id = id;
        r.label = label;
        r.uri = store.put(img);
        zs.by_digest[r.uri] = std::move(sem);
        clf.by_digest[r.uri] = std::move(probs);
        edits.push_back(r);
    }
    FilterModels models() const { return {&zs, &clf, &thresholds, nullptr, nullptr}; }
};

}  // namespace

TEST_CASE("pipeline against a brute-force oracle") {
    PipelineFixture f;
    f.add("e1", "A", {0.9, 0.1}, {0.70, 0.30});  // kept
    f.add("e2", "A", {0.2, 0.8}, {0.70, 0.30});  // semantic total failure
    f.add("e3", "B", {0.9, 0.1}, {0.50, 0.50});  // kept: yhat A, 0.5 < 0.8
    f.add("e4", "A", {0.6, 0.6}, {0.40, 0.60 - 1e-9});  // tie keeps; yhat B below 0.6
    f.add("e5", "A", {0.9, 0.1}, {0.20, 0.80});  // class corruption
    FilterConfig cfg;
    cfg.semantic.distractors = {"a photo"};

    // Oracle: apply the two rules directly.
    std::set<std::string> oracle;
    for (const auto& e : f.edits) {
        const auto& s = f.zs.by_digest.at(e.uri);
        const auto& p = f.clf.by_digest.at(e.uri);
        const bool sem_keep = s[0] >= s[1];
        const std::size_t yhat = p[1] > p[0] ? 1 : 0;
        const double t = yhat == 0 ? 0.8 : 0.6;
        if (!sem_keep || p[yhat] >= t) oracle.insert(e.edit_id);
    }
    CHECK(oracle == std::set<std::string>{"e2", "e5"});

    auto res = filter_pipeline(f.edits, cfg, f.models(), f.store, 2);
    CHECK(std::set<std::string>(res.filtered.begin(), res.filtered.end()) == oracle);
    CHECK(res.kept.size() + res.filtered.size() == f.edits.size());
    CHECK(f.edits[1].status == edit::EditStatus::filtered_semantic);
    CHECK(f.edits[4].status == edit::EditStatus::filtered_confidence);
    CHECK(f.edits[0].status == edit::EditStatus::kept);
    // Short circuit: e2 has only its semantic verdict.
    std::size_t e2 = 0;
    for (const auto& v : res.verdicts) e2 += v.edit_id == "e2";
    CHECK(e2 == 1);
    CHECK(res.verdicts.size() == 9);
    CHECK(f.edits[4].audit.back().reason == "class-corruption");
}

TEST_CASE("pipeline with all stages disabled keeps everything") {
    PipelineFixture f;
    f.add("e1", "A", {0.0, 1.0}, {1.0, 0.0});
    f.add("e2", "B", {0.0, 1.0}, {1.0, 0.0});
    FilterConfig cfg;
    cfg.semantic.enabled = false;
    cfg.confidence = false;
    auto res = filter_pipeline(f.edits, cfg, {}, f.store);
    CHECK(res.kept.size() == 2);
    CHECK(res.verdicts.empty());
}

TEST_CASE("pipeline configuration errors and skipped records") {
    PipelineFixture f;
    f.add("e1", "A", {0.9, 0.1}, {0.5, 0.5});
    FilterConfig cfg;
    cfg.semantic.enabled = false;
    FilterModels m = f.models();
    m.thresholds = nullptr;
    CHECK_THROWS_AS(filter_pipeline(f.edits, cfg, m, f.store), ConfigError);

    edit::AugmentationRecord failed;
    failed.edit_id = "bad";
    failed.error = "oom";
    f.edits.push_back(failed);
    auto res = filter_pipeline(f.edits, cfg, f.models(), f.store);
    CHECK(res.kept == std::vector<std::string>{"e1"});
    CHECK(f.edits[1].status == edit::EditStatus::generated);
}

TEST_CASE("filter config file") {
    auto c = parse_filter_config(nlohmann::json::parse(
        R"({"semantic": {"task_prompt": "a photo of an airplane", "distractors": ["a photo"], "tie": "filter"},
            "confidence": {"enabled": false}, "knn": true})"));
    CHECK(c.semantic.task_prompt == "a photo of an airplane");
    CHECK(c.semantic.tie == SemanticTie::filter);
    CHECK_FALSE(c.confidence);
    CHECK(c.knn);
    auto back = parse_filter_config(filter_config_to_json(c));
    CHECK(back.semantic.distractors == c.semantic.distractors);
    CHECK_THROWS_AS(parse_filter_config(nlohmann::json::parse(R"({"semantic": {"distractors": []}})")), ConfigError);
    CHECK_THROWS_AS(parse_filter_config(nlohmann::json::parse(R"({"semantic": {"tie": "maybe"}})")), ConfigError);
}
