// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/filter/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alia/error.hpp"
#include "alia/features.hpp"
#include "alia/parallel.hpp"

namespace alia::filter {

using nlohmann::json;

std::vector<double> StubZeroShotClassifier::scores(const Image& image, std::span<const std::string> prompts) const {
    const auto f = colour_features(image);
    double d = 0;
    for (std::size_t c = 0; c < 3; ++c) d += (f[c] - f[c + 3]) * (f[c] - f[c + 3]);
    const double contrast = std::sqrt(d / 3.0);
    std::vector<double> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(p == task_prompt_ ? 2.0 * contrast : 0.2);
    return out;
}

std::vector<double> StubEmbedder::embed(const Image& image) const {
    const auto f = colour_features(image);
    return {f.begin(), f.end()};
}

json thresholds_to_json(const ThresholdTable& table) {
    json j = json::object();
    for (const auto& [cls, t] : table.t) j[cls] = {{"t", t}, {"support", table.support.at(cls)}};
    return j;
}

ThresholdTable thresholds_from_json(const json& j) {
    ThresholdTable table;
    for (const auto& [cls, v] : j.items()) {
        table.t[cls] = v.at("t").get<double>();
        table.support[cls] = v.at("support").get<std::size_t>();
    }
    return table;
}

ThresholdTable thresholds_from_scores(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels,
                                      std::span<const std::string> classes) {
    if (probs.size() != labels.size()) throw PreconditionError("thresholds: probs and labels differ in length");
    std::vector<double> sum(classes.size(), 0.0);
    std::vector<std::size_t> n(classes.size(), 0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto y = labels[i];
        if (y >= classes.size() || probs[i].size() != classes.size()) {
            throw PreconditionError("thresholds: row " + std::to_string(i) + " does not match the class list");
        }
        sum[y] += probs[i][y];
        ++n[y];
    }
    ThresholdTable table;
    for (std::size_t y = 0; y < classes.size(); ++y) {
        if (n[y] == 0) throw Error(ErrorCode::missing_class, "class '" + classes[y] + "' has no train images");
        table.t[classes[y]] = sum[y] / static_cast<double>(n[y]);
        table.support[classes[y]] = n[y];
    }
    return table;
}

ThresholdTable compute_class_thresholds(const TaskClassifier& classifier, const data::Dataset& train,
                                        const data::ImageSource& images, unsigned workers) {
    const auto& classes = classifier.classes();
    std::vector<const data::ImageRecord*> rows;
    for (const auto& r : train.records()) {
        if (r.split == data::Split::train && r.provenance == data::Provenance::original) rows.push_back(&r);
    }
    std::vector<std::vector<double>> probs(rows.size());
    std::vector<std::size_t> labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto it = std::find(classes.begin(), classes.end(), rows[i]->label);
        if (it == classes.end()) throw PreconditionError("classifier does not know class '" + rows[i]->label + "'");
        labels[i] = static_cast<std::size_t>(it - classes.begin());
    }
    parallel_for(rows.size(), workers, [&](std::size_t i) { probs[i] = classifier.softmax(images.load(*rows[i])); });
    return thresholds_from_scores(probs, labels, classes);
}

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::semantic: return "semantic";
        case Stage::confidence: return "confidence";
        case Stage::knn: return "knn";
    }
    return "?";
}

std::string_view to_string(FailureKind kind) {
    switch (kind) {
        case FailureKind::none: return "none";
        case FailureKind::total: return "total";
        case FailureKind::identity: return "identity";
        case FailureKind::class_corruption: return "class-corruption";
        case FailureKind::neighbor_mismatch: return "neighbor-mismatch";
    }
    return "?";
}

namespace {

Stage parse_stage(const std::string& s) {
    for (auto v : {Stage::semantic, Stage::confidence, Stage::knn}) {
        if (to_string(v) == s) return v;
    }
    throw ValidationError("stage", "unknown filter stage '" + s + "'");
}

FailureKind parse_failure(const std::string& s) {
    for (auto v : {FailureKind::none, FailureKind::total, FailureKind::identity, FailureKind::class_corruption,
                   FailureKind::neighbor_mismatch}) {
        if (to_string(v) == s) return v;
    }
    throw ValidationError("failure", "unknown failure kind '" + s + "'");
}

}  // namespace

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw PreconditionError("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

ConfidenceDecision confidence_decision(std::span<const double> probs, std::size_t true_label,
                                       std::span<const double> thresholds) {
    if (probs.size() != thresholds.size()) throw PreconditionError("confidence: probs and thresholds differ in length");
    ConfidenceDecision d;
    d.predicted = argmax(probs);
    d.confidence = probs[d.predicted];
    d.threshold = thresholds[d.predicted];
    d.keep = d.confidence < d.threshold;
    if (!d.keep) d.failure = d.predicted == true_label ? FailureKind::identity : FailureKind::class_corruption;
    return d;
}

SemanticDecision semantic_decision(std::span<const double> scores, SemanticTie tie) {
    if (scores.size() < 2) throw PreconditionError("semantic filter needs at least one distractor");
    const double best_distractor = *std::max_element(scores.begin() + 1, scores.end());
    SemanticDecision d;
    d.keep = tie == SemanticTie::keep ? scores[0] >= best_distractor : scores[0] > best_distractor;
    if (d.keep) {
        d.argmax = 0;
    } else {
        // Lowest-index distractor among the best.
        d.argmax = 1 + argmax(scores.subspan(1));
    }
    return d;
}

json verdict_to_json(const FilterVerdict& v) {
    json j = {{"edit_id", v.edit_id}, {"stage", to_string(v.stage)}, {"keep", v.keep}, {"failure", to_string(v.failure)}};
    if (!v.prompts.empty()) j["prompts"] = v.prompts;
    if (!v.scores.empty()) j["scores"] = v.scores;
    if (v.top_prompt) j["top_prompt"] = *v.top_prompt;
    if (v.predicted) j["predicted"] = *v.predicted;
    if (v.confidence) j["confidence"] = *v.confidence;
    if (v.threshold) j["threshold"] = *v.threshold;
    if (v.neighbor_id) j["neighbor_id"] = *v.neighbor_id;
    if (v.neighbor_label) j["neighbor_label"] = *v.neighbor_label;
    if (v.distance) j["distance"] = *v.distance;
    return j;
}

FilterVerdict verdict_from_json(const json& j) {
    FilterVerdict v;
    v.edit_id = j.at("edit_id").get<std::string>();
    v.stage = parse_stage(j.at("stage").get<std::string>());
    v.keep = j.at("keep").get<bool>();
    v.failure = parse_failure(j.value("failure", "none"));
    if (j.contains("prompts")) v.prompts = j["prompts"].get<std::vector<std::string>>();
    if (j.contains("scores")) v.scores = j["scores"].get<std::vector<double>>();
    if (j.contains("top_prompt")) v.top_prompt = j["top_prompt"].get<std::size_t>();
    if (j.contains("predicted")) v.predicted = j["predicted"].get<std::string>();
    if (j.contains("confidence")) v.confidence = j["confidence"].get<double>();
    if (j.contains("threshold")) v.threshold = j["threshold"].get<double>();
    if (j.contains("neighbor_id")) v.neighbor_id = j["neighbor_id"].get<std::string>();
    if (j.contains("neighbor_label")) v.neighbor_label = j["neighbor_label"].get<std::string>();
    if (j.contains("distance")) v.distance = j["distance"].get<double>();
    return v;
}

FilterVerdict semantic_filter(const ZeroShotClassifier& zs, const Image& image, const std::string& edit_id,
                              const std::string& task_prompt, std::span<const std::string> distractors,
                              SemanticTie tie) {
    if (distractors.empty()) throw PreconditionError("semantic filter needs at least one distractor");
    FilterVerdict v;
    v.edit_id = edit_id;
    v.stage = Stage::semantic;
    v.prompts.push_back(task_prompt);
    v.prompts.insert(v.prompts.end(), distractors.begin(), distractors.end());
    v.scores = zs.scores(image, v.prompts);
    if (v.scores.size() != v.prompts.size()) throw BackendError("zero-shot classifier returned the wrong number of scores");
    const auto d = semantic_decision(v.scores, tie);
    v.keep = d.keep;
    v.top_prompt = d.argmax;
    if (!v.keep) v.failure = FailureKind::total;
    return v;
}

FilterVerdict confidence_filter(const TaskClassifier& classifier, const Image& image, const std::string& edit_id,
                                const std::string& label, const ThresholdTable& thresholds) {
    const auto& classes = classifier.classes();
    std::vector<double> t;
    t.reserve(classes.size());
    std::optional<std::size_t> y;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        auto it = thresholds.t.find(classes[i]);
        if (it == thresholds.t.end()) throw ConfigError("thresholds", "no threshold for class '" + classes[i] + "'");
        t.push_back(it->second);
        if (classes[i] == label) y = i;
    }
    if (!y) throw PreconditionError("edit label '" + label + "' is not a classifier class");
    const auto probs = classifier.softmax(image);
    const auto d = confidence_decision(probs, *y, t);
    FilterVerdict v;
    v.edit_id = edit_id;
    v.stage = Stage::confidence;
    v.keep = d.keep;
    v.failure = d.failure;
    v.scores = probs;
    v.predicted = classes[d.predicted];
    v.confidence = d.confidence;
    v.threshold = d.threshold;
    return v;
}

namespace {

std::vector<double> normalised(std::span<const double> v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    std::vector<double> out(v.begin(), v.end());
    if (n > 0) {
        for (auto& x : out) x /= n;
    }
    return out;
}

}  // namespace

KnnIndex::KnnIndex(std::vector<std::string> ids, std::vector<std::string> labels,
                   std::vector<std::vector<double>> vectors)
    : ids_(std::move(ids)), labels_(std::move(labels)) {
    if (ids_.empty()) throw PreconditionError("knn: empty train set");
    if (ids_.size() != labels_.size() || ids_.size() != vectors.size()) {
        throw PreconditionError("knn: ids, labels and vectors differ in length");
    }
    for (const auto& v : vectors) vectors_.push_back(normalised(v));
}

namespace {

KnnIndex build_index(const Embedder& embedder, const data::Dataset& train, const data::ImageSource& images) {
    std::vector<std::string> ids, labels;
    std::vector<std::vector<double>> vectors;
    for (const auto& r : train.records()) {
        if (r.split != data::Split::train || r.provenance != data::Provenance::original) continue;
        ids.push_back(r.id);
        labels.push_back(r.label);
        vectors.push_back(embedder.embed(images.load(r)));
    }
    return KnnIndex(std::move(ids), std::move(labels), std::move(vectors));
}

}  // namespace

KnnIndex::KnnIndex(const Embedder& embedder, const data::Dataset& train, const data::ImageSource& images)
    : KnnIndex(build_index(embedder, train, images)) {}

KnnIndex::Hit KnnIndex::nearest(std::span<const double> query) const {
    const auto q = normalised(query);
    Hit best{0, 2.0 + 1.0};
    for (std::size_t i = 0; i < vectors_.size(); ++i) {
        if (vectors_[i].size() != q.size()) throw PreconditionError("knn: embedding size mismatch");
        const double cos = std::inner_product(q.begin(), q.end(), vectors_[i].begin(), 0.0);
        const double dist = 1.0 - cos;
        if (dist < best.distance || (dist == best.distance && ids_[i] < ids_[best.index])) best = {i, dist};
    }
    return best;
}

FilterVerdict knn_filter(const Embedder& embedder, const KnnIndex& index, const Image& image,
                         const std::string& edit_id, const std::string& label) {
    const auto hit = index.nearest(embedder.embed(image));
    FilterVerdict v;
    v.edit_id = edit_id;
    v.stage = Stage::knn;
    v.neighbor_id = index.id(hit.index);
    v.neighbor_label = index.label(hit.index);
    v.distance = hit.distance;
    v.keep = *v.neighbor_label == label;
    if (!v.keep) v.failure = FailureKind::neighbor_mismatch;
    return v;
}

FilterConfig parse_filter_config(const json& j) {
    FilterConfig c;
    if (!j.is_object()) throw ConfigError("filter", "expected an object");
    if (j.contains("semantic")) {
        const auto& s = j["semantic"];
        c.semantic.enabled = s.value("enabled", true);
        c.semantic.task_prompt = s.value("task_prompt", c.semantic.task_prompt);
        if (s.contains("distractors")) c.semantic.distractors = s["distractors"].get<std::vector<std::string>>();
        const auto tie = s.value("tie", std::string("keep"));
        if (tie != "keep" && tie != "filter") throw ConfigError("semantic.tie", "expected keep or filter");
        c.semantic.tie = tie == "keep" ? SemanticTie::keep : SemanticTie::filter;
        if (c.semantic.enabled && c.semantic.distractors.empty()) {
            throw ConfigError("semantic.distractors", "at least one distractor prompt is required");
        }
    }
    if (j.contains("confidence")) {
        const auto& v = j["confidence"];
        c.confidence = v.is_boolean() ? v.get<bool>() : v.value("enabled", true);
    }
    if (j.contains("knn")) {
        const auto& v = j["knn"];
        c.knn = v.is_boolean() ? v.get<bool>() : v.value("enabled", false);
    }
    return c;
}

json filter_config_to_json(const FilterConfig& c) {
    return {{"semantic",
             {{"enabled", c.semantic.enabled},
              {"task_prompt", c.semantic.task_prompt},
              {"distractors", c.semantic.distractors},
              {"tie", c.semantic.tie == SemanticTie::keep ? "keep" : "filter"}}},
            {"confidence", {{"enabled", c.confidence}}},
            {"knn", {{"enabled", c.knn}}}};
}

FilterResult filter_pipeline(std::vector<edit::AugmentationRecord>& edits, const FilterConfig& config,
                             const FilterModels& models, const ImageStore& edit_images, unsigned workers) {
    if (config.semantic.enabled && !models.zero_shot) throw ConfigError("semantic", "no zero-shot classifier");
    if (config.confidence && !models.classifier) throw ConfigError("confidence", "no task classifier");
    if (config.confidence && !models.thresholds) throw ConfigError("thresholds", "confidence stage needs thresholds");
    if (config.knn && (!models.embedder || !models.knn)) throw ConfigError("knn", "no embedder or train index");

    std::vector<std::vector<FilterVerdict>> per_edit(edits.size());
    std::vector<char> eligible(edits.size(), 0);
    for (std::size_t i = 0; i < edits.size(); ++i) {
        eligible[i] = edits[i].ok() && edits[i].status == edit::EditStatus::generated;
    }
    parallel_for(edits.size(), workers, [&](std::size_t i) {
        if (!eligible[i]) return;
        const auto& r = edits[i];
        const Image img = edit_images.get(r.uri);
        auto& out = per_edit[i];
        if (config.semantic.enabled) {
            out.push_back(semantic_filter(*models.zero_shot, img, r.edit_id, config.semantic.task_prompt,
                                          config.semantic.distractors, config.semantic.tie));
            if (!out.back().keep) return;
        }
        if (config.confidence) {
            out.push_back(confidence_filter(*models.classifier, img, r.edit_id, r.label, *models.thresholds));
            if (!out.back().keep) return;
        }
        if (config.knn) out.push_back(knn_filter(*models.embedder, *models.knn, img, r.edit_id, r.label));
    });

    FilterResult result;
    for (std::size_t i = 0; i < edits.size(); ++i) {
        if (!eligible[i]) continue;
        auto& r = edits[i];
        const auto& verdicts = per_edit[i];
        const FilterVerdict* rejecting = nullptr;
        for (const auto& v : verdicts) {
            if (!v.keep) rejecting = &v;
        }
        if (rejecting) {
            const auto status = rejecting->stage == Stage::semantic     ? edit::EditStatus::filtered_semantic
                                : rejecting->stage == Stage::confidence ? edit::EditStatus::filtered_confidence
                                                                        : edit::EditStatus::filtered_knn;
            edit::transition(r, status, "filter:" + std::string(to_string(rejecting->stage)),
                             std::string(to_string(rejecting->failure)));
            result.filtered.push_back(r.edit_id);
        } else {
            edit::transition(r, edit::EditStatus::kept, "filter", "passed");
            result.kept.push_back(r.edit_id);
        }
        result.verdicts.insert(result.verdicts.end(), verdicts.begin(), verdicts.end());
    }
    return result;
}

}  // namespace alia::filter
