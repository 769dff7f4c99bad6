// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "alia/content_store.hpp"
#include "alia/data/dataset.hpp"
#include "alia/data/image_source.hpp"
#include "alia/edit/records.hpp"
#include "alia/image.hpp"

namespace alia::filter {

// All three interfaces are called from several threads at once.

// Image-text similarity, one score per prompt, higher = more similar.
class ZeroShotClassifier {
public:
    virtual ~ZeroShotClassifier() = default;
    virtual std::vector<double> scores(const Image& image, std::span<const std::string> prompts) const = 0;
};

// Softmax over the dataset classes, in classes() order.
class TaskClassifier {
public:
    virtual ~TaskClassifier() = default;
    virtual std::vector<double> softmax(const Image& image) const = 0;
    virtual const std::vector<std::string>& classes() const = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(const Image& image) const = 0;
};

// Offline zero-shot stand-in: the task prompt scores the colour contrast
// between centre and surround (an object is present), every other prompt a
// flat 0.2. Washed-out edits lose the object and fall to the distractors.
class StubZeroShotClassifier : public ZeroShotClassifier {
public:
    explicit StubZeroShotClassifier(std::string task_prompt) : task_prompt_(std::move(task_prompt)) {}
    std::vector<double> scores(const Image& image, std::span<const std::string> prompts) const override;

private:
    std::string task_prompt_;
};

// colour_features as an embedding.
class StubEmbedder : public Embedder {
public:
    std::vector<double> embed(const Image& image) const override;
};

struct ThresholdTable {
    std::map<std::string, double> t;
    std::map<std::string, std::size_t> support;

    friend bool operator==(const ThresholdTable&, const ThresholdTable&) = default;
};

nlohmann::json thresholds_to_json(const ThresholdTable& table);
ThresholdTable thresholds_from_json(const nlohmann::json& j);

// t_y = mean of probs[i][y] over the rows with labels[i] == y. Throws
// Error(missing_class) for a class without rows.
ThresholdTable thresholds_from_scores(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels,
                                      std::span<const std::string> classes);

// Runs the classifier over the train split of `train`.
ThresholdTable compute_class_thresholds(const TaskClassifier& classifier, const data::Dataset& train,
                                        const data::ImageSource& images, unsigned workers = 1);

enum class Stage { semantic, confidence, knn };
enum class FailureKind { none, total, identity, class_corruption, neighbor_mismatch };

std::string_view to_string(Stage stage);
std::string_view to_string(FailureKind kind);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

struct ConfidenceDecision {
    bool keep = true;
    std::size_t predicted = 0;
    double confidence = 0.0;
    double threshold = 0.0;
    FailureKind failure = FailureKind::none;
};

// Filter when probs[yhat] >= thresholds[yhat] (equality filters).
ConfidenceDecision confidence_decision(std::span<const double> probs, std::size_t true_label,
                                       std::span<const double> thresholds);

enum class SemanticTie { keep, filter };

struct SemanticDecision {
    bool keep = true;
    std::size_t argmax = 0;  // 0 is the task prompt
};

// scores[0] is the task prompt, the rest are distractors.
SemanticDecision semantic_decision(std::span<const double> scores, SemanticTie tie = SemanticTie::keep);

struct FilterVerdict {
    std::string edit_id;
    Stage stage = Stage::semantic;
    bool keep = true;
    FailureKind failure = FailureKind::none;
    // semantic
    std::vector<std::string> prompts;
    std::vector<double> scores;
    std::optional<std::size_t> top_prompt;
    // confidence
    std::optional<std::string> predicted;
    std::optional<double> confidence;
    std::optional<double> threshold;
    // knn
    std::optional<std::string> neighbor_id;
    std::optional<std::string> neighbor_label;
    std::optional<double> distance;
};

nlohmann::json verdict_to_json(const FilterVerdict& verdict);
FilterVerdict verdict_from_json(const nlohmann::json& j);

FilterVerdict semantic_filter(const ZeroShotClassifier& zs, const Image& image, const std::string& edit_id,
                              const std::string& task_prompt, std::span<const std::string> distractors,
                              SemanticTie tie = SemanticTie::keep);

FilterVerdict confidence_filter(const TaskClassifier& classifier, const Image& image, const std::string& edit_id,
                                const std::string& label, const ThresholdTable& thresholds);

// Train embeddings, L2-normalised, searched by cosine distance. Ties go to
// the lexicographically lowest record id.
class KnnIndex {
public:
    KnnIndex(const Embedder& embedder, const data::Dataset& train, const data::ImageSource& images);
    KnnIndex(std::vector<std::string> ids, std::vector<std::string> labels, std::vector<std::vector<double>> vectors);

    struct Hit {
        std::size_t index;
        double distance;
    };
    Hit nearest(std::span<const double> query) const;
    const std::string& id(std::size_t i) const { return ids_[i]; }
    const std::string& label(std::size_t i) const { return labels_[i]; }
    std::size_t size() const { return ids_.size(); }

private:
    std::vector<std::string> ids_;
    std::vector<std::string> labels_;
    std::vector<std::vector<double>> vectors_;
};

FilterVerdict knn_filter(const Embedder& embedder, const KnnIndex& index, const Image& image,
                         const std::string& edit_id, const std::string& label);

// Defaults: semantic and confidence on, knn off; CUB task prompt and
// distractors.
struct FilterConfig {
    struct Semantic {
        bool enabled = true;
        std::string task_prompt = "a photo of a bird";
        std::vector<std::string> distractors = {"a photo of an object", "a photo of a scene",
                                                "a photo of geometric shapes", "a photo", "an image"};
        SemanticTie tie = SemanticTie::keep;
    } semantic;
    bool confidence = true;
    bool knn = false;
};

FilterConfig parse_filter_config(const nlohmann::json& j);
nlohmann::json filter_config_to_json(const FilterConfig& config);

struct FilterModels {
    const ZeroShotClassifier* zero_shot = nullptr;
    const TaskClassifier* classifier = nullptr;
    const ThresholdTable* thresholds = nullptr;
    const Embedder* embedder = nullptr;
    const KnnIndex* knn = nullptr;
};

struct FilterResult {
    std::vector<FilterVerdict> verdicts;  // edit order, then stage order
    std::vector<std::string> kept;
    std::vector<std::string> filtered;
};

// Runs the enabled stages semantic -> confidence -> knn over every edit that
// succeeded and is still `generated`, stopping at the first stage that
// filters. Each record moves to kept or the matching filtered-* status.
// Throws ConfigError when an enabled stage lacks its model or thresholds.
FilterResult filter_pipeline(std::vector<edit::AugmentationRecord>& edits, const FilterConfig& config,
                             const FilterModels& models, const ImageStore& edit_images, unsigned workers = 1);

}  // namespace alia::filter
