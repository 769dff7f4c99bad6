// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "alia/data/dataset.hpp"
#include "alia/data/image_source.hpp"
#include "alia/filter/filters.hpp"

namespace alia::train {

enum class Variant { baseline, alia, real, txt2img, cutmix, randaug };

std::string_view to_string(Variant variant);  // "baseline", "+alia", "+real", ...
Variant parse_variant(std::string_view text);
// Variants that add images to the training set (and so obey parity).
bool is_additive(Variant variant);

struct TrainConfig {
    Variant variant = Variant::baseline;
    std::string architecture = "linear-probe";
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    int epochs = 200;
    std::uint64_t seed = 0;
    std::string optimizer = "adam-cosine";
    int batch_size = 16;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Throws ConfigError naming the field.
void validate_config(const TrainConfig& config);
nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);

// A trained classifier. softmax() must be safe to call concurrently.
class Model : public filter::TaskClassifier {
public:
    virtual nlohmann::json serialize() const = 0;
};

struct FitResult {
    std::shared_ptr<const Model> model;
    double validation = 0.0;  // accuracy on the val split, 0 when there is none
};

// fit() trains on the train split of `dataset` and validates on its val
// split. It must be deterministic for a fixed config (including seed) and
// safe to call from several threads.
class TrainerBackend {
public:
    virtual ~TrainerBackend() = default;
    virtual FitResult fit(const TrainConfig& config, const data::Dataset& dataset,
                          const data::ImageSource& images) const = 0;
    virtual std::shared_ptr<const Model> load(const nlohmann::json& serialized) const = 0;
};

// Softmax regression on colour_features plus their squares, standardised
// with train statistics. Adam with a cosine learning-rate schedule, L2
// weight decay added to the gradient (as torch.optim.Adam does), zero
// initialisation, seeded shuffling. +cutmix and +randaug apply their policy
// to every mini-batch.
class LinearProbeTrainer : public TrainerBackend {
public:
    FitResult fit(const TrainConfig& config, const data::Dataset& dataset,
                  const data::ImageSource& images) const override;
    std::shared_ptr<const Model> load(const nlohmann::json& serialized) const override;
};

std::vector<double> probe_features(const Image& image);

// What the scripted trainer sees of a training run.
struct TrainSummary {
    TrainConfig config;
    std::size_t original = 0;  // train-split originals
    std::size_t added = 0;     // train-split records of any other provenance
    double added_fraction() const { return original ? static_cast<double>(added) / static_cast<double>(original) : 0; }
};

using Surface = std::function<double(const TrainSummary&)>;

// Stub trainer with a planted response. fit() evaluates the surface to get a
// score q in [0, 1], reports it as the validation value, and returns a model
// that is right on exactly round(q * n_c) test images of each class c (a
// seeded choice) and wrong on the rest, so class-balanced accuracy on the
// test split is q up to rounding. Images outside the test split get a
// uniform softmax.
class ScriptedTrainer : public TrainerBackend {
public:
    explicit ScriptedTrainer(Surface surface) : surface_(std::move(surface)) {}
    FitResult fit(const TrainConfig& config, const data::Dataset& dataset,
                  const data::ImageSource& images) const override;
    std::shared_ptr<const Model> load(const nlohmann::json& serialized) const override;

private:
    Surface surface_;
};

// Peaks at (best_lr, best_wd), falling off quadratically in log10 space.
Surface planted_hparam_surface(double best_lr, double best_wd);
// Concave in log(added fraction), maximal at `peak`; `base` with nothing added.
Surface planted_quantity_surface(double peak = 0.075, double base = 0.70, double gain = 0.10);

}  // namespace alia::train
