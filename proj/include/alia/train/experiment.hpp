// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "alia/data/dataset.hpp"
#include "alia/data/image_source.hpp"
#include "alia/train/metrics.hpp"
#include "alia/train/trainer.hpp"

namespace alia::train {

// Scores a model on one split of `dataset`.
MetricValue evaluate(const Model& model, const data::Dataset& dataset, const data::ImageSource& images,
                     MetricKind kind, data::Split split = data::Split::test);

inline const std::vector<double> kLearningRateGrid = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
inline const std::vector<double> kWeightDecayGrid = {1e-5, 1e-4, 1e-3, 1e-2};

struct HparamPoint {
    double learning_rate = 0;
    double weight_decay = 0;
    std::optional<double> validation;
    std::string error;
};

struct HparamSweep {
    TrainConfig best;
    double best_validation = 0;
    std::vector<HparamPoint> points;  // ascending lr, then ascending wd
};

// Fits the baseline at every grid point and keeps the best validation score.
// Ties keep the earlier point (smaller lr, then smaller wd). Failed points are
// recorded and skipped; BackendError if every point fails.
HparamSweep sweep_hyperparams(const TrainerBackend& trainer, const data::Dataset& dataset,
                              const data::ImageSource& images, const TrainConfig& base,
                              std::span<const double> learning_rates = kLearningRateGrid,
                              std::span<const double> weight_decays = kWeightDecayGrid, unsigned workers = 1);

// Append-only JSONL of finished (config, seed) results so an interrupted
// experiment only re-runs what is missing. The last line for a key wins.
class ResultsLedger {
public:
    struct Entry {
        std::string config_hash;
        std::string variant;
        std::uint64_t seed = 0;
        MetricValue metric;
    };

    explicit ResultsLedger(std::filesystem::path path);
    std::optional<Entry> find(const std::string& config_hash, std::uint64_t seed) const;
    void put(const Entry& entry);
    std::size_t size() const;
    // Latest entry per (config hash, seed), in order of last write.
    std::vector<Entry> entries() const;

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::map<std::pair<std::string, std::uint64_t>, Entry> entries_;
    std::vector<std::pair<std::string, std::uint64_t>> order_;
};

// Charts from a ledger: "variants.svg" (one bar per variant, population std
// over seeds) and, when quantity runs are present, "quantity.svg". A variant
// recorded under several config hashes is shown with its latest one.
std::map<std::string, std::string> ledger_charts(const ResultsLedger& ledger, const std::string& title,
                                                 const std::string& metric_label);

struct RunOptions {
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    MetricKind metric = MetricKind::macro_f1;
    unsigned workers = 1;
    ResultsLedger* ledger = nullptr;
    // Per-class number of images to add. Defaults to the class distribution
    // of the extra split.
    std::optional<data::ClassDistribution> target;
};

struct VariantRun {
    std::string name;
    MetricReport report;
    data::ClassDistribution added;
    std::string config_hash;
    std::size_t reused = 0;  // seeds answered from the ledger
    std::vector<std::string> diagnostics;
};

// Trains `config.variant` once per seed and scores the test split. The extra
// split is never trained on directly: additive variants draw the target
// distribution from `pool` (seeded, without replacement) and merge it into
// train. The per-class counts added must equal the target exactly, otherwise
// Error(parity). Non-additive variants ignore `pool`.
VariantRun run_variant(const std::string& name, const data::Dataset& dataset, std::span<const data::ImageRecord> pool,
                       const TrainerBackend& trainer, const TrainConfig& config, const data::ImageSource& images,
                       const RunOptions& options);

// Records usable as a pool for `variant`: extra-split records for +real.
std::vector<data::ImageRecord> real_pool(const data::Dataset& dataset);

struct PromptQualityResult {
    MetricReport user_prompt;
    MetricReport alia;
    MetricReport alia_filtered;
};

PromptQualityResult ablation_prompt_quality(const data::Dataset& dataset,
                                            std::span<const data::ImageRecord> user_prompt_pool,
                                            std::span<const data::ImageRecord> alia_pool,
                                            std::span<const data::ImageRecord> alia_filtered_pool,
                                            const TrainerBackend& trainer, const TrainConfig& config,
                                            const data::ImageSource& images, const RunOptions& options);

inline const std::vector<double> kQuantityFractions = {0.0, 0.025, 0.05, 0.10, 0.25, 0.5, 1.0};

struct QuantityPoint {
    double fraction = 0;
    std::size_t requested = 0;
    std::optional<MetricReport> report;
    std::string diagnostic;  // set when the pool could not supply the target
};

// Adds round(fraction * |train|) images apportioned over the train class
// distribution. Points the pool cannot supply are reported, not fatal.
std::vector<QuantityPoint> ablation_quantity(const data::Dataset& dataset, std::span<const data::ImageRecord> pool,
                                             std::span<const double> fractions, const TrainerBackend& trainer,
                                             const TrainConfig& config, const data::ImageSource& images,
                                             const RunOptions& options);

// Fraction with the highest mean among the points that ran.
std::optional<double> best_fraction(std::span<const QuantityPoint> points);

struct EditMethodResult {
    MetricReport img2img;
    MetricReport instruct_pix2pix;
};

// PreconditionError when either pool is empty.
EditMethodResult ablation_edit_method(const data::Dataset& dataset, std::span<const data::ImageRecord> img2img_pool,
                                      std::span<const data::ImageRecord> pix2pix_pool, const TrainerBackend& trainer,
                                      const TrainConfig& config, const data::ImageSource& images,
                                      const RunOptions& options);

}  // namespace alia::train
