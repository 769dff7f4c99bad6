// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace alia::train {

enum class MetricKind { macro_f1, balanced_accuracy, accuracy };

std::string_view to_string(MetricKind kind);
MetricKind parse_metric(std::string_view text);  // "macro-f1", "balanced-accuracy", "accuracy"

// counts[truth][predicted]
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::vector<std::size_t>> counts;

    ConfusionMatrix(std::size_t k, std::span<const std::size_t> truth, std::span<const std::size_t> predicted);
    std::size_t support(std::size_t c) const;  // row sum
};

struct MetricValue {
    double value = 0.0;
    std::vector<double> per_class;         // NaN for excluded classes
    std::vector<std::size_t> excluded;     // classes without test examples
};

// Macro-F1: unweighted mean of per-class F1 over classes with test examples
// (F1 = 0 when precision + recall = 0). Balanced accuracy: unweighted mean of
// per-class recall over the same classes. Accuracy: plain hit rate.
MetricValue compute_metric(MetricKind kind, const ConfusionMatrix& cm);
MetricValue compute_metric(MetricKind kind, std::size_t k, std::span<const std::size_t> truth,
                           std::span<const std::size_t> predicted);

struct MetricReport {
    MetricKind kind = MetricKind::macro_f1;
    double mean = 0.0;
    double stddev = 0.0;  // population (ddof = 0)
    std::vector<double> per_seed;
    std::vector<std::uint64_t> seeds;
    std::map<std::string, double> per_class;  // mean over seeds

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

// mean and population standard deviation of `values`.
std::pair<double, double> mean_std(std::span<const double> values);

nlohmann::json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);

}  // namespace alia::train
