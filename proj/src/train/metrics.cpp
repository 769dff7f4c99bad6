// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/train/metrics.hpp"

#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "alia/error.hpp"

namespace alia::train {

std::string_view to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::macro_f1: return "macro-f1";
        case MetricKind::balanced_accuracy: return "balanced-accuracy";
        case MetricKind::accuracy: return "accuracy";
    }
    return "?";
}

MetricKind parse_metric(std::string_view text) {
    for (auto k : {MetricKind::macro_f1, MetricKind::balanced_accuracy, MetricKind::accuracy}) {
        if (to_string(k) == text) return k;
    }
    throw ValidationError("metric", "unknown metric '" + std::string(text) + "'");
}

ConfusionMatrix::ConfusionMatrix(std::size_t k, std::span<const std::size_t> truth,
                                 std::span<const std::size_t> predicted)
    : classes(k), counts(k, std::vector<std::size_t>(k, 0)) {
    if (truth.size() != predicted.size()) throw PreconditionError("confusion matrix: length mismatch");
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= k || predicted[i] >= k) throw PreconditionError("confusion matrix: class index out of range");
        ++counts[truth[i]][predicted[i]];
    }
}

std::size_t ConfusionMatrix::support(std::size_t c) const {
    std::size_t s = 0;
    for (auto v : counts[c]) s += v;
    return s;
}

MetricValue compute_metric(MetricKind kind, const ConfusionMatrix& cm) {
    const std::size_t k = cm.classes;
    MetricValue out;
    out.per_class.assign(k, std::numeric_limits<double>::quiet_NaN());
    std::size_t total = 0, hits = 0;
    for (std::size_t c = 0; c < k; ++c) {
        total += cm.support(c);
        hits += cm.counts[c][c];
    }
    if (total == 0) throw PreconditionError("metric over an empty test set");

    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t support = cm.support(c);
        if (support == 0) {
            out.excluded.push_back(c);
            continue;
        }
        const double tp = static_cast<double>(cm.counts[c][c]);
        const double recall = tp / static_cast<double>(support);
        double v = recall;
        if (kind == MetricKind::macro_f1) {
            std::size_t predicted = 0;
            for (std::size_t t = 0; t < k; ++t) predicted += cm.counts[t][c];
            // 2 tp / (2 tp + fp + fn) is F1 without the 0/0 case of P and R.
            v = tp == 0 ? 0.0 : 2.0 * tp / (static_cast<double>(predicted) + static_cast<double>(support));
        }
        out.per_class[c] = v;
        sum += v;
        ++used;
    }
    if (!out.excluded.empty() && kind != MetricKind::accuracy) {
        spdlog::warn("{} class(es) have no test examples and are left out of the average", out.excluded.size());
    }
    out.value = kind == MetricKind::accuracy ? static_cast<double>(hits) / static_cast<double>(total)
                                             : sum / static_cast<double>(used);
    return out;
}

MetricValue compute_metric(MetricKind kind, std::size_t k, std::span<const std::size_t> truth,
                           std::span<const std::size_t> predicted) {
    return compute_metric(kind, ConfusionMatrix(k, truth, predicted));
}

std::pair<double, double> mean_std(std::span<const double> values) {
    if (values.empty()) throw PreconditionError("mean of no values");
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return {mean, std::sqrt(var)};
}

nlohmann::json report_to_json(const MetricReport& r) {
    return {{"metric", to_string(r.kind)}, {"mean", r.mean},         {"std", r.stddev},
            {"per_seed", r.per_seed},      {"seeds", r.seeds},       {"per_class", r.per_class}};
}

MetricReport report_from_json(const nlohmann::json& j) {
    MetricReport r;
    r.kind = parse_metric(j.at("metric").get<std::string>());
    r.mean = j.at("mean").get<double>();
    r.stddev = j.at("std").get<double>();
    r.per_seed = j.at("per_seed").get<std::vector<double>>();
    r.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    r.per_class = j.value("per_class", std::map<std::string, double>{});
    return r;
}

}  // namespace alia::train
