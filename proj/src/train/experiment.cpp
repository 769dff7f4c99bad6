// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/train/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <spdlog/spdlog.h>

#include "alia/data/synthetic.hpp"
#include "alia/error.hpp"
#include "alia/hash.hpp"
#include "alia/parallel.hpp"
#include "alia/rng.hpp"
#include "alia/train/charts.hpp"

namespace alia::train {

namespace {

std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

data::Dataset without_extra(const data::Dataset& dataset) {
    std::vector<data::ImageRecord> kept;
    for (const auto& r : dataset.records())
        if (r.split != data::Split::extra) kept.push_back(r);
    return dataset.with_records(std::move(kept));
}

std::string fingerprint(const data::Dataset& base, std::span<const data::ImageRecord> pool,
                        const std::optional<data::ClassDistribution>& target) {
    Sha256 h;
    std::vector<std::string> ids;
    for (const auto& r : base.records()) ids.push_back(std::string(data::to_string(r.split)) + ":" + r.id);
    std::sort(ids.begin(), ids.end());
    h.field("base").field(ids.size());
    for (const auto& id : ids) h.field(id);
    ids.clear();
    for (const auto& r : pool) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    h.field("pool").field(ids.size());
    for (const auto& id : ids) h.field(id);
    h.field("target");
    if (target)
        for (const auto& [label, n] : target->counts) h.field(label).field(n);
    return h.hex_digest();
}

nlohmann::json metric_to_json(const MetricValue& m) {
    nlohmann::json per_class = nlohmann::json::array();
    for (double v : m.per_class) per_class.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    return {{"value", m.value}, {"per_class", per_class}, {"excluded", m.excluded}};
}

MetricValue metric_from_json(const nlohmann::json& j) {
    MetricValue m;
    m.value = j.at("value").get<double>();
    for (const auto& v : j.at("per_class"))
        m.per_class.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    j.at("excluded").get_to(m.excluded);
    return m;
}

MetricReport summarize(MetricKind kind, const std::vector<std::string>& classes,
                       const std::vector<std::uint64_t>& seeds, const std::vector<MetricValue>& values) {
    MetricReport report;
    report.kind = kind;
    report.seeds = seeds;
    for (const auto& v : values) report.per_seed.push_back(v.value);
    std::tie(report.mean, report.stddev) = mean_std(report.per_seed);
    for (std::size_t c = 0; c < classes.size(); ++c) {
        double sum = 0;
        std::size_t n = 0;
        for (const auto& v : values) {
            if (c < v.per_class.size() && !std::isnan(v.per_class[c])) {
                sum += v.per_class[c];
                ++n;
            }
        }
        if (n) report.per_class[classes[c]] = sum / static_cast<double>(n);
    }
    return report;
}

}  // namespace

MetricValue evaluate(const Model& model, const data::Dataset& dataset, const data::ImageSource& images,
                     MetricKind kind, data::Split split) {
    std::vector<std::size_t> truth, predicted;
    for (const auto& r : dataset.split(split)) {
        truth.push_back(dataset.class_index(r.label));
        predicted.push_back(argmax(model.softmax(images.load(r))));
    }
    return compute_metric(kind, dataset.classes().size(), truth, predicted);
}

HparamSweep sweep_hyperparams(const TrainerBackend& trainer, const data::Dataset& dataset,
                              const data::ImageSource& images, const TrainConfig& base,
                              std::span<const double> learning_rates, std::span<const double> weight_decays,
                              unsigned workers) {
    if (learning_rates.empty() || weight_decays.empty()) throw ConfigError("sweep", "empty hyperparameter grid");
    std::vector<double> lrs(learning_rates.begin(), learning_rates.end());
    std::vector<double> wds(weight_decays.begin(), weight_decays.end());
    std::sort(lrs.begin(), lrs.end());
    std::sort(wds.begin(), wds.end());

    HparamSweep sweep;
    for (double lr : lrs)
        for (double wd : wds) sweep.points.push_back({lr, wd, std::nullopt, {}});

    parallel_for(sweep.points.size(), workers, [&](std::size_t i) {
        auto& point = sweep.points[i];
        TrainConfig config = base;
        config.learning_rate = point.learning_rate;
        config.weight_decay = point.weight_decay;
        try {
            point.validation = trainer.fit(config, dataset, images).validation;
        } catch (const std::exception& e) {
            point.error = e.what();
            spdlog::warn("sweep point lr={} wd={} failed: {}", point.learning_rate, point.weight_decay, e.what());
        }
    });

    bool found = false;
    for (const auto& point : sweep.points) {
        if (!point.validation) continue;
        if (!found || *point.validation > sweep.best_validation) {
            found = true;
            sweep.best_validation = *point.validation;
            sweep.best = base;
            sweep.best.learning_rate = point.learning_rate;
            sweep.best.weight_decay = point.weight_decay;
        }
    }
    if (!found) throw BackendError("every hyperparameter point failed");
    return sweep;
}

ResultsLedger::ResultsLedger(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            Entry e{j.at("config_hash").get<std::string>(), j.at("variant").get<std::string>(),
                    j.at("seed").get<std::uint64_t>(), metric_from_json(j.at("metric"))};
            order_.emplace_back(e.config_hash, e.seed);
            entries_[{e.config_hash, e.seed}] = std::move(e);
        } catch (const std::exception&) {
            spdlog::warn("results ledger {}: skipping unreadable line", path_.string());
        }
    }
}

std::optional<ResultsLedger::Entry> ResultsLedger::find(const std::string& config_hash, std::uint64_t seed) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find({config_hash, seed});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResultsLedger::put(const Entry& entry) {
    nlohmann::json j = {{"config_hash", entry.config_hash},
                        {"variant", entry.variant},
                        {"seed", entry.seed},
                        {"metric", metric_to_json(entry.metric)}};
    std::string line = j.dump() + "\n";
    std::lock_guard lock(mutex_);
    if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) throw IoError("cannot append to " + path_.string());
    entries_[{entry.config_hash, entry.seed}] = entry;
    order_.emplace_back(entry.config_hash, entry.seed);
}

std::size_t ResultsLedger::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::vector<ResultsLedger::Entry> ResultsLedger::entries() const {
    std::lock_guard lock(mutex_);
    std::vector<Entry> out;
    std::set<std::pair<std::string, std::uint64_t>> seen;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it)
        if (seen.insert(*it).second) out.push_back(entries_.at(*it));
    std::reverse(out.begin(), out.end());
    return out;
}

std::map<std::string, std::string> ledger_charts(const ResultsLedger& ledger, const std::string& title,
                                                 const std::string& metric_label) {
    const auto entries = ledger.entries();
    std::map<std::string, std::string> latest_hash;
    std::vector<std::string> names;
    for (const auto& e : entries) {
        if (!latest_hash.count(e.variant)) names.push_back(e.variant);
        latest_hash[e.variant] = e.config_hash;
    }
    auto summary = [&](const std::string& name) {
        std::vector<double> values;
        for (const auto& e : entries)
            if (e.variant == name && e.config_hash == latest_hash[name]) values.push_back(100.0 * e.metric.value);
        return mean_std(values);
    };
    std::vector<Bar> bars;
    std::vector<CurvePoint> curve;
    for (const auto& name : names) {
        auto [mean, sd] = summary(name);
        if (name.rfind("quantity-", 0) == 0)
            curve.push_back({100.0 * std::stod(name.substr(9)), mean, sd});
        else
            bars.push_back({name, mean, sd});
    }
    std::map<std::string, std::string> charts;
    if (!bars.empty()) charts["variants.svg"] = bar_chart_svg(title, metric_label, bars);
    if (!curve.empty()) {
        std::sort(curve.begin(), curve.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
        charts["quantity.svg"] = curve_svg(title + ": images added", "added (% of train)", metric_label, curve);
    }
    return charts;
}

std::vector<data::ImageRecord> real_pool(const data::Dataset& dataset) { return dataset.split(data::Split::extra); }

VariantRun run_variant(const std::string& name, const data::Dataset& dataset, std::span<const data::ImageRecord> pool,
                       const TrainerBackend& trainer, const TrainConfig& config, const data::ImageSource& images,
                       const RunOptions& options) {
    validate_config(config);
    if (options.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
    const data::Dataset base = without_extra(dataset);
    const bool additive = is_additive(config.variant);

    std::optional<data::ClassDistribution> target;
    if (additive) {
        target = options.target ? *options.target : data::class_distribution(dataset, data::Split::extra);
        if (pool.empty() && target->total() > 0)
            throw PreconditionError("variant " + name + " has an empty pool");
    }

    VariantRun run;
    run.name = name;
    if (target) run.added = *target;
    {
        TrainConfig keyed = config;
        keyed.seed = 0;
        Sha256 h;
        h.field(name).field(config_to_json(keyed).dump()).field(to_string(options.metric));
        h.field(fingerprint(base, additive ? pool : std::span<const data::ImageRecord>{}, target));
        run.config_hash = h.hex_digest();
    }

    std::vector<MetricValue> values(options.seeds.size());
    std::vector<std::vector<std::string>> diagnostics(options.seeds.size());
    std::vector<char> reused(options.seeds.size(), 0);
    parallel_for(options.seeds.size(), options.workers, [&](std::size_t i) {
        const std::uint64_t seed = options.seeds[i];
        if (options.ledger) {
            if (auto hit = options.ledger->find(run.config_hash, seed)) {
                values[i] = hit->metric;
                reused[i] = 1;
                return;
            }
        }
        data::Dataset training = base;
        if (additive) {
            auto added = data::sample_to_match(pool, *target, derive_seed(seed, "variant-pool:" + name));
            auto got = data::class_distribution(added);
            for (const auto& [label, n] : target->counts) {
                if (got[label] != n)
                    throw Error(ErrorCode::parity, "variant " + name + " added " + std::to_string(got[label]) +
                                                       " images of class " + label + ", expected " +
                                                       std::to_string(n));
            }
            if (got.total() != target->total())
                throw Error(ErrorCode::parity, "variant " + name + " added images of classes outside the target");
            auto merged = data::merge_augmented(base, added);
            diagnostics[i] = merged.warnings;
            training = std::move(merged.dataset);
        }
        TrainConfig seeded = config;
        seeded.seed = seed;
        auto fit = trainer.fit(seeded, training, images);
        values[i] = evaluate(*fit.model, training, images, options.metric);
        if (options.ledger) options.ledger->put({run.config_hash, name, seed, values[i]});
    });

    for (std::size_t i = 0; i < values.size(); ++i) {
        run.reused += reused[i];
        for (auto& d : diagnostics[i])
            if (std::find(run.diagnostics.begin(), run.diagnostics.end(), d) == run.diagnostics.end())
                run.diagnostics.push_back(d);
    }
    run.report = summarize(options.metric, dataset.classes(), options.seeds, values);
    return run;
}

PromptQualityResult ablation_prompt_quality(const data::Dataset& dataset,
                                            std::span<const data::ImageRecord> user_prompt_pool,
                                            std::span<const data::ImageRecord> alia_pool,
                                            std::span<const data::ImageRecord> alia_filtered_pool,
                                            const TrainerBackend& trainer, const TrainConfig& config,
                                            const data::ImageSource& images, const RunOptions& options) {
    TrainConfig c = config;
    c.variant = Variant::alia;
    PromptQualityResult out;
    out.user_prompt = run_variant("user-prompt", dataset, user_prompt_pool, trainer, c, images, options).report;
    out.alia = run_variant("alia-unfiltered", dataset, alia_pool, trainer, c, images, options).report;
    out.alia_filtered = run_variant("alia-filtered", dataset, alia_filtered_pool, trainer, c, images, options).report;
    return out;
}

std::vector<QuantityPoint> ablation_quantity(const data::Dataset& dataset, std::span<const data::ImageRecord> pool,
                                             std::span<const double> fractions, const TrainerBackend& trainer,
                                             const TrainConfig& config, const data::ImageSource& images,
                                             const RunOptions& options) {
    auto train_dist = data::class_distribution(dataset, data::Split::train);
    std::vector<std::string> labels;
    std::vector<double> weights;
    for (const auto& [label, n] : train_dist.counts) {
        labels.push_back(label);
        weights.push_back(static_cast<double>(n));
    }
    const auto train_size = static_cast<double>(train_dist.total());

    std::vector<QuantityPoint> points;
    for (double f : fractions) {
        if (f < 0) throw RangeError("quantity fraction must be non-negative");
        QuantityPoint point;
        point.fraction = f;
        point.requested = static_cast<std::size_t>(std::llround(f * train_size));
        TrainConfig c = config;
        RunOptions o = options;
        if (point.requested == 0) {
            c.variant = Variant::baseline;
        } else {
            c.variant = Variant::alia;
            auto counts = data::apportion(point.requested, weights);
            data::ClassDistribution target;
            for (std::size_t i = 0; i < labels.size(); ++i) target.counts[labels[i]] = counts[i];
            o.target = target;
        }
        char name[32];
        std::snprintf(name, sizeof name, "quantity-%.4g", f);
        try {
            point.report = run_variant(name, dataset, pool, trainer, c, images, o).report;
        } catch (const ShortageError& e) {
            point.diagnostic = e.what();
            spdlog::warn("quantity point {}: {}", f, e.what());
        }
        points.push_back(std::move(point));
    }
    return points;
}

std::optional<double> best_fraction(std::span<const QuantityPoint> points) {
    std::optional<double> best;
    double best_mean = 0;
    for (const auto& p : points) {
        if (!p.report) continue;
        if (!best || p.report->mean > best_mean) {
            best = p.fraction;
            best_mean = p.report->mean;
        }
    }
    return best;
}

EditMethodResult ablation_edit_method(const data::Dataset& dataset, std::span<const data::ImageRecord> img2img_pool,
                                      std::span<const data::ImageRecord> pix2pix_pool, const TrainerBackend& trainer,
                                      const TrainConfig& config, const data::ImageSource& images,
                                      const RunOptions& options) {
    if (img2img_pool.empty()) throw PreconditionError("edit-method comparison needs an img2img pool");
    if (pix2pix_pool.empty()) throw PreconditionError("edit-method comparison needs an instruct-pix2pix pool");
    TrainConfig c = config;
    c.variant = Variant::alia;
    EditMethodResult out;
    out.img2img = run_variant("edit-img2img", dataset, img2img_pool, trainer, c, images, options).report;
    out.instruct_pix2pix = run_variant("edit-instruct-pix2pix", dataset, pix2pix_pool, trainer, c, images, options).report;
    return out;
}

}  // namespace alia::train
