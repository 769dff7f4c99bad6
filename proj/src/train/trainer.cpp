// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "alia/error.hpp"
#include "alia/features.hpp"
#include "alia/hash.hpp"
#include "alia/rng.hpp"
#include "alia/train/policy.hpp"

namespace alia::train {

namespace {

constexpr std::pair<Variant, std::string_view> kVariantNames[] = {
    {Variant::baseline, "baseline"}, {Variant::alia, "+alia"},     {Variant::real, "+real"},
    {Variant::txt2img, "+txt2img"},  {Variant::cutmix, "+cutmix"}, {Variant::randaug, "+randaug"},
};

std::vector<double> softmax_of(std::vector<double> logits) {
    double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    for (double& z : logits) {
        z = std::exp(z - m);
        sum += z;
    }
    for (double& z : logits) z /= sum;
    return logits;
}

std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

class LinearProbeModel : public Model {
public:
    std::vector<std::string> classes_;
    std::vector<double> mean_;
    std::vector<double> scale_;
    std::vector<std::vector<double>> weights_;  // [class][feature]
    std::vector<double> bias_;

    std::vector<double> standardize(const std::vector<double>& raw) const {
        std::vector<double> x(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) x[i] = (raw[i] - mean_[i]) / scale_[i];
        return x;
    }

    std::vector<double> logits(const std::vector<double>& x) const {
        std::vector<double> z(classes_.size());
        for (std::size_t c = 0; c < z.size(); ++c) {
            double s = bias_[c];
            for (std::size_t i = 0; i < x.size(); ++i) s += weights_[c][i] * x[i];
            z[c] = s;
        }
        return z;
    }

    std::vector<double> softmax(const Image& image) const override {
        return softmax_of(logits(standardize(probe_features(image))));
    }
    const std::vector<std::string>& classes() const override { return classes_; }

    nlohmann::json serialize() const override {
        return {{"kind", "linear-probe"}, {"classes", classes_}, {"mean", mean_},
                {"scale", scale_},        {"weights", weights_}, {"bias", bias_}};
    }
};

class ScriptedModel : public Model {
public:
    std::vector<std::string> classes_;
    // digest -> (true class, answered correctly)
    std::map<std::string, std::pair<std::size_t, bool>> answers_;

    std::vector<double> softmax(const Image& image) const override {
        std::size_t k = classes_.size();
        auto it = answers_.find(image.digest());
        if (it == answers_.end()) return std::vector<double>(k, 1.0 / static_cast<double>(k));
        std::vector<double> p(k, 0.0);
        auto [truth, right] = it->second;
        p[right ? truth : (truth + 1) % k] = 1.0;
        return p;
    }
    const std::vector<std::string>& classes() const override { return classes_; }

    nlohmann::json serialize() const override {
        nlohmann::json answers = nlohmann::json::object();
        for (const auto& [digest, a] : answers_) answers[digest] = {a.first, a.second};
        return {{"kind", "scripted"}, {"classes", classes_}, {"answers", answers}};
    }
};

double validation_accuracy(const Model& model, const data::Dataset& dataset, const data::ImageSource& images) {
    auto val = dataset.split(data::Split::val);
    if (val.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& r : val)
        if (argmax(model.softmax(images.load(r))) == dataset.class_index(r.label)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(val.size());
}

}  // namespace

std::string_view to_string(Variant variant) {
    for (const auto& [v, name] : kVariantNames)
        if (v == variant) return name;
    return "?";
}

Variant parse_variant(std::string_view text) {
    for (const auto& [v, name] : kVariantNames)
        if (name == text || name.substr(name.front() == '+' ? 1 : 0) == text) return v;
    throw ConfigError("variant", "unknown variant '" + std::string(text) + "'");
}

bool is_additive(Variant variant) {
    return variant == Variant::alia || variant == Variant::real || variant == Variant::txt2img;
}

void validate_config(const TrainConfig& config) {
    if (!(config.learning_rate > 0)) throw ConfigError("learning_rate", "must be positive");
    if (!(config.weight_decay >= 0)) throw ConfigError("weight_decay", "must be non-negative");
    if (config.epochs <= 0) throw ConfigError("epochs", "must be positive");
    if (config.batch_size <= 0) throw ConfigError("batch_size", "must be positive");
    if (config.architecture.empty()) throw ConfigError("architecture", "must not be empty");
}

nlohmann::json config_to_json(const TrainConfig& config) {
    return {{"variant", to_string(config.variant)},
            {"architecture", config.architecture},
            {"learning_rate", config.learning_rate},
            {"weight_decay", config.weight_decay},
            {"epochs", config.epochs},
            {"seed", config.seed},
            {"optimizer", config.optimizer},
            {"batch_size", config.batch_size}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
        c.architecture = j.value("architecture", c.architecture);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.epochs = j.value("epochs", c.epochs);
        c.seed = j.value("seed", c.seed);
        c.optimizer = j.value("optimizer", c.optimizer);
        c.batch_size = j.value("batch_size", c.batch_size);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("train", e.what());
    }
    validate_config(c);
    return c;
}

std::vector<double> probe_features(const Image& image) {
    auto f = colour_features(image);
    std::vector<double> x(f.begin(), f.end());
    for (double v : f) x.push_back(v * v);
    return x;
}

FitResult LinearProbeTrainer::fit(const TrainConfig& config, const data::Dataset& dataset,
                                  const data::ImageSource& images) const {
    validate_config(config);
    auto train = dataset.split(data::Split::train);
    if (train.empty()) throw PreconditionError("training split is empty");
    const std::size_t k = dataset.classes().size();
    const std::size_t n = train.size();

    std::vector<Image> pixels;
    std::vector<std::size_t> labels;
    pixels.reserve(n);
    for (const auto& r : train) {
        pixels.push_back(images.load(r));
        labels.push_back(dataset.class_index(r.label));
    }

    auto model = std::make_shared<LinearProbeModel>();
    model->classes_ = dataset.classes();
    const std::size_t d = probe_features(pixels.front()).size();
    model->mean_.assign(d, 0.0);
    model->scale_.assign(d, 0.0);
    {
        std::vector<std::vector<double>> raw;
        for (const auto& img : pixels) raw.push_back(probe_features(img));
        for (const auto& x : raw)
            for (std::size_t i = 0; i < d; ++i) model->mean_[i] += x[i] / static_cast<double>(n);
        for (const auto& x : raw)
            for (std::size_t i = 0; i < d; ++i)
                model->scale_[i] += (x[i] - model->mean_[i]) * (x[i] - model->mean_[i]) / static_cast<double>(n);
        for (double& s : model->scale_) s = std::max(std::sqrt(s), 1e-6);
    }
    model->weights_.assign(k, std::vector<double>(d, 0.0));
    model->bias_.assign(k, 0.0);

    std::unique_ptr<AugmentationPolicy> policy;
    if (config.variant == Variant::cutmix) policy = make_policy("cutmix");
    if (config.variant == Variant::randaug) policy = make_policy("randaug");

    // Adam state, weights then bias per class.
    std::vector<std::vector<double>> m(k, std::vector<double>(d + 1, 0.0)), v = m;
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);
    const std::size_t steps_per_epoch = (n + batch - 1) / batch;
    const double total_steps = static_cast<double>(steps_per_epoch) * config.epochs;
    SplitMix64 rng(derive_seed(config.seed, "train"));
    std::size_t step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        auto order = sample_indices_in_draw_order(n, n, rng);
        for (std::size_t start = 0; start < n; start += batch) {
            std::vector<Sample> samples;
            for (std::size_t i = start; i < std::min(n, start + batch); ++i) {
                Sample s{pixels[order[i]], std::vector<double>(k, 0.0)};
                s.target[labels[order[i]]] = 1.0;
                samples.push_back(std::move(s));
            }
            if (policy) policy->apply(samples, rng);

            std::vector<std::vector<double>> grad(k, std::vector<double>(d + 1, 0.0));
            const double inv = 1.0 / static_cast<double>(samples.size());
            for (const auto& s : samples) {
                auto x = model->standardize(probe_features(s.image));
                auto p = softmax_of(model->logits(x));
                for (std::size_t c = 0; c < k; ++c) {
                    double g = (p[c] - s.target[c]) * inv;
                    for (std::size_t i = 0; i < d; ++i) grad[c][i] += g * x[i];
                    grad[c][d] += g;
                }
            }
            const double lr = config.learning_rate * 0.5 *
                              (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t c = 0; c < k; ++c) {
                for (std::size_t i = 0; i <= d; ++i) {
                    double& param = i < d ? model->weights_[c][i] : model->bias_[c];
                    double g = grad[c][i] + config.weight_decay * param;
                    m[c][i] = beta1 * m[c][i] + (1 - beta1) * g;
                    v[c][i] = beta2 * v[c][i] + (1 - beta2) * g * g;
                    param -= lr * (m[c][i] / bc1) / (std::sqrt(v[c][i] / bc2) + eps);
                }
            }
        }
    }
    FitResult result;
    result.validation = validation_accuracy(*model, dataset, images);
    result.model = std::move(model);
    return result;
}

std::shared_ptr<const Model> LinearProbeTrainer::load(const nlohmann::json& j) const {
    if (j.value("kind", "") != "linear-probe") throw ValidationError("kind", "not a linear-probe model");
    auto model = std::make_shared<LinearProbeModel>();
    try {
        j.at("classes").get_to(model->classes_);
        j.at("mean").get_to(model->mean_);
        j.at("scale").get_to(model->scale_);
        j.at("weights").get_to(model->weights_);
        j.at("bias").get_to(model->bias_);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("model", e.what());
    }
    return model;
}

FitResult ScriptedTrainer::fit(const TrainConfig& config, const data::Dataset& dataset,
                               const data::ImageSource& images) const {
    validate_config(config);
    TrainSummary summary{config, 0, 0};
    for (const auto& r : dataset.split(data::Split::train))
        (r.provenance == data::Provenance::original ? summary.original : summary.added)++;
    const double q = std::clamp(surface_(summary), 0.0, 1.0);

    auto model = std::make_shared<ScriptedModel>();
    model->classes_ = dataset.classes();
    std::map<std::size_t, std::vector<std::string>> by_class;
    for (const auto& r : dataset.split(data::Split::test)) {
        std::string digest = images.load(r).digest();
        std::size_t c = dataset.class_index(r.label);
        model->answers_[digest] = {c, false};
        by_class[c].push_back(digest);
    }
    for (auto& [c, digests] : by_class) {
        SplitMix64 rng(derive_seed(config.seed, "scripted:" + dataset.classes()[c]));
        auto order = sample_indices_in_draw_order(digests.size(), digests.size(), rng);
        auto right = static_cast<std::size_t>(std::llround(q * static_cast<double>(digests.size())));
        for (std::size_t i = 0; i < right; ++i) model->answers_[digests[order[i]]].second = true;
    }
    return FitResult{std::move(model), q};
}

std::shared_ptr<const Model> ScriptedTrainer::load(const nlohmann::json& j) const {
    if (j.value("kind", "") != "scripted") throw ValidationError("kind", "not a scripted model");
    auto model = std::make_shared<ScriptedModel>();
    j.at("classes").get_to(model->classes_);
    for (const auto& [digest, a] : j.at("answers").items())
        model->answers_[digest] = {a.at(0).get<std::size_t>(), a.at(1).get<bool>()};
    return model;
}

Surface planted_hparam_surface(double best_lr, double best_wd) {
    return [=](const TrainSummary& s) {
        double dl = std::log10(s.config.learning_rate) - std::log10(best_lr);
        double dw = std::log10(std::max(s.config.weight_decay, 1e-12)) - std::log10(best_wd);
        return 0.9 - 0.05 * dl * dl - 0.02 * dw * dw;
    };
}

Surface planted_quantity_surface(double peak, double base, double gain) {
    return [=](const TrainSummary& s) {
        double f = s.added_fraction();
        if (f <= 0) return base;
        double u = (std::log(f) - std::log(peak)) / 0.6;
        return base + gain * std::exp(-u * u) - 0.02 * f;
    };
}

}  // namespace alia::train
