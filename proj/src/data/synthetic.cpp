// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "alia/content_store.hpp"
#include "alia/data/manifest.hpp"
#include "alia/hash.hpp"
#include "alia/rng.hpp"

namespace alia::data {

namespace fs = std::filesystem;

const std::vector<std::string>& iwildcam_classes() {
    static const std::vector<std::string> classes = {"background", "cattle",  "elephant", "impala",
                                                     "zebra",      "giraffe", "dik-dik"};
    return classes;
}

const std::map<Split, CellCounts>& planes_cell_table() {
    static const std::map<Split, CellCounts> table = {
        {Split::train,
         {{{"Airbus", "sky"}, 98}, {{"Airbus", "grass"}, 0}, {{"Airbus", "road"}, 70},
          {{"Boeing", "sky"}, 129}, {{"Boeing", "grass"}, 112}, {{"Boeing", "road"}, 0}}},
        {Split::extra,
         {{{"Airbus", "sky"}, 90}, {{"Airbus", "grass"}, 21}, {{"Airbus", "road"}, 21},
          {{"Boeing", "sky"}, 136}, {{"Boeing", "grass"}, 44}, {{"Boeing", "road"}, 45}}},
        {Split::val,
         {{{"Airbus", "sky"}, 90}, {{"Airbus", "grass"}, 21}, {{"Airbus", "road"}, 21},
          {{"Boeing", "sky"}, 137}, {{"Boeing", "grass"}, 45}, {{"Boeing", "road"}, 44}}},
        {Split::test,
         {{{"Airbus", "sky"}, 175}, {{"Airbus", "grass"}, 51}, {{"Airbus", "road"}, 51},
          {{"Boeing", "sky"}, 222}, {{"Boeing", "grass"}, 104}, {{"Boeing", "road"}, 104}}},
    };
    return table;
}

std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
    std::vector<std::size_t> out(weights.size(), 0);
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (weights.empty() || sum <= 0.0) return out;
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(total) * weights[i] / sum;
        out[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += out[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[remainders[k % remainders.size()].second];
    return out;
}

namespace {

ImageRecord placeholder_record(const std::string& tag, std::size_t n, const std::string& label, Split split) {
    ImageRecord r;
    const auto prov = split == Split::extra ? Provenance::real_extra : Provenance::original;
    const std::string name = tag + "/" + std::to_string(n);
    r.id = make_record_id(sha256_hex(name), prov);
    r.uri = name + ".png";
    r.label = label;
    r.split = split;
    r.provenance = prov;
    return r;
}

}  // namespace

Dataset make_iwildcam_fixture() {
    // Train counts per class; dik-dik is the rare class (~50 images).
    const std::vector<double> weights = {1600, 1200, 1000, 900, 800, 500, 52};
    const auto& classes = iwildcam_classes();
    std::vector<ImageRecord> records;
    std::size_t n = 0;
    const std::array<std::pair<Split, std::size_t>, 4> splits = {
        {{Split::train, kIWildCamSplits.train},
         {Split::extra, kIWildCamSplits.extra},
         {Split::val, kIWildCamSplits.val},
         {Split::test, kIWildCamSplits.test}}};
    for (const auto& [split, total] : splits) {
        const auto per_class = apportion(total, weights);
        for (std::size_t c = 0; c < classes.size(); ++c) {
            for (std::size_t i = 0; i < per_class[c]; ++i) {
                records.push_back(placeholder_record("iwildcam", n++, classes[c], split));
            }
        }
    }
    return Dataset(std::move(records), classes, "animal");
}

Dataset make_planes_pool(std::size_t surplus) {
    CellCounts needed;
    for (const auto& [split, cells] : planes_cell_table()) {
        for (const auto& [key, count] : cells) needed[key] += count;
    }
    std::vector<ImageRecord> records;
    std::size_t n = 0;
    for (const auto& [key, count] : needed) {
        for (std::size_t i = 0; i < count + surplus; ++i) {
            auto r = placeholder_record("planes", n++, key.first, Split::train);
            r.domain_tags["background"] = key.second;
            records.push_back(std::move(r));
        }
    }
    return Dataset(std::move(records), {"Airbus", "Boeing"}, "airplane");
}

namespace {

struct Rgb {
    int r, g, b;
};

Rgb class_colour(const std::string& label) {
    if (label == "cardinal") return {200, 30, 40};
    if (label == "bluejay") return {40, 70, 200};
    if (label == "goldfinch") return {225, 200, 40};
    const auto h = sha256_hex(label);
    return {std::stoi(h.substr(0, 2), nullptr, 16), std::stoi(h.substr(2, 2), nullptr, 16),
            std::stoi(h.substr(4, 2), nullptr, 16)};
}

Rgb background_colour(const std::string& background) {
    if (background == "grass") return {70, 140, 60};
    return {135, 180, 235};
}

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

Image render_synthetic_image(const std::string& label, const std::string& background, std::uint64_t seed) {
    constexpr int size = 16;
    Image img(size, size);
    SplitMix64 rng(seed);
    const Rgb bg = background_colour(background);
    const Rgb fg = class_colour(label);
    // Object block jitters by up to two pixels around the centre.
    const int ox = 4 + static_cast<int>(rng.below(3)) - 1;
    const int oy = 4 + static_cast<int>(rng.below(3)) - 1;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const bool object = x >= ox && x < ox + 8 && y >= oy && y < oy + 8;
            const Rgb base = object ? fg : bg;
            auto* px = img.at(x, y);
            px[0] = clamp_byte(base.r + rng.uniform(-12.0, 12.0));
            px[1] = clamp_byte(base.g + rng.uniform(-12.0, 12.0));
            px[2] = clamp_byte(base.b + rng.uniform(-12.0, 12.0));
        }
    }
    return img;
}

fs::path write_synthetic_dataset(const fs::path& dir, std::uint64_t seed) {
    const std::vector<std::string> classes = {"cardinal", "bluejay", "goldfinch"};
    const std::array<std::pair<Split, int>, 4> layout = {
        {{Split::train, 10}, {Split::extra, 2}, {Split::val, 4}, {Split::test, 4}}};
    fs::create_directories(dir / "images");
    ImageStore store(dir / "images");

    std::vector<ImageRecord> records;
    for (const auto& label : classes) {
        int k = 0;
        for (const auto& [split, count] : layout) {
            for (int i = 0; i < count; ++i, ++k) {
                const std::string background = k % 2 == 0 ? "sky" : "grass";
                const Image img = render_synthetic_image(label, background, derive_seed(seed, label + std::to_string(k)));
                const std::string digest = store.put(img);
                ImageRecord r;
                r.provenance = split == Split::extra ? Provenance::real_extra : Provenance::original;
                r.id = make_record_id(digest, r.provenance);
                r.uri = "images/" + digest + ".png";
                r.label = label;
                r.split = split;
                r.domain_tags["background"] = background;
                records.push_back(std::move(r));
            }
        }
    }
    Dataset ds(std::move(records), classes, "bird");
    save_manifest(ds, dir / "manifest.jsonl");

    nlohmann::json cfg = {
        {"name", "synthetic-birds"},
        {"manifest", "manifest.jsonl"},
        {"superclass", "bird"},
        {"classes", classes},
        {"prefix", "a photo of a bird"},
        {"superclass_in_template", true},
        {"crop", {{"top", 0.0}, {"bottom", 0.0}}},
        {"txt2img_prompt", "an iNaturalist photo of a { } bird in nature."},
    };
    write_file_atomic(dir / "dataset.json", cfg.dump(2) + "\n");
    return dir / "dataset.json";
}

}  // namespace alia::data
