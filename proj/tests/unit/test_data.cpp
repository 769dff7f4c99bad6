// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <set>

#include "doctest.h"
#include "temp_dir.hpp"

#include "alia/content_store.hpp"
#include "alia/data/config.hpp"
#include "alia/data/dataset.hpp"
#include "alia/data/image_source.hpp"
#include "alia/data/manifest.hpp"
#include "alia/data/synthetic.hpp"
#include "alia/error.hpp"
#include "alia/rng.hpp"

using namespace alia;
using namespace alia::data;

namespace {

ImageRecord rec(const std::string& id, const std::string& label, Split split = Split::train,
                Provenance prov = Provenance::original) {
    ImageRecord r;
    r.id = id;
    r.uri = id + ".png";
    r.label = label;
    r.split = split;
    r.provenance = prov;
    if (prov == Provenance::edited || prov == Provenance::txt2img) r.prompt_id = "p0";
    return r;
}

ImageRecord edited(const std::string& id, const std::string& label, const std::string& parent) {
    auto r = rec(id, label, Split::train, Provenance::edited);
    r.parent_id = parent;
    return r;
}

Dataset train_of(std::size_t n, const std::vector<std::string>& classes = {"A", "B"}) {
    std::vector<ImageRecord> rs;
    for (std::size_t i = 0; i < n; ++i) rs.push_back(rec("t" + std::to_string(i), classes[i % classes.size()]));
    return Dataset(rs, classes, "thing");
}

std::vector<ImageRecord> augmented_of(std::size_t n) {
    std::vector<ImageRecord> rs;
    for (std::size_t i = 0; i < n; ++i) rs.push_back(rec("a" + std::to_string(i), "A", Split::train, Provenance::txt2img));
    return rs;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("SplitMix64 matches the reference sequence") {
    // First outputs for seed 0 of the reference implementation.
    SplitMix64 rng(0);
    CHECK(rng.next() == 0xe220a8397b1dcdafULL);
    CHECK(rng.next() == 0x6e789e6aa1b965f4ULL);
    CHECK(rng.next() == 0x06c45d188009454fULL);
}

TEST_CASE("sample_indices draws a uniform k-subset") {
    SplitMix64 rng(11);
    auto idx = sample_indices(10, 4, rng);
    CHECK(idx.size() == 4);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 4);
    SplitMix64 again(11);
    CHECK(sample_indices(10, 4, again) == idx);

    // Every element should be picked about k/n of the time.
    std::vector<int> hits(10, 0);
    SplitMix64 many(3);
    for (int t = 0; t < 20000; ++t) {
        for (auto i : sample_indices(10, 3, many)) ++hits[i];
    }
    for (int h : hits) CHECK(std::abs(h - 6000) < 400);
}

TEST_SUITE("load_manifest") {
    TEST_CASE("empty manifest") {
        auto ds = parse_manifest("", "");
        CHECK(ds.size() == 0);
        CHECK(ds.classes().empty());
    }

    TEST_CASE("single zebra record") {
        auto line = record_to_json(rec("z1", "zebra")).dump();
        auto ds = parse_manifest(line + "\n", "");
        CHECK(ds.size() == 1);
        CHECK(ds.classes() == std::vector<std::string>{"zebra"});
    }

    TEST_CASE("iWildCam fixture split sizes") {
        alia::testing::TempDir dir;
        save_manifest(make_iwildcam_fixture(), dir / "iwildcam.jsonl");
        auto ds = load_manifest(dir / "iwildcam.jsonl");
        CHECK(ds.count(Split::train) == 6052);
        CHECK(ds.count(Split::extra) == 2224);
        CHECK(ds.count(Split::val) == 2826);
        CHECK(ds.count(Split::test) == 8483);
        CHECK(ds.classes().size() == 7);
        CHECK(ds.superclass() == "animal");
        auto train = class_distribution(ds, Split::train);
        CHECK(train["dik-dik"] >= 50);
        CHECK(train["dik-dik"] < 60);
    }

    TEST_CASE("parse failure names the line") {
        const std::string good = record_to_json(rec("x", "A")).dump();
        try {
            parse_manifest(good + "\n{not json\n", "");
            FAIL("expected ManifestError");
        } catch (const ManifestError& e) {
            CHECK(e.line() == 2);
        }
        CHECK_THROWS_AS(parse_manifest(R"({"id":"x","uri":"u","label":"A","split":"nope","provenance":"original"})", ""),
                        ManifestError);
    }

    TEST_CASE("duplicate id is an integrity error") {
        const std::string line = record_to_json(rec("x", "A")).dump();
        CHECK_THROWS_AS(parse_manifest(line + "\n" + line + "\n", ""), IntegrityError);
    }

    TEST_CASE("dangling parent is an integrity error") {
        const std::string line = record_to_json(edited("e", "A", "missing")).dump();
        CHECK_THROWS_AS(parse_manifest(line + "\n", ""), IntegrityError);
    }

    TEST_CASE("parent must be an original") {
        auto a = record_to_json(rec("o", "A")).dump();
        auto b = record_to_json(edited("e1", "A", "o")).dump();
        auto c = record_to_json(edited("e2", "A", "e1")).dump();
        CHECK_NOTHROW(parse_manifest(a + "\n" + b + "\n", ""));
        CHECK_THROWS_AS(parse_manifest(a + "\n" + b + "\n" + c + "\n", ""), IntegrityError);
    }

    TEST_CASE("record invariants") {
        auto bad = rec("x", "A", Split::extra, Provenance::original);
        CHECK_THROWS_AS(Dataset({bad}, {"A"}, ""), IntegrityError);
        auto parentless = rec("e", "A", Split::train, Provenance::edited);
        CHECK_THROWS_AS(Dataset({parentless}, {"A"}, ""), IntegrityError);
        auto unknown = rec("u", "Z");
        CHECK_THROWS_AS(Dataset({unknown}, {"A"}, ""), IntegrityError);
    }

    TEST_CASE("header labels must cover records") {
        const std::string line = record_to_json(rec("x", "A")).dump();
        CHECK_THROWS_AS(parse_manifest(line + "\n", R"({"classes":["B"],"superclass":"s"})"), IntegrityError);
        auto ds = parse_manifest(line + "\n", R"({"classes":["B","A"],"superclass":"s"})");
        CHECK(ds.classes() == std::vector<std::string>{"B", "A"});
        CHECK(ds.superclass() == "s");
    }
}

TEST_CASE("manifest round trip is byte identical") {
    alia::testing::TempDir dir;
    auto a = rec("o1", "A");
    a.domain_tags["background"] = "grass";
    auto ds = Dataset({a, rec("o2", "B", Split::test), edited("e1", "A", "o1"),
                       rec("x1", "B", Split::extra, Provenance::real_extra)},
                      {"A", "B"}, "thing");
    save_manifest(ds, dir / "m.jsonl");
    const auto bytes = read_file(dir / "m.jsonl");
    const auto header = read_file(header_path_for(dir / "m.jsonl"));
    auto loaded = load_manifest(dir / "m.jsonl");
    CHECK(loaded == ds);
    save_manifest(loaded, dir / "m2.jsonl");
    CHECK(read_file(dir / "m2.jsonl") == bytes);
    CHECK(read_file(header_path_for(dir / "m2.jsonl")) == header);
}

TEST_CASE("record id is stable per bytes and provenance") {
    Image img(2, 2);
    img.pixels[0] = 9;
    CHECK(make_record_id(img.digest(), Provenance::original) == make_record_id(img.digest(), Provenance::original));
    CHECK(make_record_id(img.digest(), Provenance::original) != make_record_id(img.digest(), Provenance::edited));
}

TEST_SUITE("class_distribution") {
    TEST_CASE("counts per label") {
        Dataset ds({rec("1", "A"), rec("2", "A"), rec("3", "B")}, {"A", "B"}, "");
        auto d = class_distribution(ds, Split::train);
        CHECK(d.counts == std::map<std::string, std::size_t>{{"A", 2}, {"B", 1}});
        CHECK(d.total() == 3);
    }

    TEST_CASE("empty split is all zeros over classes") {
        Dataset ds({rec("1", "A"), rec("2", "B")}, {"A", "B"}, "");
        auto d = class_distribution(ds, Split::val);
        CHECK(d.counts == std::map<std::string, std::size_t>{{"A", 0}, {"B", 0}});
    }

    TEST_CASE("planes train split by background") {
        const auto& train_cells = planes_cell_table().at(Split::train);
        auto split = build_bias_split(make_planes_pool(), {"background", train_cells}, 17);
        auto cells = class_domain_distribution(split, Split::train, "background");
        CHECK(cells[{"Airbus", "sky"}] == 98);
        CHECK(cells[{"Airbus", "grass"}] == 0);
        CHECK(cells[{"Airbus", "road"}] == 70);
        CHECK(cells[{"Boeing", "sky"}] == 129);
        CHECK(cells[{"Boeing", "grass"}] == 112);
        CHECK(cells[{"Boeing", "road"}] == 0);
    }
}

TEST_SUITE("sample_to_match") {
    std::vector<ImageRecord> pool_ab(std::size_t a, std::size_t b) {
        std::vector<ImageRecord> pool;
        for (std::size_t i = 0; i < a; ++i) pool.push_back(rec("a" + std::to_string(i), "A"));
        for (std::size_t i = 0; i < b; ++i) pool.push_back(rec("b" + std::to_string(i), "B"));
        return pool;
    }

    TEST_CASE("matches target exactly") {
        auto pool = pool_ab(5, 5);
        auto out = sample_to_match(pool, ClassDistribution{{{"A", 2}, {"B", 1}}}, 1);
        CHECK(out.size() == 3);
        CHECK(class_distribution(out).counts == std::map<std::string, std::size_t>{{"A", 2}, {"B", 1}});
    }

    TEST_CASE("all-zero target") {
        auto pool = pool_ab(5, 5);
        CHECK(sample_to_match(pool, ClassDistribution{{{"A", 0}, {"B", 0}}}, 1).empty());
    }

    TEST_CASE("shortage lists class and deficit") {
        auto pool = pool_ab(3, 0);
        try {
            sample_to_match(pool, ClassDistribution{{{"A", 2}, {"B", 1}}}, 1);
            FAIL("expected shortage");
        } catch (const ShortageError& e) {
            REQUIRE(e.deficits().size() == 1);
            CHECK(e.deficits()[0].key == "B");
            CHECK(e.deficits()[0].missing() == 1);
        }
    }

    TEST_CASE("property: distribution equals target, order preserved, deterministic") {
        SplitMix64 gen(2024);
        for (int trial = 0; trial < 300; ++trial) {
            const std::size_t k = 1 + gen.below(5);
            std::vector<ImageRecord> pool;
            ClassDistribution target;
            std::map<std::string, std::size_t> have;
            const std::size_t n = gen.below(60);
            for (std::size_t i = 0; i < n; ++i) {
                const std::string label = "c" + std::to_string(gen.below(k));
                pool.push_back(rec("r" + std::to_string(i), label));
                ++have[label];
            }
            for (const auto& [label, count] : have) target.counts[label] = gen.below(count + 1);
            const auto seed = gen.next();
            auto out = sample_to_match(pool, target, seed);
            ClassDistribution got = class_distribution(out);
            for (const auto& [label, want] : target.counts) CHECK(got[label] == want);
            CHECK(out.size() == target.total());
            // Subsequence of the pool.
            std::size_t j = 0;
            for (const auto& r : pool) {
                if (j < out.size() && out[j].id == r.id) ++j;
            }
            CHECK(j == out.size());
            CHECK(sample_to_match(pool, target, seed) == out);
        }
    }
}

TEST_SUITE("merge_augmented") {
    TEST_CASE("37 percent expansion is within bounds") {
        auto train = train_of(100);
        auto aug = augmented_of(37);
        auto res = merge_augmented(train, aug);
        CHECK(res.dataset.size() == 137);
        CHECK(res.expansion_ratio == doctest::Approx(0.37));
        CHECK(res.warnings.empty());
        CHECK(train.size() == 100);
        for (const auto& r : res.dataset.records()) CHECK(r.split == Split::train);
    }

    TEST_CASE("no augmentation warns") {
        auto train = train_of(100);
        auto res = merge_augmented(train, {});
        CHECK(res.dataset == train);
        CHECK(res.warnings.size() == 1);
    }

    TEST_CASE("more than doubling warns") {
        auto res = merge_augmented(train_of(100), augmented_of(120));
        CHECK(res.dataset.size() == 220);
        CHECK(res.warnings.size() == 1);
    }

    TEST_CASE("id collision") {
        auto aug = augmented_of(2);
        aug[1].id = aug[0].id;
        CHECK_THROWS_AS(merge_augmented(train_of(10), aug), IntegrityError);
    }

    TEST_CASE("real-extra records join the train split") {
        auto extra = rec("x", "A", Split::extra, Provenance::real_extra);
        auto res = merge_augmented(train_of(4), std::vector<ImageRecord>{extra});
        CHECK(res.dataset.records().back().split == Split::train);
        CHECK(res.dataset.records().back().provenance == Provenance::real_extra);
    }
}

TEST_SUITE("crop_preprocess") {
    Image gradient(int w, int h) {
        Image img(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) img.at(x, y)[0] = static_cast<std::uint8_t>(y);
        }
        return img;
    }

    TEST_CASE("10 percent bands on 100x100") {
        auto out = crop_preprocess(gradient(100, 100), 0.1, 0.1);
        CHECK(out.width == 100);
        CHECK(out.height == 80);
        CHECK(out.at(0, 0)[0] == 10);
        CHECK(out.at(0, 79)[0] == 89);
    }

    TEST_CASE("zero fractions is identity") {
        auto img = gradient(7, 5);
        CHECK(crop_preprocess(img, 0.0, 0.0) == img);
    }

    TEST_CASE("degenerate crop") {
        try {
            crop_preprocess(gradient(10, 4), 0.45, 0.45);
            FAIL("expected degenerate-crop");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::degenerate_crop);
        }
    }

    TEST_CASE("invalid fractions") {
        CHECK_THROWS_AS(crop_preprocess(gradient(4, 4), 0.5, 0.0), PreconditionError);
        CHECK_THROWS_AS(crop_preprocess(Image{}, 0.1, 0.1), PreconditionError);
    }

    TEST_CASE("height arithmetic over many sizes") {
        for (int h = 1; h < 300; h += 7) {
            for (double t : {0.0, 0.05, 0.1, 0.25}) {
                for (double b : {0.0, 0.1, 0.3}) {
                    const double exact = h * (1.0 - t - b);
                    const int want = static_cast<int>(std::floor(exact + 1e-9));
                    if (want <= 0) continue;
                    CHECK(crop_preprocess(gradient(3, h), t, b).height == want);
                }
            }
        }
    }
}

TEST_SUITE("build_bias_split") {
    TEST_CASE("planes train row gives 409 records") {
        const auto& cells = planes_cell_table().at(Split::train);
        auto out = build_bias_split(make_planes_pool(), {"background", cells}, 5);
        CHECK(out.size() == 409);
        CHECK(class_domain_distribution(out, Split::train, "background") ==
              CellCounts{{{"Airbus", "sky"}, 98}, {{"Airbus", "road"}, 70},
                         {{"Boeing", "sky"}, 129}, {{"Boeing", "grass"}, 112}});
        CHECK(build_bias_split(make_planes_pool(), {"background", cells}, 5) == out);
    }

    TEST_CASE("every planes split is drawable") {
        const auto pool = make_planes_pool();
        const std::map<Split, std::size_t> totals = {
            {Split::train, 409}, {Split::extra, 357}, {Split::val, 358}, {Split::test, 707}};
        for (const auto& [split, cells] : planes_cell_table()) {
            CHECK(build_bias_split(pool, {"background", cells}, 1, split).size() == totals.at(split));
        }
    }

    TEST_CASE("all zeros") {
        CellCounts zeros{{{"Airbus", "sky"}, 0}};
        CHECK(build_bias_split(make_planes_pool(), {"background", zeros}, 5).empty());
    }

    TEST_CASE("shortage names the cell") {
        Dataset pool({rec("1", "Boeing")}, {"Airbus", "Boeing"}, "airplane");
        try {
            build_bias_split(pool, {"background", {{{"Boeing", "road"}, 1}}}, 5);
            FAIL("expected shortage");
        } catch (const ShortageError& e) {
            CHECK(e.deficits().at(0).key == "Boeing/road");
            CHECK(e.deficits().at(0).missing() == 1);
        }
    }
}

TEST_CASE("dataset config validation names the field") {
    try {
        parse_dataset_config(nlohmann::json{{"manifest", "m.jsonl"}});
        FAIL("expected config error");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "superclass");
    }
    try {
        parse_dataset_config(nlohmann::json{{"manifest", "m.jsonl"}, {"superclass", "bird"}, {"crop", {{"top", 0.7}}}});
        FAIL("expected config error");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "crop.top");
    }
    auto c = parse_dataset_config(nlohmann::json{{"manifest", "m.jsonl"}, {"superclass", "bird"}}, "/data");
    CHECK(c.manifest == std::filesystem::path("/data/m.jsonl"));
    CHECK(c.prefix == "a photo of a bird");
}

TEST_CASE("domain tags come from the sidecar") {
    alia::testing::TempDir dir;
    write_text(dir / "tags.json", R"({"1": {"background": "road"}})");
    Dataset ds({rec("1", "A"), rec("2", "A")}, {"A"}, "");
    auto tagged = apply_domain_tags(ds, dir / "tags.json");
    CHECK(tagged.records()[0].domain_tags.at("background") == "road");
    CHECK(tagged.records()[1].domain_tags.empty());
}

TEST_CASE("synthetic dataset renders and loads") {
    alia::testing::TempDir dir;
    auto cfg_path = write_synthetic_dataset(dir.path());
    auto cfg = load_dataset_config(cfg_path);
    auto ds = load_manifest(cfg.manifest);
    CHECK(ds.size() == 60);
    CHECK(ds.count(Split::train) == 30);
    CHECK(ds.count(Split::extra) == 6);
    auto store = std::make_shared<ImageStore>(dir / "images");
    StoreImageSource source(store, dir.path());
    auto img = source.load(ds.records().front());
    CHECK(img.width == 16);
    CHECK(make_record_id(img.digest(), ds.records().front().provenance) == ds.records().front().id);
    auto cropped = CroppingImageSource(std::make_shared<StoreImageSource>(store, dir.path()), 0.25, 0.25)
                       .load(ds.records().front());
    CHECK(cropped.height == 8);
}

TEST_CASE("png round trip") {
    Image img(5, 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 13);
    CHECK(decode_png(encode_png(img)) == img);
    CHECK(encode_png(img) == encode_png(img));
}
