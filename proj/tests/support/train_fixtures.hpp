// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "alia/data/dataset.hpp"
#include "alia/data/image_source.hpp"
#include "alia/hash.hpp"

namespace alia::testing {

// Image-light dataset for trainer-level properties: 3 classes with
// `train_per_class` originals, `test_per_class` test images and a pool of
// `pool_per_class` edited records per class. Every image is a distinct 2x2
// tile held in memory.
struct TrainFixture {
    data::Dataset dataset;
    std::vector<data::ImageRecord> pool;
    std::shared_ptr<data::MemoryImageSource> images = std::make_shared<data::MemoryImageSource>();
};

inline TrainFixture make_train_fixture(std::size_t train_per_class, std::size_t test_per_class,
                                       std::size_t pool_per_class, std::size_t extra_per_class = 0) {
    TrainFixture f;
    const std::vector<std::string> classes = {"cardinal", "jay", "oriole"};
    std::vector<data::ImageRecord> records;
    std::size_t serial = 0;
    auto add = [&](const std::string& label, data::Split split, data::Provenance prov) -> data::ImageRecord& {
        Image img(2, 2);
        std::size_t v = serial++;
        for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(v >> (8 * (i % 4)));
        data::ImageRecord r;
        r.uri = "mem:" + std::to_string(v);
        r.id = data::make_record_id(img.digest(), prov);
        r.label = label;
        r.split = split;
        r.provenance = prov;
        f.images->add(r.uri, std::move(img));
        records.push_back(r);
        return records.back();
    };
    for (const auto& c : classes) {
        std::vector<std::string> parents;
        for (std::size_t i = 0; i < train_per_class; ++i)
            parents.push_back(add(c, data::Split::train, data::Provenance::original).id);
        for (std::size_t i = 0; i < test_per_class; ++i) add(c, data::Split::test, data::Provenance::original);
        for (std::size_t i = 0; i < extra_per_class; ++i) add(c, data::Split::extra, data::Provenance::real_extra);
        for (std::size_t i = 0; i < pool_per_class; ++i) {
            auto r = add(c, data::Split::train, data::Provenance::edited);
            r.parent_id = parents[i % parents.size()];
            r.prompt_id = "p" + std::to_string(i % 4);
            records.pop_back();
            f.pool.push_back(r);
        }
    }
    f.dataset = data::Dataset(std::move(records), classes, "bird");
    return f;
}

}  // namespace alia::testing
