// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/edit/generate.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "alia/error.hpp"
#include "alia/parallel.hpp"
#include "alia/rng.hpp"

namespace alia::edit {

using nlohmann::json;

namespace {

struct Job {
    AugmentationRecord record;
    const data::ImageRecord* source = nullptr;  // null for txt2img
};

// Runs the jobs not already completed in `store`, persisting each result.
// Returns the final records in job order.
std::vector<AugmentationRecord> execute(std::vector<Job>& jobs, EditBackend& backend, ImageStore& outputs,
                                        const data::ImageSource* images, RecordStore* store,
                                        const EditRunOptions& options) {
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (store) {
            if (auto done = store->find(jobs[i].record.edit_id); done && done->ok()) {
                jobs[i].record = *done;
                continue;
            }
        }
        todo.push_back(i);
    }
    const unsigned workers = std::max(1u, std::min(options.workers, backend.max_parallelism()));
    parallel_for(todo.size(), workers, [&](std::size_t t) {
        auto& job = jobs[todo[t]];
        auto& r = job.record;
        try {
            Image out;
            if (job.source) {
                out = backend.edit(images->load(*job.source), r.prompt, r.params);
            } else {
                auto generated = backend.generate(r.prompt, r.params, 1);
                if (generated.size() != 1) throw BackendError("backend returned no image");
                out = std::move(generated.front());
            }
            r.uri = outputs.put(out);
            r.error.reset();
        } catch (const Error& e) {
            // Configuration mistakes are not per-edit failures.
            if (e.code() == ErrorCode::range || e.code() == ErrorCode::precondition) throw;
            r.uri.clear();
            r.error = e.what();
        } catch (const std::exception& e) {
            r.uri.clear();
            r.error = e.what();
        }
        if (store) store->put(r);
    });

    std::vector<AugmentationRecord> out;
    out.reserve(jobs.size());
    std::size_t failed = 0;
    for (auto& j : jobs) {
        if (!j.record.ok()) ++failed;
        out.push_back(std::move(j.record));
    }
    if (!out.empty() && static_cast<double>(failed) / static_cast<double>(out.size()) > options.max_failure_ratio) {
        throw BackendError(std::to_string(failed) + " of " + std::to_string(out.size()) + " edits failed");
    }
    if (failed > 0) spdlog::warn("{} of {} edits failed; rerun to retry them", failed, out.size());
    return out;
}

bool near(double a, double b) { return std::abs(a - b) < 1e-9; }

}  // namespace

std::string edit_prompt(const prompt::DomainDescription& description, BackendKind backend, const std::string& label) {
    if (backend == BackendKind::instruct_pix2pix) {
        return prompt::instantiate(prompt::to_instruction(description).template_text, label);
    }
    return prompt::instantiate_prompt(description, label);
}

std::size_t planned_edit_count(const data::Dataset& dataset, std::size_t descriptions, int edits_per_image) {
    return dataset.count(data::Split::train) * descriptions * static_cast<std::size_t>(std::max(edits_per_image, 0));
}

std::vector<AugmentationRecord> generate_edits(const data::Dataset& dataset,
                                               std::span<const prompt::DomainDescription> descriptions,
                                               const EditParams& params, int edits_per_image, EditBackend& backend,
                                               EditContext ctx, const EditRunOptions& options) {
    if (descriptions.empty()) throw PreconditionError("generate_edits: no descriptions");
    if (edits_per_image < 1) throw PreconditionError("generate_edits: edits_per_image must be at least 1");
    if (params.backend == BackendKind::txt2img) throw PreconditionError("generate_edits: txt2img does not edit images");
    validate_params(params);

    std::vector<Job> jobs;
    jobs.reserve(planned_edit_count(dataset, descriptions.size(), edits_per_image));
    for (const auto& img : dataset.records()) {
        if (img.split != data::Split::train) continue;
        if (img.provenance != data::Provenance::original) continue;
        for (const auto& desc : descriptions) {
            for (int k = 0; k < edits_per_image; ++k) {
                Job job;
                job.source = &img;
                auto& r = job.record;
                r.parent_id = img.id;
                r.prompt_id = desc.id;
                r.label = img.label;
                r.params = params;
                r.params.seed = edit_seed(params.seed, img.id, desc.id, k);
                r.replica = k;
                r.prompt = edit_prompt(desc, params.backend, img.label);
                r.provenance = data::Provenance::edited;
                r.edit_id = make_edit_id(r.parent_id, r.label, r.prompt_id, r.params, k);
                jobs.push_back(std::move(job));
            }
        }
    }
    return execute(jobs, backend, ctx.outputs, &ctx.images, ctx.store, options);
}

std::vector<AugmentationRecord> txt2img_generate(std::span<const prompt::DomainDescription> descriptions,
                                                 int per_class_count, std::span<const std::string> classes,
                                                 const EditParams& params, EditBackend& backend, ImageStore& outputs,
                                                 RecordStore* store, const EditRunOptions& options) {
    if (descriptions.empty()) throw PreconditionError("txt2img_generate: no prompt");
    if (per_class_count < 0) throw PreconditionError("txt2img_generate: per_class_count must be non-negative");
    for (const auto& d : descriptions) {
        if (prompt::count_placeholders(d.template_text) != 1) {
            throw PreconditionError("txt2img prompt must contain the class placeholder: " + d.template_text);
        }
    }
    EditParams p = params;
    p.backend = BackendKind::txt2img;
    validate_params(p);

    std::vector<Job> jobs;
    for (const auto& cls : classes) {
        for (int i = 0; i < per_class_count; ++i) {
            const auto& desc = descriptions[static_cast<std::size_t>(i) % descriptions.size()];
            Job job;
            auto& r = job.record;
            r.prompt_id = desc.id;
            r.label = cls;
            r.params = p;
            r.params.seed = edit_seed(p.seed, "class:" + cls, desc.id, i);
            r.replica = i;
            r.prompt = prompt::instantiate_prompt(desc, cls);
            r.provenance = data::Provenance::txt2img;
            r.edit_id = make_edit_id(std::nullopt, cls, desc.id, r.params, i);
            jobs.push_back(std::move(job));
        }
    }
    return execute(jobs, backend, outputs, nullptr, store, options);
}

bool SweepGrid::contains(Cell cell) const {
    const bool s = std::any_of(strengths.begin(), strengths.end(), [&](double v) { return near(v, cell.first); });
    const bool g = std::any_of(guidances.begin(), guidances.end(), [&](double v) { return near(v, cell.second); });
    return s && g;
}

json sweep_to_json(const SweepGrid& grid) {
    json cells = json::array();
    for (const auto& [cell, uris] : grid.cells) {
        cells.push_back({{"strength", cell.first},
                         {"guidance", cell.second},
                         {"images", uris},
                         {"complete", grid.incomplete.count(cell) == 0}});
    }
    return {{"backend", to_string(grid.backend)},
            {"description_id", grid.description_id},
            {"strengths", grid.strengths},
            {"guidances", grid.guidances},
            {"sample_image_ids", grid.sample_image_ids},
            {"seeds", grid.seeds},
            {"cells", cells}};
}

SweepGrid sweep_from_json(const json& j) {
    SweepGrid g;
    g.backend = parse_backend(j.at("backend").get<std::string>());
    g.description_id = j.value("description_id", "");
    g.strengths = j.at("strengths").get<std::vector<double>>();
    g.guidances = j.at("guidances").get<std::vector<double>>();
    g.sample_image_ids = j.at("sample_image_ids").get<std::vector<std::string>>();
    g.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& c : j.at("cells")) {
        const Cell cell{c.at("strength").get<double>(), c.at("guidance").get<double>()};
        g.cells[cell] = c.at("images").get<std::vector<std::string>>();
        if (!c.value("complete", true)) g.incomplete.insert(cell);
    }
    return g;
}

SweepOptions default_sweep(BackendKind backend, SweepPreset preset) {
    SweepOptions o;
    const bool pix = backend == BackendKind::instruct_pix2pix;
    const std::vector<double> strengths =
        pix ? std::vector<double>{1.1, 1.3, 1.5, 1.7, 1.9} : std::vector<double>{0.1, 0.3, 0.4, 0.6, 0.9};
    switch (preset) {
        case SweepPreset::full:
            o.strengths = strengths;
            o.guidances = {5.0, 6.5, 7.5, 9.0, 10.5};
            break;
        case SweepPreset::strength_axis:
            o.strengths = strengths;
            o.guidances = {7.5};
            break;
        case SweepPreset::guidance_axis:
            o.strengths = {pix ? 1.3 : 0.4};
            o.guidances = {5.0, 7.5, 9.0};
            break;
    }
    return o;
}

SweepGrid run_sweep(const data::Dataset& dataset, const prompt::DomainDescription& description, BackendKind backend,
                    const SweepOptions& options, EditBackend& edit_backend, const data::ImageSource& images,
                    ImageStore& outputs) {
    if (options.strengths.empty() || options.guidances.empty()) throw PreconditionError("run_sweep: empty grid");
    if (options.sample_size == 0 || options.seed_count == 0) throw PreconditionError("run_sweep: empty sample");
    if (backend == BackendKind::txt2img) throw PreconditionError("run_sweep: txt2img has no edit strength");
    // Reject out-of-range axes before doing any work.
    for (double s : options.strengths) {
        for (double g : options.guidances) validate_params({backend, s, g, 0});
    }

    const auto train = dataset.split(data::Split::train);
    if (train.empty()) throw PreconditionError("run_sweep: no train images");
    SplitMix64 rng(derive_seed(options.seed, "sweep-sample:" + description.id));
    std::vector<const data::ImageRecord*> sample;
    for (auto i : sample_indices(train.size(), options.sample_size, rng)) sample.push_back(&train[i]);

    SweepGrid grid;
    grid.backend = backend;
    grid.description_id = description.id;
    grid.strengths = options.strengths;
    grid.guidances = options.guidances;
    for (const auto* r : sample) grid.sample_image_ids.push_back(r->id);
    for (std::size_t i = 0; i < options.seed_count; ++i) {
        grid.seeds.push_back(derive_seed(options.seed, "sweep-seed:" + std::to_string(i)));
    }

    std::vector<Image> originals;
    originals.reserve(sample.size());
    for (const auto* r : sample) originals.push_back(images.load(*r));

    std::vector<Cell> cells;
    for (double s : options.strengths) {
        for (double g : options.guidances) cells.emplace_back(s, g);
    }
    const std::size_t per_cell = sample.size() * grid.seeds.size();
    std::vector<std::string> uris(cells.size() * per_cell);
    std::vector<char> failed(cells.size() * per_cell, 0);
    const unsigned workers = std::max(1u, std::min(options.workers, edit_backend.max_parallelism()));
    parallel_for(uris.size(), workers, [&](std::size_t k) {
        const auto& cell = cells[k / per_cell];
        const std::size_t img = (k % per_cell) / grid.seeds.size();
        const std::size_t seed = k % grid.seeds.size();
        const EditParams p{backend, cell.first, cell.second, grid.seeds[seed]};
        try {
            uris[k] = outputs.put(edit_backend.edit(originals[img], edit_prompt(description, backend, sample[img]->label), p));
        } catch (const std::exception& e) {
            failed[k] = 1;
            spdlog::warn("sweep cell ({}, {}) failed: {}", cell.first, cell.second, e.what());
        }
    });
    for (std::size_t c = 0; c < cells.size(); ++c) {
        auto& list = grid.cells[cells[c]];
        for (std::size_t k = c * per_cell; k < (c + 1) * per_cell; ++k) {
            if (failed[k]) {
                grid.incomplete.insert(cells[c]);
            } else {
                list.push_back(uris[k]);
            }
        }
    }
    return grid;
}

std::string_view to_string(Chooser chooser) { return chooser == Chooser::human ? "human" : "config"; }

ParamSelection select_params(const SweepGrid& grid, Cell choice, Chooser chooser, std::uint64_t seed) {
    if (!grid.contains(choice)) {
        throw RangeError("(" + json(choice.first).dump() + ", " + json(choice.second).dump() +
                         ") is not a cell of the sweep grid");
    }
    EditParams p{grid.backend, choice.first, choice.second, seed};
    validate_params(p);
    return {p, chooser};
}

}  // namespace alia::edit
