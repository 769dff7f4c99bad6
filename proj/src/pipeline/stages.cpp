// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "stages.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>

#include <spdlog/spdlog.h>

#include "alia/content_store.hpp"
#include "alia/data/manifest.hpp"
#include "alia/edit/backend.hpp"
#include "alia/error.hpp"
#include "alia/prompt/captions.hpp"
#include "alia/prompt/dialogue.hpp"
#include "alia/rng.hpp"
#include "alia/train/charts.hpp"
#include "alia/train/experiment.hpp"
#include "alia/train/reference.hpp"

namespace alia::pipeline::detail {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Originals are read through the dataset's crop; generated images are
// already the size of the cropped originals they came from.
class TrainingImageSource : public data::ImageSource {
public:
    TrainingImageSource(std::shared_ptr<data::ImageSource> originals, std::shared_ptr<const ImageStore> store)
        : originals_(std::move(originals)), generated_(store) {}
    Image load(const data::ImageRecord& r) const override {
        if (r.provenance == data::Provenance::original || r.provenance == data::Provenance::real_extra)
            return originals_->load(r);
        return generated_.load(r);
    }

private:
    std::shared_ptr<data::ImageSource> originals_;
    data::StoreImageSource generated_;
};

// Aborts the process after a set number of edits; exercises crash-resume.
class FaultInjectingBackend : public edit::EditBackend {
public:
    FaultInjectingBackend(edit::EditBackend& inner, long limit) : inner_(inner), limit_(limit) {}
    Image edit(const Image& image, const std::string& prompt, const edit::EditParams& params) override {
        if (calls_.fetch_add(1) >= limit_) {
            spdlog::error("fault injection: aborting edit stage after {} edits", limit_);
            std::_Exit(75);
        }
        return inner_.edit(image, prompt, params);
    }
    std::vector<Image> generate(const std::string& prompt, const edit::EditParams& params, int count) override {
        return inner_.generate(prompt, params, count);
    }
    unsigned max_parallelism() const override { return inner_.max_parallelism(); }

private:
    edit::EditBackend& inner_;
    long limit_;
    std::atomic<long> calls_{0};
};

std::optional<long> fault_limit(Stage stage) {
    const char* spec = std::getenv(kFaultInjectEnv);
    if (!spec) return std::nullopt;
    std::string s(spec);
    auto colon = s.find(':');
    if (colon == std::string::npos || s.substr(0, colon) != to_string(stage)) return std::nullopt;
    try {
        return std::stol(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigError(kFaultInjectEnv, "expected <stage>:<count>");
    }
}

std::unique_ptr<prompt::CaptionerClient> make_captioner(const PipelineConfig& c) {
    const auto& b = c.backends;
    if (b.kind == "stub") return std::make_unique<prompt::StubCaptioner>();
    if (b.kind == "replay") {
        if (!b.captions) throw ConfigError("backends.captions", "replay needs a captions file");
        return std::make_unique<prompt::ReplayCaptioner>(prompt::ReplayCaptioner::from_file(*b.captions));
    }
    if (b.captioner_url.empty()) throw ConfigError("backends.captioner_url", "http needs a captioner url");
    return std::make_unique<prompt::HttpCaptioner>(b.captioner_url);
}

std::unique_ptr<prompt::LanguageModelClient> make_llm(const PipelineConfig& c) {
    const auto& b = c.backends;
    if (b.kind == "stub") return std::make_unique<prompt::StubLanguageModel>();
    if (b.kind == "replay") {
        if (!b.transcript) throw ConfigError("backends.transcript", "replay needs a transcript");
        return std::make_unique<prompt::ReplayLanguageModel>(prompt::ReplayLanguageModel::from_file(*b.transcript));
    }
    if (b.llm_url.empty()) throw ConfigError("backends.llm_url", "http needs a language model url");
    return std::make_unique<prompt::HttpLanguageModel>(b.llm_url);
}

std::unique_ptr<edit::EditBackend> make_editor(const PipelineConfig& c, const ArtifactRoot& root) {
    const auto& b = c.backends;
    if (b.kind == "stub") return std::make_unique<edit::StubEditBackend>(c.edit.workers);
    if (b.kind == "replay") {
        if (!b.edit_replay) throw ConfigError("backends.edit_replay", "replay needs an edit index");
        return std::make_unique<edit::ReplayEditBackend>(
            edit::ReplayEditBackend::from_file(*b.edit_replay, root.shared_store()));
    }
    if (b.editor_url.empty()) throw ConfigError("backends.editor_url", "http needs an editor url");
    return std::make_unique<edit::HttpEditBackend>(b.editor_url, "/v1/edit", c.edit.workers);
}

std::unique_ptr<train::TrainerBackend> make_trainer(const PipelineConfig& c) {
    if (c.train.trainer == "scripted") return std::make_unique<train::ScriptedTrainer>(train::planted_quantity_surface());
    return std::make_unique<train::LinearProbeTrainer>();
}

train::TrainConfig base_train_config(const PipelineConfig& c) {
    train::TrainConfig t;
    t.architecture = c.train.trainer;
    t.learning_rate = c.train.learning_rate;
    t.weight_decay = c.train.weight_decay;
    t.epochs = c.train.epochs;
    t.batch_size = c.train.batch_size;
    t.seed = c.seed;
    return t;
}

prompt::DomainDescription user_description(const data::DatasetConfig& d) {
    std::string text = d.txt2img_prompt.empty() ? "a photo of a { } " + d.superclass + "." : d.txt2img_prompt;
    return prompt::make_description(text, d.prefix, prompt::DescriptionSource::user_provided);
}

json records_json(std::vector<edit::AugmentationRecord> records) {
    std::sort(records.begin(), records.end(),
              [](const auto& a, const auto& b) { return a.edit_id < b.edit_id; });
    json out = json::array();
    for (const auto& r : records) out.push_back(edit::record_to_json(r));
    return out;
}

std::vector<edit::AugmentationRecord> records_from(const json& j) {
    std::vector<edit::AugmentationRecord> out;
    for (const auto& r : j) out.push_back(edit::record_from_json(r));
    return out;
}

json image_records_json(const std::vector<data::ImageRecord>& records) {
    json out = json::array();
    for (const auto& r : records) out.push_back(data::record_to_json(r));
    return out;
}

std::vector<data::ImageRecord> image_records_from(const json& j) {
    std::vector<data::ImageRecord> out;
    for (const auto& r : j) out.push_back(data::record_from_json(r));
    return out;
}

fs::path stage_path(const StageContext& ctx, Stage s) { return ctx.root.stage_dir(ctx.state.run_id, s); }

// ---------------------------------------------------------------- stages

StageOutput run_caption(const StageContext& ctx) {
    auto ds = load_dataset(ctx.dataset_config);
    auto images = make_image_source(ctx.dataset_config, ctx.root);
    auto captioner = make_captioner(ctx.config);

    std::vector<data::ImageRecord> context;
    std::shared_ptr<data::ImageSource> context_images = images;
    if (ctx.dataset_config.context_manifest) {
        context = data::load_manifest(*ctx.dataset_config.context_manifest).records();
        context_images = std::make_shared<data::StoreImageSource>(ctx.root.shared_store(),
                                                                  ctx.dataset_config.context_manifest->parent_path());
    }
    // Context images come through their own source; caption them in a
    // second pass sharing the cache.
    prompt::CaptionCache cache(ctx.dir / "captions.cache.jsonl");
    prompt::CaptionOptions options{true, ctx.config.caption.max_failure_ratio, ctx.config.caption.workers};
    auto result = prompt::caption_dataset(ds, *captioner, *images, {}, &cache, options);
    if (!context.empty()) {
        options.include_train = false;
        auto extra = prompt::caption_dataset(ds, *captioner, *context_images, context, &cache, options);
        for (const auto& c : extra.pool.captions)
            for (std::size_t i = 0; i < extra.pool.source_counts.at(c); ++i) result.pool.add(c);
        result.pool.includes_context_only = true;
        result.failures.insert(result.failures.end(), extra.failures.begin(), extra.failures.end());
        result.attempted += extra.attempted;
    }

    StageOutput out;
    write_json(ctx.dir / "pool.json", prompt::caption_pool_to_json(result.pool));
    json failures = json::array();
    for (const auto& f : result.failures) {
        failures.push_back({{"record_id", f.record_id}, {"message", f.message}});
        out.diagnostics.push_back("caption failed for " + f.record_id + ": " + f.message);
    }
    write_json(ctx.dir / "failures.json", failures);
    out.artifacts = {"pool.json", "failures.json"};
    out.result = {{"captions", result.pool.size()}, {"attempted", result.attempted}, {"failures", result.failures.size()}};
    return out;
}

StageOutput run_summarize(const StageContext& ctx) {
    auto pool = prompt::caption_pool_from_json(read_json(stage_path(ctx, Stage::caption) / "pool.json"));
    if (pool.size() == 0) throw PreconditionError("caption pool is empty");
    auto captions = prompt::sample_captions(pool, ctx.config.caption.sample, derive_seed(ctx.config.seed, "captions"));
    auto templates = ctx.config.prompts.templates ? prompt::PromptTemplates::load(*ctx.config.prompts.templates)
                                                  : prompt::PromptTemplates::defaults();
    auto llm = make_llm(ctx.config);
    prompt::Conversation conversation;
    prompt::summarize_captions(captions, ctx.dataset_config.prefix, *llm, conversation, templates);

    prompt::RefineOptions refine;
    refine.superclass = ctx.dataset_config.superclass;
    refine.prefix = ctx.dataset_config.prefix;
    refine.classes = ctx.dataset_config.classes;
    refine.superclass_in_template = ctx.dataset_config.superclass_in_template;
    refine.max_descriptions = ctx.config.prompts.max_descriptions;
    auto refined = prompt::refine_descriptions(conversation, refine, *llm, templates);

    StageOutput out;
    write_json(ctx.dir / "transcript.json", prompt::conversation_to_json(conversation));
    write_json(ctx.dir / "descriptions.json", prompt::descriptions_to_json(refined.descriptions));
    out.artifacts = {"transcript.json", "descriptions.json"};
    out.diagnostics = refined.diagnostics;
    out.result = {{"descriptions", refined.descriptions.size()}, {"captions_sent", captions.size()}};
    return out;
}

edit::SweepPreset parse_preset(const std::string& name) {
    if (name == "strength-axis") return edit::SweepPreset::strength_axis;
    if (name == "guidance-axis") return edit::SweepPreset::guidance_axis;
    return edit::SweepPreset::full;
}

StageOutput run_edit_sweep(const StageContext& ctx) {
    auto ds = load_dataset(ctx.dataset_config);
    auto images = make_image_source(ctx.dataset_config, ctx.root);
    auto descriptions = effective_descriptions(ctx.root, ctx.state);
    const auto& e = ctx.config.edit;
    if (e.sweep_description >= descriptions.size())
        throw ConfigError("edit.sweep_description", "only " + std::to_string(descriptions.size()) + " descriptions");
    auto options = edit::default_sweep(e.backend, parse_preset(e.sweep_preset));
    options.sample_size = e.sweep_sample;
    options.seed_count = e.sweep_seeds;
    options.seed = derive_seed(ctx.config.seed, "sweep");
    options.workers = e.workers;
    auto editor = make_editor(ctx.config, ctx.root);
    auto grid = edit::run_sweep(ds, descriptions[e.sweep_description], e.backend, options, *editor, *images,
                                ctx.root.store());

    // Originals of the sampled images go into the store so reviewers can
    // compare against them.
    json originals = json::object();
    for (const auto& id : grid.sample_image_ids) originals[id] = ctx.root.store().put(images->load(*ds.find(id)));

    StageOutput out;
    json j = edit::sweep_to_json(grid);
    j["originals"] = originals;
    write_json(ctx.dir / "sweep.json", j);
    out.artifacts = {"sweep.json"};
    for (const auto& [s, g] : grid.incomplete)
        out.diagnostics.push_back("cell (" + std::to_string(s) + ", " + std::to_string(g) + ") is incomplete");
    out.result = {{"cells", grid.cells.size()}, {"per_cell", grid.expected_per_cell()}};
    return out;
}

StageOutput run_select_params(const StageContext& ctx) {
    const auto& e = ctx.config.edit;
    StageOutput out;
    if (e.strength && e.guidance) {
        edit::EditParams params{e.backend, *e.strength, *e.guidance, derive_seed(ctx.config.seed, "edit")};
        edit::validate_params(params);
        out.result = edit::params_to_json(params);
        out.result["chooser"] = "config";
        return out;
    }
    auto grid = load_grid(ctx.root, ctx.state);
    out.needs_review = true;
    out.review = {{"kind", "param-selection"},
                  {"message", "pick a (strength, guidance) cell from the sweep grid"},
                  {"cells", grid.cells.size()}};
    return out;
}

std::vector<edit::AugmentationRecord> generate_pool(const StageContext& ctx, const data::Dataset& ds,
                                                    const data::ImageSource& images,
                                                    const std::vector<prompt::DomainDescription>& descriptions,
                                                    const edit::EditParams& params, edit::EditBackend& backend,
                                                    const std::string& store_name) {
    edit::RecordStore store(ctx.dir / store_name);
    edit::EditRunOptions options{ctx.config.edit.workers, ctx.config.edit.max_failure_ratio};
    return edit::generate_edits(ds, descriptions, params, ctx.config.edit.edits_per_image, backend,
                                {images, ctx.root.store(), &store}, options);
}

StageOutput run_edit(const StageContext& ctx) {
    auto ds = load_dataset(ctx.dataset_config);
    auto images = make_image_source(ctx.dataset_config, ctx.root);
    auto descriptions = effective_descriptions(ctx.root, ctx.state);
    const json& chosen = ctx.state.stage(Stage::select_params).result;
    edit::EditParams params = edit::params_from_json(chosen);

    auto editor = make_editor(ctx.config, ctx.root);
    std::unique_ptr<edit::EditBackend> faulty;
    edit::EditBackend* backend = editor.get();
    if (auto limit = fault_limit(Stage::edit)) {
        faulty = std::make_unique<FaultInjectingBackend>(*editor, *limit);
        backend = faulty.get();
    }

    StageOutput out;
    auto edits = generate_pool(ctx, ds, *images, descriptions, params, *backend, "edits.jsonl");
    write_json(ctx.dir / "edits.json", records_json(edits));
    out.artifacts.push_back("edits.json");

    // Text-to-image pool, sized to cover the +Real per-class counts.
    auto extra = data::class_distribution(ds, data::Split::extra);
    std::size_t per_class = 0;
    for (const auto& [label, n] : extra.counts) per_class = std::max(per_class, n);
    if (per_class > 0) {
        edit::RecordStore store(ctx.dir / "txt2img.jsonl");
        edit::EditParams t2i{edit::BackendKind::txt2img, 1.0, params.guidance, derive_seed(ctx.config.seed, "txt2img")};
        std::vector<prompt::DomainDescription> user = {user_description(ctx.dataset_config)};
        auto generated = edit::txt2img_generate(user, static_cast<int>(per_class), ds.classes(), t2i, *backend,
                                                ctx.root.store(), &store,
                                                {ctx.config.edit.workers, ctx.config.edit.max_failure_ratio});
        write_json(ctx.dir / "txt2img.json", records_json(generated));
        out.artifacts.push_back("txt2img.json");
    }

    const auto& ablations = ctx.config.train.ablations;
    auto wants = [&](const char* name) { return std::find(ablations.begin(), ablations.end(), name) != ablations.end(); };
    if (wants("prompt-quality")) {
        std::vector<prompt::DomainDescription> user = {user_description(ctx.dataset_config)};
        auto pool = generate_pool(ctx, ds, *images, user, params, *backend, "user_edits.jsonl");
        write_json(ctx.dir / "user_edits.json", records_json(pool));
        out.artifacts.push_back("user_edits.json");
    }
    if (wants("edit-method")) {
        // The other editor at the middle of its default sweep range.
        edit::EditParams alt = params;
        alt.backend = params.backend == edit::BackendKind::img2img ? edit::BackendKind::instruct_pix2pix
                                                                  : edit::BackendKind::img2img;
        alt.strength = alt.backend == edit::BackendKind::img2img ? 0.5 : 1.5;
        auto pool = generate_pool(ctx, ds, *images, descriptions, alt, *backend, "alt_edits.jsonl");
        write_json(ctx.dir / "alt_edits.json", records_json(pool));
        out.artifacts.push_back("alt_edits.json");
    }
    std::size_t failed = 0;
    for (const auto& r : edits) failed += !r.ok();
    if (failed) out.diagnostics.push_back(std::to_string(failed) + " edits failed");
    out.result = {{"edits", edits.size()}, {"failed", failed}, {"params", edit::params_to_json(params)}};
    return out;
}

StageOutput run_filter(const StageContext& ctx) {
    auto ds = load_dataset(ctx.dataset_config);
    auto images = make_image_source(ctx.dataset_config, ctx.root);
    const fs::path edit_dir = stage_path(ctx, Stage::edit);

    // The confidence filter uses a classifier trained on the original data.
    train::LinearProbeTrainer trainer;
    train::TrainConfig tc = base_train_config(ctx.config);
    auto fit = trainer.fit(tc, ds, *images);
    const unsigned workers = ctx.config.edit.workers;
    auto thresholds = filter::compute_class_thresholds(*fit.model, ds, *images, workers);
    filter::StubZeroShotClassifier zero_shot(ctx.config.filter.semantic.task_prompt);
    filter::StubEmbedder embedder;
    std::optional<filter::KnnIndex> knn;
    if (ctx.config.filter.knn) knn.emplace(embedder, ds, *images);
    filter::FilterModels models{&zero_shot, fit.model.get(), &thresholds, &embedder, knn ? &*knn : nullptr};

    StageOutput out;
    auto records = records_from(read_json(edit_dir / "edits.json"));
    auto result = filter::filter_pipeline(records, ctx.config.filter, models, ctx.root.store(), workers);
    json verdicts = json::array();
    for (const auto& v : result.verdicts) verdicts.push_back(filter::verdict_to_json(v));
    write_json(ctx.dir / "verdicts.json", verdicts);
    write_json(ctx.dir / "records.json", records_json(records));
    write_json(ctx.dir / "thresholds.json", filter::thresholds_to_json(thresholds));
    write_json(ctx.dir / "classifier.json", fit.model->serialize());
    out.artifacts = {"verdicts.json", "records.json", "thresholds.json", "classifier.json", "originals.json"};
    // Parents go into the store so reviewers can compare them with the edits.
    json originals = json::object();
    for (const auto& r : records) {
        if (!r.parent_id || originals.contains(*r.parent_id)) continue;
        if (const auto* parent = ds.find(*r.parent_id)) originals[*r.parent_id] = ctx.root.store().put(images->load(*parent));
    }
    write_json(ctx.dir / "originals.json", originals);

    if (fs::exists(edit_dir / "alt_edits.json")) {
        auto alt = records_from(read_json(edit_dir / "alt_edits.json"));
        filter::filter_pipeline(alt, ctx.config.filter, models, ctx.root.store(), workers);
        write_json(ctx.dir / "alt_records.json", records_json(alt));
        out.artifacts.push_back("alt_records.json");
    }
    out.result = {{"kept", result.kept.size()}, {"filtered", result.filtered.size()}};
    return out;
}

std::vector<data::ImageRecord> to_pool(const std::vector<edit::AugmentationRecord>& records, bool included_only) {
    std::vector<data::ImageRecord> pool;
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (!r.ok() || (included_only && !edit::is_included(r.status))) continue;
        auto img = edit::to_image_record(r);
        // Two edits that produced identical pixels are one image.
        if (seen.insert(img.id).second) pool.push_back(std::move(img));
    }
    return pool;
}

StageOutput run_assemble(const StageContext& ctx) {
    auto ds = load_dataset(ctx.dataset_config);
    const fs::path edit_dir = stage_path(ctx, Stage::edit);
    const fs::path filter_dir = stage_path(ctx, Stage::filter);

    auto records = effective_records(ctx.root, ctx.state);
    json pools = json::object();
    pools["alia"] = image_records_json(to_pool(records, true));
    pools["alia-unfiltered"] = image_records_json(to_pool(records, false));
    pools["real"] = image_records_json(ds.split(data::Split::extra));
    if (fs::exists(edit_dir / "txt2img.json"))
        pools["txt2img"] = image_records_json(to_pool(records_from(read_json(edit_dir / "txt2img.json")), false));
    if (fs::exists(edit_dir / "user_edits.json"))
        pools["user-prompt"] = image_records_json(to_pool(records_from(read_json(edit_dir / "user_edits.json")), false));
    if (fs::exists(filter_dir / "alt_records.json"))
        pools["alt"] = image_records_json(to_pool(records_from(read_json(filter_dir / "alt_records.json")), true));

    StageOutput out;
    // Report pools that cannot match the +Real per-class counts now rather
    // than in the middle of training.
    auto target = data::class_distribution(ds, data::Split::extra);
    json sizes = json::object();
    for (const auto& [name, pool] : pools.items()) {
        auto have = data::class_distribution(image_records_from(pool));
        sizes[name] = have.total();
        for (const auto& [label, n] : target.counts)
            if (have[label] < n)
                out.diagnostics.push_back("pool " + name + " has " + std::to_string(have[label]) + " images of " +
                                          label + ", +Real adds " + std::to_string(n));
    }
    write_json(ctx.dir / "assembled.json", records_json(records));
    write_json(ctx.dir / "pools.json", pools);
    out.artifacts = {"assembled.json", "pools.json"};
    out.result = {{"pools", sizes}};
    return out;
}

json variant_json(const train::VariantRun& run) {
    return {{"name", run.name},
            {"report", train::report_to_json(run.report)},
            {"added", run.added.counts},
            {"config_hash", run.config_hash},
            {"diagnostics", run.diagnostics}};
}

StageOutput run_train(const StageContext& ctx) {
    auto ds = load_dataset(ctx.dataset_config);
    auto images = std::make_shared<TrainingImageSource>(make_image_source(ctx.dataset_config, ctx.root),
                                                        ctx.root.shared_store());
    auto pools_json = read_json(stage_path(ctx, Stage::assemble) / "pools.json");
    std::map<std::string, std::vector<data::ImageRecord>> pools;
    for (const auto& [name, pool] : pools_json.items()) pools[name] = image_records_from(pool);
    auto pool = [&](const std::string& name) {
        auto it = pools.find(name);
        return it == pools.end() ? std::vector<data::ImageRecord>{} : it->second;
    };

    const auto& t = ctx.config.train;
    auto trainer = make_trainer(ctx.config);
    train::TrainConfig config = base_train_config(ctx.config);
    StageOutput out;
    json hparams = {{"learning_rate", config.learning_rate}, {"weight_decay", config.weight_decay}, {"swept", t.sweep}};
    if (t.sweep) {
        std::vector<data::ImageRecord> originals;
        for (const auto& r : ds.records())
            if (r.split != data::Split::extra) originals.push_back(r);
        auto sweep = train::sweep_hyperparams(*trainer, ds.with_records(originals), *images, config, t.lr_grid,
                                              t.wd_grid, t.workers);
        config.learning_rate = sweep.best.learning_rate;
        config.weight_decay = sweep.best.weight_decay;
        json points = json::array();
        for (const auto& p : sweep.points) {
            points.push_back({{"learning_rate", p.learning_rate},
                              {"weight_decay", p.weight_decay},
                              {"validation", p.validation ? json(*p.validation) : json(nullptr)},
                              {"error", p.error}});
            if (!p.error.empty()) out.diagnostics.push_back("sweep point failed: " + p.error);
        }
        hparams = {{"learning_rate", config.learning_rate},
                   {"weight_decay", config.weight_decay},
                   {"swept", true},
                   {"best_validation", sweep.best_validation},
                   {"points", points}};
    }

    train::ResultsLedger ledger(ctx.dir / "results.jsonl");
    train::RunOptions options;
    options.seeds = t.seeds;
    options.metric = t.metric;
    options.workers = t.workers;
    options.ledger = &ledger;

    json variants = json::array();
    for (auto v : t.variants) {
        train::TrainConfig c = config;
        c.variant = v;
        std::vector<data::ImageRecord> p;
        if (v == train::Variant::alia) p = pool("alia");
        if (v == train::Variant::real) p = pool("real");
        if (v == train::Variant::txt2img) p = pool("txt2img");
        auto run = train::run_variant(std::string(train::to_string(v)), ds, p, *trainer, c, *images, options);
        out.diagnostics.insert(out.diagnostics.end(), run.diagnostics.begin(), run.diagnostics.end());
        variants.push_back(variant_json(run));
    }

    json ablations = json::object();
    for (const auto& name : t.ablations) {
        if (name == "prompt-quality") {
            auto r = train::ablation_prompt_quality(ds, pool("user-prompt"), pool("alia-unfiltered"), pool("alia"),
                                                    *trainer, config, *images, options);
            ablations[name] = {{"user_prompt", train::report_to_json(r.user_prompt)},
                               {"alia", train::report_to_json(r.alia)},
                               {"alia_filtered", train::report_to_json(r.alia_filtered)}};
        } else if (name == "quantity") {
            auto points = train::ablation_quantity(ds, pool("alia"), t.quantity_fractions, *trainer, config, *images,
                                                   options);
            json arr = json::array();
            for (const auto& p : points) {
                arr.push_back({{"fraction", p.fraction},
                               {"requested", p.requested},
                               {"report", p.report ? train::report_to_json(*p.report) : json(nullptr)},
                               {"diagnostic", p.diagnostic}});
                if (!p.diagnostic.empty()) out.diagnostics.push_back(p.diagnostic);
            }
            auto best = train::best_fraction(points);
            ablations[name] = {{"points", arr}, {"best_fraction", best ? json(*best) : json(nullptr)}};
        } else if (name == "edit-method") {
            bool img2img_main = ctx.config.edit.backend == edit::BackendKind::img2img;
            auto main_pool = pool("alia"), alt_pool = pool("alt");
            auto r = train::ablation_edit_method(ds, img2img_main ? main_pool : alt_pool,
                                                 img2img_main ? alt_pool : main_pool, *trainer, config, *images,
                                                 options);
            ablations[name] = {{"img2img", train::report_to_json(r.img2img)},
                               {"instruct_pix2pix", train::report_to_json(r.instruct_pix2pix)}};
        }
    }

    write_json(ctx.dir / "runs.json", {{"hyperparameters", hparams}, {"variants", variants}, {"ablations", ablations}});
    out.artifacts = {"runs.json"};
    out.result = {{"variants", variants.size()}, {"learning_rate", config.learning_rate},
                  {"weight_decay", config.weight_decay}};
    return out;
}

std::string reference_dataset(const std::string& name) {
    std::string lower;
    for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const char* key : {"iwildcam", "cub", "planes"})
        if (lower.find(key) != std::string::npos) return key;
    return {};
}

StageOutput run_evaluate(const StageContext& ctx) {
    auto runs = read_json(stage_path(ctx, Stage::train) / "runs.json");
    StageOutput out;
    json rows = json::array();
    std::optional<double> baseline;
    bool consistent = true;
    for (const auto& v : runs.at("variants")) {
        auto report = train::report_from_json(v.at("report"));
        // Aggregates must equal a recomputation from the stored seeds.
        auto [mean, sd] = train::mean_std(report.per_seed);
        if (mean != report.mean || sd != report.stddev) {
            consistent = false;
            out.diagnostics.push_back("aggregate mismatch for " + v.at("name").get<std::string>());
        }
        if (v.at("name") == "baseline") baseline = report.mean;
        rows.push_back({{"variant", v.at("name")},
                        {"mean", report.mean},
                        {"stddev", report.stddev},
                        {"per_seed", report.per_seed},
                        {"per_class", report.per_class},
                        {"added", v.at("added")}});
    }
    for (auto& row : rows)
        row["delta_vs_baseline"] = baseline ? json(row.at("mean").get<double>() - *baseline) : json(nullptr);

    json results = {{"metric", train::to_string(ctx.config.train.metric)},
                    {"dataset", ctx.dataset_config.name},
                    {"rows", rows},
                    {"hyperparameters", runs.at("hyperparameters")},
                    {"ablations", runs.at("ablations")},
                    {"aggregation_consistent", consistent}};
    if (auto* ref = train::find_prompt_quality_reference(reference_dataset(ctx.dataset_config.name))) {
        results["reference"] = {{"dataset", ref->dataset},
                                {"user_prompt", {ref->user_prompt.mean, ref->user_prompt.stddev}},
                                {"alia", {ref->alia.mean, ref->alia.stddev}},
                                {"alia_filtered", {ref->alia_filtered.mean, ref->alia_filtered.stddev}}};
    }
    write_json(ctx.dir / "results.json", results);
    out.artifacts = {"results.json"};
    out.result = {{"rows", rows.size()}, {"aggregation_consistent", consistent}};
    return out;
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

StageOutput run_report(const StageContext& ctx) {
    auto results = read_json(stage_path(ctx, Stage::evaluate) / "results.json");
    const std::string metric = results.at("metric");
    StageOutput out;
    fs::create_directories(ctx.dir / "charts");

    std::string md = "# Results: " + results.at("dataset").get<std::string>() + "\n\n";
    md += "Metric: " + metric + " (percent, mean ± population std over seeds).\n\n";
    const auto& hp = results.at("hyperparameters");
    char hbuf[128];
    std::snprintf(hbuf, sizeof hbuf, "Learning rate %g, weight decay %g%s.\n\n", hp.at("learning_rate").get<double>(),
                  hp.at("weight_decay").get<double>(), hp.at("swept").get<bool>() ? " (selected by sweep)" : "");
    md += hbuf;
    md += "| Variant | " + metric + " | Δ vs baseline | Seeds |\n|---|---|---|---|\n";
    std::vector<train::Bar> bars;
    for (const auto& row : results.at("rows")) {
        const double mean = row.at("mean"), sd = row.at("stddev");
        std::string delta = row.at("delta_vs_baseline").is_null() ? "" : pct(row.at("delta_vs_baseline").get<double>());
        md += "| " + row.at("variant").get<std::string>() + " | " + pct(mean) + " ± " + pct(sd) + " | " + delta +
              " | " + std::to_string(row.at("per_seed").size()) + " |\n";
        bars.push_back({row.at("variant").get<std::string>(), 100 * mean, 100 * sd});
    }
    write_file_atomic(ctx.dir / "charts" / "variants.svg",
                      train::bar_chart_svg(results.at("dataset").get<std::string>(), metric + " (%)", bars));
    out.artifacts.push_back("charts/variants.svg");

    const auto& ablations = results.at("ablations");
    if (ablations.contains("prompt-quality")) {
        const auto& pq = ablations.at("prompt-quality");
        md += "\n## Prompt quality\n\n| User prompt | ALIA prompts | ALIA prompts + filtering |\n|---|---|---|\n";
        std::vector<train::Bar> pbars;
        std::string line = "|";
        for (const char* key : {"user_prompt", "alia", "alia_filtered"}) {
            auto r = train::report_from_json(pq.at(key));
            line += " " + pct(r.mean) + " ± " + pct(r.stddev) + " |";
            pbars.push_back({key, 100 * r.mean, 100 * r.stddev});
        }
        md += line + "\n";
        if (results.contains("reference")) {
            const auto& ref = results.at("reference");
            char rbuf[256];
            std::snprintf(rbuf, sizeof rbuf, "\nPublished reference (%s): %.2f ± %.2f / %.2f ± %.2f / %.2f ± %.2f\n",
                          ref.at("dataset").get<std::string>().c_str(), ref.at("user_prompt")[0].get<double>(),
                          ref.at("user_prompt")[1].get<double>(), ref.at("alia")[0].get<double>(),
                          ref.at("alia")[1].get<double>(), ref.at("alia_filtered")[0].get<double>(),
                          ref.at("alia_filtered")[1].get<double>());
            md += rbuf;
        }
        write_file_atomic(ctx.dir / "charts" / "prompt_quality.svg",
                          train::bar_chart_svg("Prompt quality", metric + " (%)", pbars));
        out.artifacts.push_back("charts/prompt_quality.svg");
    }
    if (ablations.contains("quantity")) {
        const auto& q = ablations.at("quantity");
        md += "\n## Amount of added data\n\n| Added (fraction of train) | Images | " + metric + " |\n|---|---|---|\n";
        std::vector<train::CurvePoint> curve;
        for (const auto& p : q.at("points")) {
            const double f = p.at("fraction");
            std::string cell = p.at("report").is_null() ? "skipped: " + p.at("diagnostic").get<std::string>() : "";
            if (!p.at("report").is_null()) {
                auto r = train::report_from_json(p.at("report"));
                cell = pct(r.mean) + " ± " + pct(r.stddev);
                curve.push_back({100 * f, 100 * r.mean, 100 * r.stddev});
            }
            md += "| " + pct(f) + "% | " + std::to_string(p.at("requested").get<std::size_t>()) + " | " + cell + " |\n";
        }
        if (!q.at("best_fraction").is_null()) md += "\nBest: " + pct(q.at("best_fraction").get<double>()) + "% added.\n";
        write_file_atomic(ctx.dir / "charts" / "quantity.svg",
                          train::curve_svg("Images added", "added (% of train)", metric + " (%)", curve, false));
        out.artifacts.push_back("charts/quantity.svg");
    }
    if (ablations.contains("edit-method")) {
        const auto& em = ablations.at("edit-method");
        auto a = train::report_from_json(em.at("img2img"));
        auto b = train::report_from_json(em.at("instruct_pix2pix"));
        md += "\n## Editing method\n\n| Img2Img | InstructPix2Pix |\n|---|---|\n| " + pct(a.mean) + " ± " +
              pct(a.stddev) + " | " + pct(b.mean) + " ± " + pct(b.stddev) + " |\n";
        write_file_atomic(ctx.dir / "charts" / "edit_method.svg",
                          train::bar_chart_svg("Editing method", metric + " (%)",
                                               {{"img2img", 100 * a.mean, 100 * a.stddev},
                                                {"instruct-pix2pix", 100 * b.mean, 100 * b.stddev}}));
        out.artifacts.push_back("charts/edit_method.svg");
    }
    if (!results.at("aggregation_consistent").get<bool>())
        md += "\nWarning: some aggregates do not match their per-seed values.\n";
    write_file_atomic(ctx.dir / "report.md", md);
    out.artifacts.insert(out.artifacts.begin(), "report.md");
    return out;
}

}  // namespace

data::Dataset load_dataset(const data::DatasetConfig& config) {
    auto ds = data::load_manifest(config.manifest);
    if (config.domain_tags) ds = data::apply_domain_tags(ds, *config.domain_tags);
    if (!config.classes.empty() && config.classes != ds.classes())
        throw ConfigError("classes", "dataset config classes differ from the manifest header");
    return ds;
}

std::shared_ptr<data::ImageSource> make_image_source(const data::DatasetConfig& config, const ArtifactRoot& root) {
    auto base = std::make_shared<data::StoreImageSource>(root.shared_store(), config.manifest.parent_path());
    if (config.crop.top == 0 && config.crop.bottom == 0) return base;
    return std::make_shared<data::CroppingImageSource>(base, config.crop.top, config.crop.bottom);
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(1) + "\n"); }

bool apply_override(edit::AugmentationRecord& r, const std::string& action, const std::string& actor,
                    const std::string& timestamp) {
    using edit::EditStatus;
    if (action == "confirm") {
        r.audit.push_back({r.status, r.status, actor, "confirm", timestamp});
        return true;
    }
    if (action == "restore") {
        if (edit::is_filtered(r.status)) {
            edit::transition(r, EditStatus::human_restored, actor, "restore", timestamp);
            return true;
        }
        if (r.status == EditStatus::human_rejected) {
            edit::transition(r, EditStatus::kept, actor, "restore", timestamp);
            return true;
        }
        return false;
    }
    if (action == "reject") {
        if (r.status == EditStatus::kept) {
            edit::transition(r, EditStatus::human_rejected, actor, "reject", timestamp);
            return true;
        }
        if (r.status == EditStatus::human_restored) {
            // Back to the filter's own verdict.
            for (auto it = r.audit.rbegin(); it != r.audit.rend(); ++it) {
                if (edit::is_filtered(it->to)) {
                    edit::transition(r, it->to, actor, "reject", timestamp);
                    return true;
                }
            }
        }
        return false;
    }
    return false;
}

StageOutput execute(const StageContext& ctx) {
    switch (ctx.stage) {
        case Stage::caption: return run_caption(ctx);
        case Stage::summarize: return run_summarize(ctx);
        case Stage::edit_sweep: return run_edit_sweep(ctx);
        case Stage::select_params: return run_select_params(ctx);
        case Stage::edit: return run_edit(ctx);
        case Stage::filter: return run_filter(ctx);
        case Stage::assemble: return run_assemble(ctx);
        case Stage::train: return run_train(ctx);
        case Stage::evaluate: return run_evaluate(ctx);
        case Stage::report: return run_report(ctx);
    }
    throw PreconditionError("unknown stage");
}

}  // namespace alia::pipeline::detail
