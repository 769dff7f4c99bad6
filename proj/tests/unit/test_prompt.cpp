// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "temp_dir.hpp"

#include "alia/data/config.hpp"
#include "alia/data/manifest.hpp"
#include "alia/data/synthetic.hpp"
#include "alia/error.hpp"
#include "alia/hash.hpp"
#include "alia/prompt/captions.hpp"
#include "alia/prompt/dialogue.hpp"

using namespace alia;
using namespace alia::prompt;

namespace {

const std::filesystem::path kFixtures = ALIA_FIXTURE_DIR;

RefineOptions iwildcam_options() {
    RefineOptions o;
    o.superclass = "animal";
    o.prefix = "a camera trap photo of an animal";
    o.classes = data::iwildcam_classes();
    o.superclass_in_template = false;
    return o;
}

RefineOptions cub_options() {
    RefineOptions o;
    o.superclass = "bird";
    o.prefix = "a photo of a bird";
    o.classes = {"Mallard", "Scott Oriole", "Blue Jay"};
    return o;
}

class FlakyModel : public LanguageModelClient {
public:
    explicit FlakyModel(int failures) : failures_(failures) {}
    std::string send(const Conversation&) override {
        ++calls;
        if (failures_-- > 0) throw TransportError("connection reset");
        return "ok";
    }
    int calls = 0;

private:
    int failures_;
};

class CountingCaptioner : public CaptionerClient {
public:
    std::string caption(const Image& image) override {
        ++calls;
        return inner.caption(image);
    }
    std::atomic<int> calls{0};
    StubCaptioner inner;
};

}  // namespace

TEST_CASE("summarize prompt embeds captions and prefix") {
    const std::vector<std::string> caps = {"a deer in a field", "a fox at night"};
    const auto p = build_summarize_prompt(PromptTemplates::defaults(), caps, "a camera trap photo of an animal");
    CHECK(p.find("My captions are \n- a deer in a field\n- a fox at night\n.") != std::string::npos);
    CHECK(p.find("of the form a camera trap photo of an animal") != std::string::npos);
    CHECK(p.find("[") == std::string::npos);
    CHECK(serialize_captions(caps) == "\n- a deer in a field\n- a fox at night\n");
}

TEST_CASE("refine prompt names the superclass") {
    const auto p = build_refine_prompt(PromptTemplates::defaults(), "bird");
    CHECK(p == "Can you modify your response so each caption is agnostic of the type of bird. Please output less "
               "than 10 captions which cover the largest breadth of concepts.");
}

TEST_CASE("prompt templates round trip through a file") {
    testing::TempDir dir;
    PromptTemplates t = PromptTemplates::defaults();
    t.refine = "Make these generic for [SUPERCLASS].";
    t.save(dir / "prompts.json");
    CHECK(PromptTemplates::load(dir / "prompts.json").refine == t.refine);
    write_file_atomic(dir / "bad.json", R"({"summarize": "no marker"})");
    CHECK_THROWS_AS(PromptTemplates::load(dir / "bad.json"), ConfigError);
}

TEST_CASE("iWildCam golden transcript yields the four templates") {
    auto llm = ReplayLanguageModel::from_file(kFixtures / "iwildcam_transcript.json");
    Conversation conv;
    const std::vector<std::string> caps = {"a deer standing in tall grass", "a blurry animal at night"};
    summarize_captions(caps, "a camera trap photo of an animal", llm, conv);
    auto result = refine_descriptions(conv, iwildcam_options(), llm);
    REQUIRE(result.descriptions.size() == 4);
    const std::vector<std::string> expected = {
        "a camera trap photo of a { } in a grassy field with trees and bushes.",
        "a camera trap photo of a { } in a forest in the dark.",
        "a camera trap photo of a { } near a large body of water in the middle of a field.",
        "a camera trap photo of a { } walking on a dirt trail with twigs and branches.",
    };
    for (std::size_t i = 0; i < 4; ++i) CHECK(result.descriptions[i].template_text == expected[i]);
    CHECK(conv.size() == 4);
    CHECK(conv[2].content.find("agnostic of the type of animal") != std::string::npos);
    CHECK(llm.consumed() == 2);
}

TEST_CASE("parse keeps the superclass word when configured") {
    auto r = parse_descriptions("- A photo of a bird perched on a branch.\n- A photo of a bird in flight over water.",
                                cub_options());
    REQUIRE(r.descriptions.size() == 2);
    CHECK(r.descriptions[0].template_text == "a photo of a { } bird perched on a branch.");
    CHECK(instantiate_prompt(r.descriptions[0], "Scott Oriole") == "a photo of a Scott Oriole bird perched on a branch.");
}

TEST_CASE("parse caps the count and drops class-specific lines") {
    std::string reply;
    for (int i = 1; i <= 12; ++i) reply += std::to_string(i) + ". A photo of a bird in setting number " + std::to_string(i) + ".\n";
    auto r = parse_descriptions(reply, cub_options());
    CHECK(r.descriptions.size() == 10);
    CHECK(r.descriptions.back().template_text == "a photo of a { } bird in setting number 10.");

    auto r2 = parse_descriptions("1) A photo of a bird on a lake.\n2) A photo of a Mallard bird on a lake.\n"
                                 "(3) A photo of a bird on a lake.\n* A photograph of snow.",
                                 cub_options());
    REQUIRE(r2.descriptions.size() == 1);
    CHECK(r2.diagnostics.size() == 2);
    CHECK(r2.diagnostics[0].find("Mallard") != std::string::npos);
}

TEST_CASE("parse accepts lines that open with the article") {
    auto r = parse_descriptions("An animal drinking from a river at dusk.\nThe animals in snow.", iwildcam_options());
    REQUIRE(r.descriptions.size() == 1);
    CHECK(r.descriptions[0].template_text == "a camera trap photo of a { } drinking from a river at dusk.");
}

TEST_CASE("empty refinement is an error") {
    ReplayLanguageModel llm(std::vector<std::pair<std::string, std::string>>{{"", "Sorry, I cannot help with that."}});
    Conversation conv{{"user", "x"}, {"assistant", "y"}};
    try {
        refine_descriptions(conv, cub_options(), llm);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::empty_descriptions);
    }
}

TEST_CASE("a prefix without the superclass is a config error") {
    auto o = cub_options();
    o.prefix = "a picture";
    CHECK_THROWS_AS(parse_descriptions("a picture of a bird", o), ConfigError);
}

TEST_CASE("description validation") {
    auto d = make_description("a photo of a { } bird perched on a branch.", "a photo of a bird");
    const std::vector<std::string> classes = {"Mallard"};
    CHECK_NOTHROW(check_description(d, classes));
    CHECK(count_placeholders("{ } and { }") == 2);
    CHECK_THROWS_AS(make_description("no placeholder", ""), ValidationError);
    d.template_text = "a photo of a { } near a mallard";
    try {
        check_description(d, classes);
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(e.field() == "template");
    }
    d.template_text = "a photo of a { }";
    d.instruction_template = "put the { } { } here";
    try {
        check_description(d, classes);
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(e.field() == "instruction_template");
    }
    CHECK(to_template("a photo of a Blue Jay in snow", "Blue Jay") == "a photo of a { } in snow");
}

TEST_CASE("instruction form") {
    auto d = make_description("a camera trap photo of a { } in a grassy field with trees and bushes.", "p");
    auto inst = to_instruction(d);
    CHECK(inst.template_text == "put the { } in a grassy field with trees and bushes");
    CHECK(inst.needs_review);
    d.instruction_template = "make the ground a field of dirt with bushes around the { }";
    inst = to_instruction(d);
    CHECK_FALSE(inst.needs_review);
    CHECK(inst.template_text == *d.instruction_template);
    auto j = description_to_json(d);
    CHECK(description_from_json(j) == d);
}

TEST_CASE("retry with exponential backoff") {
    std::vector<long long> sleeps;
    RetryPolicy policy;
    policy.sleep = [&](std::chrono::milliseconds ms) { sleeps.push_back(ms.count()); };
    FlakyModel twice(2);
    CHECK(send_with_retry(twice, {{"user", "hi"}}, policy) == "ok");
    CHECK(twice.calls == 3);
    CHECK(sleeps == std::vector<long long>{250, 500});

    FlakyModel always(10);
    CHECK_THROWS_AS(send_with_retry(always, {{"user", "hi"}}, policy), TransportError);
    CHECK(always.calls == 3);
}

TEST_CASE("strict replay checks the prompt") {
    ReplayLanguageModel llm(std::vector<std::pair<std::string, std::string>>{{"expected", "reply"}}, true);
    CHECK_THROWS_AS(llm.send({{"user", "other"}}), BackendError);
    CHECK(llm.send({{"user", "expected"}}) == "reply");
    CHECK_THROWS_AS(llm.send({{"user", "expected"}}), BackendError);
}

TEST_CASE("recording model produces a replayable transcript") {
    StubLanguageModel stub;
    RecordingLanguageModel rec(stub);
    Conversation conv;
    const std::vector<std::string> caps = {"a small red object against a clear blue sky in bright light"};
    summarize_captions(caps, "a photo of a bird", rec, conv);
    auto t = rec.transcript();
    REQUIRE(t["turns"].size() == 1);
    CHECK(t["turns"][0]["reply"] == "a photo of a bird against a clear blue sky in bright light.\n");
}

TEST_CASE("caption pool dedups and counts") {
    CaptionPool pool;
    pool.add("a  bird on a branch ");
    pool.add("a bird on a branch");
    pool.add("");
    pool.add("a bird in flight");
    CHECK(pool.size() == 2);
    CHECK(pool.source_counts["a bird on a branch"] == 2);
    auto back = caption_pool_from_json(caption_pool_to_json(pool));
    CHECK(back.captions == pool.captions);
    CHECK(back.source_counts == pool.source_counts);
}

TEST_CASE("sample_captions") {
    CaptionPool pool;
    for (int i = 0; i < 500; ++i) pool.add("caption " + std::to_string(i));
    auto s = sample_captions(pool, kDefaultCaptionSample, 11);
    CHECK(s.size() == 200);
    CHECK(std::set<std::string>(s.begin(), s.end()).size() == 200);
    CHECK(s == sample_captions(pool, 200, 11));
    CHECK(s != sample_captions(pool, 200, 12));

    CaptionPool small;
    for (int i = 0; i < 5; ++i) small.add("c" + std::to_string(i));
    auto all = sample_captions(small, 200, 3);
    CHECK(std::set<std::string>(all.begin(), all.end()) == std::set<std::string>(small.captions.begin(), small.captions.end()));
}

TEST_CASE("caption_dataset over the synthetic dataset, with cache and context") {
    testing::TempDir dir;
    const auto cfg = data::load_dataset_config(data::write_synthetic_dataset(dir.path()));
    const auto ds = data::load_manifest(cfg.manifest);
    auto store = std::make_shared<const ImageStore>(dir / "images");
    data::StoreImageSource images(store, dir.path());

    CountingCaptioner captioner;
    CaptionCache cache(dir / "captions.jsonl");
    CaptionOptions options;
    options.workers = 3;
    auto first = caption_dataset(ds, captioner, images, {}, &cache, options);
    CHECK(first.attempted == 30);
    CHECK(first.failures.empty());
    CHECK_FALSE(first.pool.includes_context_only);
    CHECK(first.pool.size() == 6);  // 3 object colours x 2 backgrounds
    CHECK(captioner.calls == 30);
    std::set<std::string> scenes(first.pool.captions.begin(), first.pool.captions.end());
    CHECK(scenes.count("a small red object against a clear blue sky in bright light") == 1);

    // Resume: a fresh cache over the same file serves every caption.
    CaptionCache reloaded(dir / "captions.jsonl");
    CHECK(reloaded.size() == 30);
    auto second = caption_dataset(ds, captioner, images, {}, &reloaded, options);
    CHECK(second.cache_hits == 30);
    CHECK(captioner.calls == 30);

    const auto extra = ds.split(data::Split::extra);
    options.include_train = false;
    auto ctx = caption_dataset(ds, captioner, images, extra, nullptr, options);
    CHECK(ctx.attempted == extra.size());
    CHECK(ctx.pool.includes_context_only);
}

TEST_CASE("caption failures within budget are reported") {
    class HalfBroken : public CaptionerClient {
    public:
        std::string caption(const Image& image) override {
            if (image.at(0, 0)[0] % 2 == 0) throw BackendError("model crashed");
            return "ok";
        }
    };
    testing::TempDir dir;
    const auto cfg = data::load_dataset_config(data::write_synthetic_dataset(dir.path()));
    const auto ds = data::load_manifest(cfg.manifest);
    data::StoreImageSource images(std::make_shared<const ImageStore>(dir / "images"), dir.path());
    HalfBroken captioner;
    CaptionOptions options;
    options.max_failure_ratio = 1.0;
    auto r = caption_dataset(ds, captioner, images, {}, nullptr, options);
    CHECK(r.failures.size() + r.pool.source_counts["ok"] == 30);
    options.max_failure_ratio = 0.0;
    if (!r.failures.empty()) CHECK_THROWS_AS(caption_dataset(ds, captioner, images, {}, nullptr, options), BackendError);
}

TEST_CASE("stub dialogue over synthetic captions produces templates") {
    StubLanguageModel llm;
    Conversation conv;
    const std::vector<std::string> caps = {"a small red object against a clear blue sky in bright light",
                                           "a small blue object against a green grassy field in bright light"};
    summarize_captions(caps, "a photo of a bird", llm, conv);
    RefineOptions o = cub_options();
    o.classes = {"cardinal", "bluejay", "goldfinch"};
    auto r = refine_descriptions(conv, o, llm);
    REQUIRE(r.descriptions.size() == 2);
    CHECK(r.descriptions[0].template_text == "a photo of a { } bird against a clear blue sky in bright light.");
}

TEST_CASE("HTTP adapters") {
    httplib::Server server;
    std::atomic<int> chat_calls{0};
    server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
        auto j = nlohmann::json::parse(req.body);
        if (chat_calls++ == 0) {
            res.status = 503;
            return;
        }
        res.set_content(nlohmann::json{{"reply", "echo " + j["messages"].back()["content"].get<std::string>()}}.dump(),
                        "application/json");
    });
    server.Post("/v1/caption", [&](const httplib::Request& req, httplib::Response& res) {
        auto j = nlohmann::json::parse(req.body);
        const auto img = decode_png(base64_decode(j["image"].get<std::string>()));
        res.set_content(nlohmann::json{{"caption", std::to_string(img.width) + "px"}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string url = "http://127.0.0.1:" + std::to_string(port);

    HttpLanguageModel llm(url);
    RetryPolicy policy;
    policy.sleep = [](std::chrono::milliseconds) {};
    CHECK(send_with_retry(llm, {{"user", "hello"}}, policy) == "echo hello");
    CHECK(chat_calls == 2);

    HttpCaptioner cap(url);
    CHECK(cap.caption(data::render_synthetic_image("cardinal", "sky", 1)) == "16px");

    server.stop();
    t.join();
    HttpLanguageModel dead(url);
    CHECK_THROWS_AS(dead.send({{"user", "x"}}), TransportError);
}
