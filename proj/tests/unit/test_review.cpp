// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

#include "alia/content_store.hpp"
#include "alia/error.hpp"
#include "alia/hash.hpp"
#include "alia/pipeline/run.hpp"
#include "alia/review/service.hpp"
#include "temp_dir.hpp"

using namespace alia;
using namespace alia::pipeline;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// A live service on a free loopback port.
struct Server {
    testing::TempDir dir{"alia-review"};
    ArtifactRoot root{dir / "artifacts"};
    review::Service service{root};
    int port = 0;
    std::thread thread;

    Server() {
        port = service.bind("127.0.0.1", 0);
        thread = std::thread([this] { service.listen(); });
    }
    ~Server() {
        service.stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }
    std::string new_run(bool pin) {
        auto paths = write_fixture(dir / ("fixture-" + std::to_string(pin)), 7, pin);
        return init_run(root, paths.dataset_config, paths.pipeline_config);
    }
};

json body(const httplib::Result& r) {
    REQUIRE(r);
    return json::parse(r->body);
}

httplib::Result post(httplib::Client& c, const std::string& path, const json& j) {
    return c.Post(path, j.dump(), "application/json");
}

std::string tree_hash(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    Sha256 h;
    for (const auto& f : files) h.field(f.lexically_relative(dir).string()).field(sha256_hex(read_file(f)));
    return h.hex_digest();
}

}  // namespace

TEST_CASE("GET /runs on an empty root is an empty list") {
    Server s;
    auto c = s.client();
    auto r = c.Get("/runs");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(body(r) == json::array());

    auto missing = c.Get("/runs/nope/status");
    CHECK(missing->status == 404);
    CHECK(body(missing).at("code") == "not-found");
    CHECK(c.Get("/nowhere")->status == 404);
    CHECK(c.Delete("/runs")->status == 405);
    CHECK(c.Get("/images/" + std::string(64, 'a'))->status == 404);
}

TEST_CASE("grid review and parameter selection over HTTP") {
    Server s;
    auto id = s.new_run(false);
    auto c = s.client();
    CHECK(c.Get("/runs/" + id + "/grid")->status == 404);

    run_all(s.root, id);
    auto runs = body(c.Get("/runs"));
    REQUIRE(runs.size() == 1);
    CHECK(runs[0].at("needs_review") == true);
    auto status = body(c.Get("/runs/" + id + "/status"));
    CHECK(status.at("review").size() == 1);

    auto grid = body(c.Get("/runs/" + id + "/grid"));
    REQUIRE(grid.at("cells").size() == 25);
    for (const auto& cell : grid.at("cells")) {
        CHECK(cell.at("count") == 6);
        CHECK(cell.at("complete") == true);
    }
    CHECK(grid.at("originals").size() == 3);
    CHECK(grid.at("selected").is_null());
    auto img = c.Get(grid.at("cells")[0].at("images")[0].at("url").get<std::string>());
    REQUIRE(img);
    CHECK(img->status == 200);
    CHECK(img->get_header_value("Content-Type") == "image/png");
    CHECK(img->body.substr(1, 3) == "PNG");
    CHECK(c.Get(grid.at("originals")[0].at("url").get<std::string>())->status == 200);

    const std::string decisions = "/runs/" + id + "/decisions";
    auto off_grid = post(c, decisions, {{"kind", "param-selection"}, {"payload", {{"strength", 0.5}, {"guidance", 7.5}}}});
    CHECK(off_grid->status == 422);
    CHECK(body(off_grid).at("code") == "range");
    auto bad_kind = post(c, decisions, {{"kind", "vote"}, {"payload", json::object()}});
    CHECK(bad_kind->status == 422);
    CHECK(body(bad_kind).at("field") == "kind");
    auto bad_json = c.Post(decisions, "{not json", "application/json");
    CHECK(bad_json->status == 422);
    CHECK(body(bad_json).at("field") == "body");
    auto stale = post(c, decisions,
                      {{"kind", "param-selection"}, {"base", "0000"}, {"payload", {{"strength", 0.4}, {"guidance", 7.5}}}});
    CHECK(stale->status == 409);
    CHECK(body(stale).at("code") == "conflict");
    auto too_early = post(c, decisions, {{"kind", "filter-override"}, {"payload", {{"edit_id", "x"}, {"action", "reject"}}}});
    CHECK(too_early->status == 409);

    auto ok = post(c, decisions, {{"kind", "param-selection"},
                                  {"base", grid.at("base")},
                                  {"actor", "reviewer"},
                                  {"payload", {{"strength", 0.4}, {"guidance", 5.0}}}});
    CHECK(ok->status == 201);
    auto d = body(ok);
    CHECK(d.at("decision").at("actor") == "reviewer");
    CHECK(d.at("decision").at("payload").at("params").at("strength") == 0.4);
    auto after = body(c.Get("/runs/" + id + "/grid"));
    CHECK(after.at("select_params") == "complete");
    CHECK(after.at("selected").at("guidance") == 5.0);
}

TEST_CASE("prompt editing over HTTP") {
    Server s;
    auto id = s.new_run(true);
    for (auto st : {Stage::caption, Stage::summarize, Stage::edit_sweep}) run_stage(s.root, id, st);
    auto c = s.client();
    auto prompts = body(c.Get("/runs/" + id + "/prompts"));
    REQUIRE(!prompts.at("descriptions").empty());
    CHECK(prompts.at("classes").size() == 3);
    CHECK(prompts.at("descriptions")[0].contains("instruction"));

    const std::string path = "/runs/" + id + "/prompts";
    auto specific = c.Put(path, json{{"descriptions", {{{"template", "a { } goldfinch in a tree."}}}}}.dump(),
                          "application/json");
    CHECK(specific->status == 422);
    CHECK(body(specific).at("field") == "descriptions[0].template");
    auto twice = c.Put(path, json{{"descriptions", {{{"template", "a { } bird by a { } lake."}}}}}.dump(),
                       "application/json");
    CHECK(twice->status == 422);

    auto ok = c.Put(path,
                    json{{"base", prompts.at("base")}, {"descriptions", {{{"template", "a photo of a { } bird by a river."}}}}}
                        .dump(),
                    "application/json");
    CHECK(ok->status == 200);
    auto updated = body(ok);
    REQUIRE(updated.at("descriptions").size() == 1);
    CHECK(updated.at("descriptions")[0].at("source") == "user");
    auto status = body(c.Get("/runs/" + id + "/status"));
    for (const auto& st : status.at("stages"))
        if (st.at("stage") == "edit-sweep") CHECK(st.at("stale") == true);

    auto stale = c.Put(path, json{{"base", "old"}, {"descriptions", {{{"template", "a { } bird."}}}}}.dump(),
                       "application/json");
    CHECK(stale->status == 409);
}

TEST_CASE("filter queue: pagination, overrides and consistency") {
    Server s;
    auto id = s.new_run(true);
    run_all(s.root, id);
    auto c = s.client();
    const std::string base = "/runs/" + id + "/filters";
    auto first = body(c.Get(base + "?page_size=7"));
    const std::size_t total = first.at("total");
    CHECK(total == 120);
    CHECK(first.at("pages") == (total + 6) / 7);
    std::size_t seen = 0;
    std::set<std::string> ids;
    for (std::size_t page = 1; page <= first.at("pages").get<std::size_t>(); ++page) {
        auto p = body(c.Get(base + "?page_size=7&page=" + std::to_string(page)));
        seen += p.at("items").size();
        for (const auto& item : p.at("items")) ids.insert(item.at("edit_id").get<std::string>());
    }
    CHECK(seen == total);
    CHECK(ids.size() == total);

    std::size_t by_status = 0;
    for (const auto& [name, n] : first.at("tallies").at("status").items()) {
        auto q = body(c.Get(base + "?status=" + name));
        CHECK(q.at("total") == n);
        by_status += n.get<std::size_t>();
    }
    CHECK(by_status == total);
    auto confidence = body(c.Get(base + "?stage=confidence&page_size=1000"));
    std::size_t confidence_verdicts = 0;
    for (const auto& [k, n] : first.at("tallies").at("stage").at("confidence").items()) confidence_verdicts += n.get<std::size_t>();
    CHECK(confidence.at("total") == confidence_verdicts);

    CHECK(c.Get(base + "?stage=vibes")->status == 422);
    CHECK(body(c.Get(base + "?status=lost")).at("field") == "status");
    CHECK(c.Get(base + "?page=0")->status == 422);
    CHECK(c.Get(base + "?page_size=100000")->status == 422);

    auto rejected = body(c.Get(base + "?status=filtered-confidence"));
    REQUIRE(rejected.at("total").get<std::size_t>() > 0);
    const auto& item = rejected.at("items")[0];
    CHECK(item.contains("original"));
    CHECK(item.contains("image"));
    CHECK(item.at("verdicts").back().at("stage") == "confidence");
    CHECK(item.at("verdicts").back().contains("threshold"));

    const auto artifacts_before = tree_hash(s.root.run_dir(id) / "stages");
    auto restore = post(c, "/runs/" + id + "/decisions",
                        {{"kind", "filter-override"},
                         {"base", rejected.at("base")},
                         {"payload", {{"edit_id", item.at("edit_id")}, {"action", "restore"}}}});
    CHECK(restore->status == 201);
    auto invalid = post(c, "/runs/" + id + "/decisions",
                        {{"kind", "filter-override"}, {"payload", {{"edit_id", item.at("edit_id")}, {"action", "restore"}}}});
    CHECK(invalid->status == 422);
    CHECK(body(invalid).at("field") == "action");
    CHECK(tree_hash(s.root.run_dir(id) / "stages") == artifacts_before);

    auto restored = body(c.Get(base + "?status=human-restored"));
    CHECK(restored.at("total") == 1);
    CHECK(restored.at("items")[0].at("edit_id") == item.at("edit_id"));

    auto consistency = body(c.Get("/runs/" + id + "/consistency"));
    CHECK(consistency.at("consistent") == true);
    CHECK(consistency.at("checks").size() >= 5);
    for (const auto& check : consistency.at("checks")) CHECK_MESSAGE(check.at("ok") == true, check.dump());

    // Replaying the log reproduces the state the service reports.
    auto events = EventLog(s.root.run_dir(id) / "events.jsonl").read();
    CHECK(status_json(fold(events)) == body(c.Get("/runs/" + id + "/status")));
}

TEST_CASE("reads stay available while a writer runs") {
    Server s;
    auto id = s.new_run(true);
    std::thread writer([&] { run_all(s.root, id); });
    std::atomic<int> failures{0};
    std::vector<std::thread> readers;
    for (int t = 0; t < 4; ++t) {
        readers.emplace_back([&] {
            auto c = s.client();
            for (int i = 0; i < 20; ++i) {
                auto r = c.Get("/runs/" + id + "/status");
                if (!r || r->status != 200) ++failures;
            }
        });
    }
    for (auto& r : readers) r.join();
    writer.join();
    CHECK(failures == 0);
}

TEST_CASE("error bodies carry code, message and field") {
    auto v = review::error_response(alia::ValidationError("template", "bad"));
    CHECK(v.status == 422);
    auto j = json::parse(v.body);
    CHECK(j.at("code") == "validation");
    CHECK(j.at("message") == "bad");
    CHECK(j.at("field") == "template");
    CHECK(review::error_response(alia::Error(alia::ErrorCode::ordering, "x")).status == 409);
    CHECK(review::error_response(alia::RangeError("x")).status == 422);
    CHECK(!json::parse(review::error_response(alia::RangeError("x")).body).contains("field"));
}
