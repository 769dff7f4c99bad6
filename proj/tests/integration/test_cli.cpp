// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdlib>

#include "doctest.h"
#include "json.hpp"

#include "alia/content_store.hpp"
#include "temp_dir.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Cli {
    alia::testing::TempDir dir{"alia-cli"};

    struct Result {
        int code = -1;
        std::string out;
        std::string err;
    };

    // Runs the CLI with the artifact root taken from the environment.
    Result run(const std::string& args, const std::string& env = {}) const {
        const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
        std::string cmd = "ALIA_ARTIFACT_ROOT='" + (dir / "artifacts").string() + "' " + env + " '" + ALIA_CLI_PATH +
                          "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
        const int status = std::system(cmd.c_str());
        Result r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = alia::read_file(out);
        r.err = alia::read_file(err);
        return r;
    }

    std::string init(bool review = false, const std::string& name = "fx") const {
        auto f = run("fixture '" + (dir / name).string() + "'" + (review ? " --review" : ""));
        REQUIRE(f.code == 0);
        auto r = run("init --dataset '" + (dir / name / "data" / "dataset.json").string() + "' --config '" +
                     (dir / name / "pipeline.json").string() + "'");
        REQUIRE(r.code == 0);
        return r.out.substr(0, r.out.find('\n'));
    }

    std::vector<std::string> hashes(const std::string& id) const {
        auto r = run("status --json --run " + id);
        std::vector<std::string> out;
        for (const auto& s : json::parse(r.out).at("stages")) out.push_back(s.at("content_hash"));
        return out;
    }
};

}  // namespace

TEST_CASE("cli: run all, status and report") {
    Cli cli;
    auto id = cli.init();
    auto r = cli.run("run all --run " + id);
    CHECK(r.code == 0);
    CHECK(r.out.find("report: complete") != std::string::npos);
    CHECK(cli.run("status --run " + id).code == 0);
    auto again = cli.run("run all --run " + id);
    CHECK(again.out.find("(up to date)") != std::string::npos);
    auto report = cli.run("report --run " + id);
    CHECK(report.code == 0);
    CHECK(report.out.find("| baseline |") != std::string::npos);
    auto listing = cli.run("status");
    CHECK(listing.out.find(id) != std::string::npos);

    auto plot = cli.run("plot --run " + id + " --out '" + (cli.dir / "charts").string() + "'");
    CHECK(plot.code == 0);
    CHECK(fs::exists(cli.dir / "charts" / "variants.svg"));
}

TEST_CASE("cli: exit code 2 while a human decision is pending") {
    Cli cli;
    auto id = cli.init(true);
    auto r = cli.run("run all --run " + id);
    CHECK(r.code == 2);
    CHECK(r.out.find("select-params: needs-review") != std::string::npos);
    CHECK(cli.run("status --run " + id).code == 2);
    auto blocked = cli.run("run edit --run " + id);
    CHECK(blocked.code == 1);
    CHECK(blocked.err.find("select-params") != std::string::npos);
}

TEST_CASE("cli: configuration and usage errors fail with code 1") {
    Cli cli;
    cli.init();
    auto cfg = json::parse(alia::read_file(cli.dir / "fx" / "pipeline.json"));
    cfg["edit"]["edits_per_image"] = "two";
    alia::write_file_atomic(cli.dir / "bad.json", cfg.dump());
    auto r = cli.run("init --dataset '" + (cli.dir / "fx" / "data" / "dataset.json").string() + "' --config '" +
                     (cli.dir / "bad.json").string() + "'");
    CHECK(r.code == 1);
    CHECK(r.err.find("edit.edits_per_image") != std::string::npos);
    CHECK(cli.run("run bogus --run x").code == 1);
    CHECK(cli.run("status --run missing").code == 1);
    CHECK(cli.run("run all").code == 1);
    CHECK(cli.run("--help").code == 0);
    CHECK(cli.run("run all --run " + cli.init(false, "fy") + " --backend gpu").code == 1);
}

TEST_CASE("cli: a run killed mid-edit resumes to the same hashes") {
    Cli cli;
    auto clean = cli.init();
    REQUIRE(cli.run("run all --run " + clean).code == 0);

    auto crashed = cli.init();
    auto first = cli.run("run all --run " + crashed, "ALIA_FAULT_INJECT=edit:45");
    CHECK(first.code != 0);
    CHECK(first.code != 2);
    auto status = json::parse(cli.run("status --json --run " + crashed).out);
    CHECK(status.at("stages")[4].at("recorded_state") == "running");
    const auto working = cli.dir / "artifacts" / "runs" / crashed / "stages" / "edit" / "edits.jsonl";
    REQUIRE(fs::exists(working));

    // A second crash while resuming still makes progress.
    CHECK(cli.run("run all --resume --run " + crashed, "ALIA_FAULT_INJECT=edit:45").code != 0);
    auto resumed = cli.run("run all --resume --run " + crashed);
    CHECK(resumed.code == 0);
    CHECK(resumed.err.find("resuming") != std::string::npos);
    CHECK(cli.hashes(crashed) == cli.hashes(clean));
}
