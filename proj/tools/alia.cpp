// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver for runs: init, run, status, report, serve, plot and
// fixture. Exit codes: 0 success, 2 needs review, 1 failure.

#include <csignal>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "alia/content_store.hpp"
#include "alia/error.hpp"
#include "alia/pipeline/run.hpp"
#include "alia/review/service.hpp"
#include "alia/train/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace alia;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitNeedsReview = 2;

review::Service* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

int exit_code(pipeline::StageState state) {
    switch (state) {
        case pipeline::StageState::complete: return kExitOk;
        case pipeline::StageState::needs_review: return kExitNeedsReview;
        default: return kExitFailure;
    }
}

void print_outcome(const pipeline::StageOutcome& o) {
    std::cout << pipeline::to_string(o.stage) << ": " << pipeline::to_string(o.state);
    if (o.skipped) std::cout << " (up to date)";
    if (!o.error.empty()) std::cout << ": " << o.error;
    std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("alia");
    spdlog::set_default_logger(logger);

    CLI::App app{"Dataset augmentation pipeline driver"};
    app.require_subcommand(1);
    std::optional<std::string> root_opt;
    bool verbose = false;
    app.add_option("--root", root_opt, "Artifact root (default $ALIA_ARTIFACT_ROOT, else ./alia-artifacts)");
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    std::string dataset_path, config_path;
    auto* init = app.add_subcommand("init", "Create a run from a dataset config and a pipeline config");
    init->add_option("--dataset", dataset_path, "Dataset config (JSON)")->required();
    init->add_option("--config", config_path, "Pipeline config (JSON)")->required();

    std::string run_id, stage_name;
    std::optional<std::string> new_config, backend;
    bool resume = false;
    auto* run = app.add_subcommand("run", "Run one stage, or all remaining stages");
    run->add_option("stage", stage_name, "Stage name or 'all'")->required();
    run->add_option("--run", run_id, "Run id")->required();
    run->add_option("--config", new_config, "Replace the pipeline config (downstream stages become stale)");
    run->add_option("--backend", backend, "Override the backend kind: stub, replay or http");
    run->add_flag("--resume", resume, "Keep the working files of an interrupted stage");

    bool as_json = false;
    auto* status = app.add_subcommand("status", "Show stage states; lists runs without --run");
    status->add_option("--run", run_id, "Run id");
    status->add_flag("--json", as_json, "Machine-readable output");

    auto* report = app.add_subcommand("report", "Run evaluate and report if needed, then print the report");
    report->add_option("--run", run_id, "Run id")->required();

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Start the review HTTP service (no authentication)");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port; 0 picks a free one");

    std::optional<std::string> ledger_path;
    std::string out_dir = "charts", title = "results", metric_label = "metric (%)";
    auto* plot = app.add_subcommand("plot", "Write SVG charts from a results ledger");
    plot->add_option("--ledger", ledger_path, "results.jsonl (default: the train stage ledger of --run)");
    plot->add_option("--run", run_id, "Run id");
    plot->add_option("--out", out_dir, "Output directory");
    plot->add_option("--title", title, "Chart title");

    std::string fixture_dir;
    std::uint64_t fixture_seed = 7;
    bool review_params = false, with_ablations = false;
    auto* fixture = app.add_subcommand("fixture", "Write a small synthetic dataset and pipeline config");
    fixture->add_option("dir", fixture_dir, "Output directory")->required();
    fixture->add_option("--seed", fixture_seed, "Seed");
    fixture->add_flag("--review", review_params, "Leave edit parameters to human selection");
    fixture->add_flag("--ablations", with_ablations, "Enable the ablation studies");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitFailure;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*fixture) {
            auto paths = pipeline::write_fixture(fixture_dir, fixture_seed, !review_params, with_ablations);
            std::cout << paths.dataset_config.string() << "\n" << paths.pipeline_config.string() << "\n";
            return kExitOk;
        }
        auto root = pipeline::ArtifactRoot::resolve(root_opt ? std::optional<fs::path>(*root_opt) : std::nullopt);
        if (*init) {
            std::cout << pipeline::init_run(root, dataset_path, config_path) << "\n";
            return kExitOk;
        }
        if (*run) {
            pipeline::RunOptions options;
            options.resume = resume;
            options.backend = backend;
            if (new_config) options.config = fs::path(*new_config);
            if (stage_name == "all") {
                auto outcomes = pipeline::run_all(root, run_id, options);
                for (const auto& o : outcomes) print_outcome(o);
                return outcomes.empty() ? kExitFailure : exit_code(outcomes.back().state);
            }
            auto outcome = pipeline::run_stage(root, run_id, pipeline::parse_stage(stage_name), options);
            print_outcome(outcome);
            return exit_code(outcome.state);
        }
        if (*status) {
            if (run_id.empty()) {
                auto runs = review::runs_view(root);
                if (as_json) {
                    std::cout << runs.dump(2) << "\n";
                } else {
                    for (const auto& r : runs)
                        std::cout << r.at("id").get<std::string>() << (r.at("needs_review").get<bool>() ? "  needs review" : "")
                                  << "\n";
                }
                return kExitOk;
            }
            auto state = pipeline::load_run(root, run_id);
            if (as_json)
                std::cout << pipeline::status_json(state).dump(2) << "\n";
            else
                std::cout << pipeline::status_text(state);
            for (auto s : pipeline::kStages)
                if (state.effective_state(s) == pipeline::StageState::needs_review) return kExitNeedsReview;
            return kExitOk;
        }
        if (*report) {
            for (auto s : {pipeline::Stage::evaluate, pipeline::Stage::report}) {
                auto o = pipeline::run_stage(root, run_id, s);
                if (o.state != pipeline::StageState::complete) {
                    print_outcome(o);
                    return exit_code(o.state);
                }
            }
            const auto dir = root.stage_dir(run_id, pipeline::Stage::report);
            std::cout << read_file(dir / "report.md") << "\nCharts: " << (dir / "charts").string() << "\n";
            return kExitOk;
        }
        if (*serve) {
            review::Service service(root);
            const int bound = service.bind(host, port);
            spdlog::warn("the review service has no authentication; expose it only to trusted clients");
            std::cout << "serving " << root.path().string() << " on http://" << host << ":" << bound << "\n"
                      << std::flush;
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            service.listen();
            g_service = nullptr;
            return kExitOk;
        }
        if (*plot) {
            fs::path path;
            if (ledger_path) {
                path = *ledger_path;
            } else if (!run_id.empty()) {
                pipeline::load_run(root, run_id);
                path = root.stage_dir(run_id, pipeline::Stage::train) / "results.jsonl";
            } else {
                throw ConfigError("ledger", "pass --ledger or --run");
            }
            if (!fs::exists(path)) throw Error(ErrorCode::not_found, "no ledger at " + path.string());
            train::ResultsLedger ledger(path);
            auto charts = train::ledger_charts(ledger, title, metric_label);
            fs::create_directories(out_dir);
            for (const auto& [name, svg] : charts) {
                write_file_atomic(fs::path(out_dir) / name, svg);
                std::cout << (fs::path(out_dir) / name).string() << "\n";
            }
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error" << (e.field().empty() ? "" : " in " + e.field()) << ": " << e.what() << "\n";
        return kExitFailure;
    } catch (const ValidationError& e) {
        std::cerr << "invalid " << e.field() << ": " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
