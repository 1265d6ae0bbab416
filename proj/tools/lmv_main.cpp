// lmv: watch a directory for document images, fan out to extraction engines
// and structurer backends, reconcile the JSON candidates by majority vote,
// and persist the consensus.
//
// Exit codes: 0 success / graceful shutdown; 2 configuration, spec, or
// usage error; 3 terminal pipeline failure (no consensus); 4 input is not a
// valid image. stdout carries machine-readable output only; diagnostics go
// to stderr.

#include <signal.h>

#include <atomic>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lmv/bench.hpp"
#include "lmv/digest.hpp"
#include "lmv/fsutil.hpp"
#include "lmv/log.hpp"
#include "lmv/pipeline.hpp"
#include "lmv/watch.hpp"

using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

void install_signal_handlers() {
    struct sigaction sa{};
    sa.sa_handler = handle_signal;
    sigemptyset(&sa.sa_mask);
    sigaction(SIGINT, &sa, nullptr);
    sigaction(SIGTERM, &sa, nullptr);
}

lmv::pipeline::PipelineConfig load_config_file(const std::string& path) {
    auto content = lmv::read_file(path);
    if (!content) throw lmv::ConfigError("(config)", "cannot read config file \"" + path + "\"");
    json j;
    try {
        j = json::parse(*content);
    } catch (const json::exception& e) {
        throw lmv::ConfigError("(config)", "config file \"" + path + "\" is not valid JSON: " + e.what());
    }
    return lmv::pipeline::load_config(j);
}

int fail_config(const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
}

struct WatchArgs {
    std::string config_path;
    std::string dir;
    std::int64_t interval_ms = -1;
    bool strict_magic = false;
    std::int64_t horizon_ms = -1;
};

int cmd_watch(const WatchArgs& args) {
    try {
        auto cfg = load_config_file(args.config_path);
        if (!args.dir.empty()) cfg.monitor.directory = args.dir;
        if (args.interval_ms >= 0) cfg.monitor.interval_ms = args.interval_ms;
        if (args.strict_magic) cfg.monitor.strict_magic = true;
        if (args.horizon_ms >= 0) cfg.monitor.horizon_ms = args.horizon_ms;
        lmv::pipeline::validate_config(cfg);
        if (cfg.monitor.directory.empty())
            throw lmv::ConfigError("monitor.directory", "must not be empty");
        install_signal_handlers();
        lmv::adapters::AdapterRuntime runtime;
        lmv::store::Store store(cfg.output_dir, cfg.audit);
        lmv::pipeline::run_loop(cfg, runtime, store, &g_stop);
        return 0;
    } catch (const lmv::ConfigError& e) {
        return fail_config(e);
    } catch (const std::exception& e) {
        return fail_config(e);
    }
}

int cmd_process(const std::string& config_path, const std::string& file,
                bool strict_magic) {
    lmv::pipeline::PipelineConfig cfg;
    try {
        cfg = load_config_file(config_path);
    } catch (const std::exception& e) {
        return fail_config(e);
    }
    auto bytes = lmv::read_file(file);
    if (!bytes) {
        std::fprintf(stderr, "error: cannot read \"%s\"\n", file.c_str());
        return 2;
    }
    if (!lmv::watch::is_valid_image(file, strict_magic || cfg.monitor.strict_magic)) {
        std::fprintf(stderr, "error: \"%s\" is not a valid image\n", file.c_str());
        return 4;
    }
    lmv::DocumentFile doc;
    doc.id = lmv::sha256_hex(*bytes);
    doc.path = file;
    doc.detected_at = lmv::wall_clock_ms();
    auto dot = file.find_last_of('.');
    doc.media_type = *lmv::media_type_from_extension(file.substr(dot + 1));

    lmv::adapters::AdapterRuntime runtime;
    lmv::store::Store store(cfg.output_dir, cfg.audit);
    auto result = lmv::pipeline::process_document(doc, cfg, runtime, store);
    switch (result.status) {
        case lmv::pipeline::PipelineResult::Status::ok:
            std::fputs((lmv::canon::render(result.outcome->fields) + "\n").c_str(), stdout);
            return 0;
        case lmv::pipeline::PipelineResult::Status::skipped_existing: {
            auto existing = lmv::read_file(store.final_path(doc.id));
            if (existing) std::fputs(existing->c_str(), stdout);
            return 0;
        }
        default:
            std::fprintf(stderr, "error: %s: %s\n",
                         lmv::pipeline::to_string(result.status),
                         result.failure_reason.c_str());
            return 3;
    }
}

struct VoteArgs {
    std::vector<std::string> files;
    int min_ballots = 3;
    std::string granularity = "field";
    std::string tie_break = "priority";
    std::string quorum = "majority";
};

int cmd_vote(const VoteArgs& args) {
    lmv::VotingConfig voting;
    try {
        voting.granularity = lmv::granularity_from_string(args.granularity);
        voting.tie_break = lmv::tie_break_from_string(args.tie_break);
        voting.min_ballots = args.min_ballots;
        if (args.quorum == "majority") {
            voting.inclusion_quorum = lmv::QuorumRule{true, 0};
        } else {
            int k = std::stoi(args.quorum);
            if (k < 1) throw std::invalid_argument("fixed quorum must be >= 1");
            voting.inclusion_quorum = lmv::QuorumRule{false, k};
        }
        if (voting.min_ballots < 1) throw std::invalid_argument("min ballots must be >= 1");
    } catch (const std::exception& e) {
        return fail_config(e);
    }

    if (static_cast<int>(args.files.size()) < voting.min_ballots) {
        std::fprintf(stderr, "error: %zu ballot file(s), need at least %d\n", args.files.size(),
                     voting.min_ballots);
        return 3;
    }

    std::vector<lmv::Ballot> ballots;
    lmv::PriorityTable priorities;
    priorities.structurer_priority["s"] = 1;
    for (std::size_t i = 0; i < args.files.size(); ++i) {
        auto content = lmv::read_file(args.files[i]);
        if (!content) {
            std::fprintf(stderr, "error: cannot read ballot \"%s\"\n", args.files[i].c_str());
            return 2;
        }
        lmv::Ballot b;
        b.document_id = "cli";
        b.engine_id = "file" + std::to_string(i + 1);
        b.structurer_id = "s";
        b.raw_json = *content;
        try {
            b.fields = lmv::canon::canonicalize(*content);
        } catch (const lmv::CanonError& e) {
            std::fprintf(stderr, "error: ballot \"%s\": %s\n", args.files[i].c_str(), e.what());
            return 2;
        }
        b.status = lmv::CallStatus::okay();
        ballots.push_back(std::move(b));
        priorities.engine_priority["file" + std::to_string(i + 1)] = static_cast<int>(i + 1);
    }
    try {
        auto outcome = lmv::vote::majority_vote(ballots, voting, priorities,
                                                static_cast<int>(ballots.size()));
        std::fputs((lmv::canon::render(outcome.fields) + "\n").c_str(), stdout);
        std::fputs(lmv::vote::explain(outcome).c_str(), stderr);
        return 0;
    } catch (const lmv::VoteError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.code() == lmv::VoteError::Code::insufficient_ballots ? 3 : 2;
    }
}

int cmd_bench(const std::string& spec_path) {
    auto content = lmv::read_file(spec_path);
    if (!content) {
        std::fprintf(stderr, "error: cannot read spec \"%s\"\n", spec_path.c_str());
        return 2;
    }
    try {
        json j = json::parse(*content);
        auto spec = lmv::bench::load_spec(j);
        auto report = lmv::bench::run_benchmark(spec);
        std::fputs((report.to_json().dump(2) + "\n").c_str(), stdout);
        std::fprintf(stderr, "reports written under %s\n", spec.output_dir.c_str());
        return 0;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "error: spec \"%s\" is not valid JSON: %s\n", spec_path.c_str(),
                     e.what());
        return 2;
    } catch (const lmv::BenchError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

int cmd_report(const std::string& config_path, std::string records, std::string out) {
    try {
        if (records.empty()) {
            if (config_path.empty())
                throw lmv::ConfigError("(usage)", "report needs --records or --config");
            auto cfg = load_config_file(config_path);
            records = cfg.output_dir + "/records.jsonl";
            if (out.empty()) out = cfg.output_dir + "/report.md";
        }
        if (out.empty()) out = "report.md";
        auto path = lmv::store::render_report(records, out);
        std::fputs((path + "\n").c_str(), stdout);
        return 0;
    } catch (const lmv::StoreError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        return fail_config(e);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"majority-vote document extraction pipeline"};
    app.require_subcommand(1);

    std::string log_level = "info";
    app.add_option("--log-level", log_level, "debug|info|warn|error")->capture_default_str();

    std::string config_path;
    app.add_option("--config", config_path, "pipeline config JSON (env: LMV_CONFIG)")
        ->envname("LMV_CONFIG");

    WatchArgs watch_args;
    auto* watch_cmd = app.add_subcommand("watch", "run the continuous monitoring loop");
    watch_cmd->add_option("--dir", watch_args.dir, "directory to monitor (overrides config)");
    watch_cmd->add_option("--interval-ms", watch_args.interval_ms, "polling interval override");
    watch_cmd->add_flag("--strict-magic", watch_args.strict_magic,
                        "require magic bytes to match the extension");
    watch_cmd->add_option("--horizon-ms", watch_args.horizon_ms,
                          "stop scanning after this many ms");

    std::string process_file;
    bool process_strict = false;
    auto* process_cmd = app.add_subcommand("process", "process one document and print the result");
    process_cmd->add_option("file", process_file, "document image")->required();
    process_cmd->add_flag("--strict-magic", process_strict,
                          "require magic bytes to match the extension");

    VoteArgs vote_args;
    auto* vote_cmd = app.add_subcommand("vote", "vote over standalone ballot JSON files");
    vote_cmd->add_option("files", vote_args.files, "ballot JSON files")->required();
    vote_cmd->add_option("--min-ballots", vote_args.min_ballots, "minimum ballots")
        ->capture_default_str();
    vote_cmd->add_option("--granularity", vote_args.granularity, "field|document")
        ->capture_default_str();
    vote_cmd->add_option("--tie-break", vote_args.tie_break, "priority|lexicographic")
        ->capture_default_str();
    vote_cmd->add_option("--quorum", vote_args.quorum, "majority or a fixed integer")
        ->capture_default_str();

    std::string bench_spec;
    auto* bench_cmd = app.add_subcommand("bench", "run the synthetic benchmark");
    bench_cmd->add_option("--spec", bench_spec, "benchmark spec JSON")->required();

    std::string report_records, report_out;
    auto* report_cmd = app.add_subcommand("report", "render report.md from records.jsonl");
    report_cmd->add_option("--records", report_records, "records.jsonl path");
    report_cmd->add_option("--out", report_out, "output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        lmv::log::set_level(lmv::log::level_from_string(log_level));
    } catch (const std::exception& e) {
        return fail_config(e);
    }

    if (watch_cmd->parsed()) {
        watch_args.config_path = config_path;
        if (config_path.empty()) {
            std::fprintf(stderr, "error: watch needs --config (or LMV_CONFIG)\n");
            return 2;
        }
        return cmd_watch(watch_args);
    }
    if (process_cmd->parsed()) {
        if (config_path.empty()) {
            std::fprintf(stderr, "error: process needs --config (or LMV_CONFIG)\n");
            return 2;
        }
        return cmd_process(config_path, process_file, process_strict);
    }
    if (vote_cmd->parsed()) return cmd_vote(vote_args);
    if (bench_cmd->parsed()) return cmd_bench(bench_spec);
    if (report_cmd->parsed()) return cmd_report(config_path, report_records, report_out);
    return 2;
}
