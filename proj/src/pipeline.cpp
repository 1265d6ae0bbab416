#include "lmv/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <future>
#include <mutex>
#include <set>
#include <thread>

#include "lmv/log.hpp"
#include "lmv/watch.hpp"

namespace lmv::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

const char* to_string(PipelineResult::Status s) {
    switch (s) {
        case PipelineResult::Status::ok: return "ok";
        case PipelineResult::Status::insufficient_ballots: return "insufficient_ballots";
        case PipelineResult::Status::persistence_failure: return "persistence_failure";
        case PipelineResult::Status::skipped_existing: return "skipped_existing";
    }
    return "ok";
}

// --------------------------------------------------------------------------
// Configuration

PipelineConfig load_config(const json& j) {
    PipelineConfig cfg;
    try {
        if (j.contains("engines")) cfg.engines = j.at("engines").get<std::vector<EngineDescriptor>>();
        if (j.contains("structurers"))
            cfg.structurers = j.at("structurers").get<std::vector<StructurerDescriptor>>();
        if (j.contains("voting")) cfg.voting = j.at("voting").get<VotingConfig>();
        cfg.output_dir = j.value("output_dir", std::string{});
        cfg.audit = j.value("audit", true);
        if (j.contains("monitor")) {
            const auto& m = j.at("monitor");
            cfg.monitor.directory = m.value("directory", std::string{});
            cfg.monitor.interval_ms = m.value("interval_ms", std::int64_t{1000});
            cfg.monitor.strict_magic = m.value("strict_magic", false);
            cfg.monitor.settle_ms = m.value("settle_ms", std::int64_t{50});
            if (m.contains("horizon_ms") && !m.at("horizon_ms").is_null())
                cfg.monitor.horizon_ms = m.at("horizon_ms").get<std::int64_t>();
            cfg.monitor.queue_capacity = m.value("queue_capacity", 64);
        }
        cfg.max_in_flight = j.value("max_in_flight", 2);
        cfg.sequential = j.value("sequential", false);
    } catch (const json::exception& e) {
        throw ConfigError("(root)", e.what());
    }
    validate_config(cfg);
    return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
    json monitor{{"directory", cfg.monitor.directory},
                 {"interval_ms", cfg.monitor.interval_ms},
                 {"strict_magic", cfg.monitor.strict_magic},
                 {"settle_ms", cfg.monitor.settle_ms},
                 {"horizon_ms",
                  cfg.monitor.horizon_ms ? json(*cfg.monitor.horizon_ms) : json(nullptr)},
                 {"queue_capacity", cfg.monitor.queue_capacity}};
    return json{{"engines", cfg.engines},
                {"structurers", cfg.structurers},
                {"voting", cfg.voting},
                {"output_dir", cfg.output_dir},
                {"audit", cfg.audit},
                {"monitor", monitor},
                {"max_in_flight", cfg.max_in_flight},
                {"sequential", cfg.sequential}};
}

void validate_config(const PipelineConfig& cfg) {
    if (cfg.engines.empty()) throw ConfigError("engines", "at least one engine is required");
    if (cfg.structurers.empty())
        throw ConfigError("structurers", "at least one structurer is required");
    std::set<std::string> ids;
    std::set<int> prios;
    for (std::size_t i = 0; i < cfg.engines.size(); ++i) {
        const auto& e = cfg.engines[i];
        std::string field = "engines[" + std::to_string(i) + "]";
        if (e.engine_id.empty()) throw ConfigError(field + ".engine_id", "must not be empty");
        if (!ids.insert(e.engine_id).second)
            throw ConfigError(field + ".engine_id", "duplicate id \"" + e.engine_id + "\"");
        if (e.timeout_ms < 1) throw ConfigError(field + ".timeout_ms", "must be >= 1");
        if (e.priority < 1) throw ConfigError(field + ".priority", "must be >= 1");
        if (!prios.insert(e.priority).second)
            throw ConfigError(field + ".priority",
                              "duplicate priority " + std::to_string(e.priority));
        if (e.inter_call_delay_ms < 0)
            throw ConfigError(field + ".inter_call_delay_ms", "must be >= 0");
    }
    ids.clear();
    prios.clear();
    for (std::size_t i = 0; i < cfg.structurers.size(); ++i) {
        const auto& s = cfg.structurers[i];
        std::string field = "structurers[" + std::to_string(i) + "]";
        if (s.structurer_id.empty())
            throw ConfigError(field + ".structurer_id", "must not be empty");
        if (!ids.insert(s.structurer_id).second)
            throw ConfigError(field + ".structurer_id", "duplicate id \"" + s.structurer_id + "\"");
        if (s.timeout_ms < 1) throw ConfigError(field + ".timeout_ms", "must be >= 1");
        if (s.priority < 1 || s.priority > 9)
            throw ConfigError(field + ".priority",
                              "must be in [1, 9] so ballot weights stay unique");
        if (!prios.insert(s.priority).second)
            throw ConfigError(field + ".priority",
                              "duplicate priority " + std::to_string(s.priority));
    }
    if (cfg.voting.min_ballots < 1) throw ConfigError("voting.min_ballots", "must be >= 1");
    if (!cfg.voting.inclusion_quorum.majority && cfg.voting.inclusion_quorum.fixed_k < 1)
        throw ConfigError("voting.inclusion_quorum", "fixed quorum must be >= 1");
    if (cfg.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
    if (cfg.monitor.interval_ms < 1) throw ConfigError("monitor.interval_ms", "must be >= 1");
    if (cfg.monitor.settle_ms < 0) throw ConfigError("monitor.settle_ms", "must be >= 0");
    if (cfg.monitor.queue_capacity < 1)
        throw ConfigError("monitor.queue_capacity", "must be >= 1");
    if (cfg.monitor.horizon_ms && *cfg.monitor.horizon_ms < 0)
        throw ConfigError("monitor.horizon_ms", "must be >= 0");
    if (cfg.max_in_flight < 1) throw ConfigError("max_in_flight", "must be >= 1");
    if (!cfg.monitor.directory.empty()) {
        std::error_code ec;
        auto out = fs::weakly_canonical(cfg.output_dir, ec);
        auto mon = fs::weakly_canonical(cfg.monitor.directory, ec);
        if (out == mon)
            throw ConfigError("output_dir", "must differ from the monitored directory");
    }
}

// --------------------------------------------------------------------------
// process_document

namespace {

struct SpanTracker {
    std::mutex mutex;
    bool any = false;
    Clock::time_point first_start{};
    Clock::time_point last_end{};

    void record(Clock::time_point start, Clock::time_point end) {
        std::lock_guard lock(mutex);
        if (!any || start < first_start) first_start = start;
        if (!any || end > last_end) last_end = end;
        any = true;
    }

    std::int64_t span_ms() {
        std::lock_guard lock(mutex);
        if (!any) return 0;
        return std::chrono::duration_cast<std::chrono::milliseconds>(last_end - first_start)
            .count();
    }
};

}  // namespace

PipelineResult process_document(const DocumentFile& doc, const PipelineConfig& cfg,
                                adapters::AdapterRuntime& runtime, store::Store& store) {
    PipelineResult result;
    result.document_id = doc.id;
    auto t0 = Clock::now();

    if (store.final_exists(doc.id)) {
        result.status = PipelineResult::Status::skipped_existing;
        log::info("skipped_existing", doc.id, json{{"path", doc.path}});
        return result;
    }

    const int total_slots = static_cast<int>(cfg.engines.size() * cfg.structurers.size());
    SpanTracker extraction_span, structuring_span;

    auto timed_extract = [&](const EngineDescriptor& engine) {
        auto start = Clock::now();
        Extraction ex = runtime.extract_text(engine, doc);
        extraction_span.record(start, Clock::now());
        log::debug("extraction_done", doc.id,
                   json{{"engine", engine.engine_id}, {"status", to_string(ex.status.state)}});
        return ex;
    };
    auto timed_structure = [&](const StructurerDescriptor& structurer, const Extraction& ex) {
        auto start = Clock::now();
        Ballot b = runtime.structure_text(structurer, ex);
        structuring_span.record(start, Clock::now());
        log::debug("ballot_done", doc.id,
                   json{{"engine", b.engine_id},
                        {"structurer", b.structurer_id},
                        {"status", to_string(b.status.state)}});
        return b;
    };

    if (cfg.sequential) {
        for (const auto& engine : cfg.engines) result.extractions.push_back(timed_extract(engine));
        for (const auto& ex : result.extractions) {
            if (!ex.status.ok()) continue;
            for (const auto& structurer : cfg.structurers)
                result.ballots.push_back(timed_structure(structurer, ex));
        }
    } else {
        std::vector<std::shared_future<Extraction>> extraction_futures;
        extraction_futures.reserve(cfg.engines.size());
        for (const auto& engine : cfg.engines)
            extraction_futures.push_back(
                std::async(std::launch::async, [&, engine] { return timed_extract(engine); })
                    .share());
        std::vector<std::future<std::optional<Ballot>>> ballot_futures;
        for (std::size_t ei = 0; ei < cfg.engines.size(); ++ei) {
            for (const auto& structurer : cfg.structurers) {
                auto ex_future = extraction_futures[ei];
                ballot_futures.push_back(std::async(
                    std::launch::async, [&, ex_future, structurer]() -> std::optional<Ballot> {
                        const Extraction& ex = ex_future.get();
                        if (!ex.status.ok()) return std::nullopt;
                        return timed_structure(structurer, ex);
                    }));
            }
        }
        for (auto& f : extraction_futures) result.extractions.push_back(f.get());
        for (auto& f : ballot_futures) {
            auto ballot = f.get();
            if (ballot) result.ballots.push_back(std::move(*ballot));
        }
    }

    result.extraction_span_ms = extraction_span.span_ms();
    result.structuring_span_ms = structuring_span.span_ms();

    std::vector<const Ballot*> ok_ballots;
    for (const auto& b : result.ballots)
        if (b.status.ok()) ok_ballots.push_back(&b);

    store::PersistInfo info;
    info.ballots_ok = static_cast<int>(ok_ballots.size());
    info.ballots_total = total_slots;

    if (static_cast<int>(ok_ballots.size()) < cfg.voting.min_ballots) {
        result.status = PipelineResult::Status::insufficient_ballots;
        result.failure_reason = std::to_string(ok_ballots.size()) + " ok ballots, need " +
                                std::to_string(cfg.voting.min_ballots);
        result.total_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
        info.wall_clock_ms = result.total_ms;
        try {
            store.persist_failure(doc.id, "insufficient_ballots: " + result.failure_reason, info);
        } catch (const std::exception& e) {
            log::error("persist_failed", doc.id, json{{"error", e.what()}});
        }
        log::warn("doc_failed", doc.id, json{{"reason", result.failure_reason}});
        return result;
    }

    auto vote_start = Clock::now();
    PriorityTable priorities = PriorityTable::from_descriptors(cfg.engines, cfg.structurers);
    VoteOutcome outcome = vote::majority_vote(std::span<const Ballot* const>(ok_ballots),
                                              cfg.voting, priorities, total_slots);
    result.vote_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - vote_start).count();
    log::info("vote_done", doc.id,
              json{{"included_paths", outcome.fields.size()},
                   {"n_ballots", outcome.n_ballots},
                   {"degraded", outcome.degraded},
                   {"ties", outcome.tie_broken_paths.size()}});

    result.total_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
    info.wall_clock_ms = result.total_ms;
    try {
        store.persist(outcome, result.ballots, info);
    } catch (const std::exception& e) {
        result.status = PipelineResult::Status::persistence_failure;
        result.failure_reason = e.what();
        result.outcome = std::move(outcome);
        log::error("persist_failed", doc.id, json{{"error", e.what()}});
        return result;
    }
    result.outcome = std::move(outcome);
    result.total_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
    log::info("persisted", doc.id, json{{"final_path", store.final_path(doc.id)}});
    return result;
}

// --------------------------------------------------------------------------
// run_loop

namespace {

class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

    // Blocks while full. Returns false when the queue was closed or `stop`
    // went true while waiting.
    bool push(DocumentFile doc, const std::atomic<bool>* stop) {
        std::unique_lock lock(mutex_);
        while (items_.size() >= capacity_ && !closed_) {
            if (stop && stop->load()) return false;
            not_full_.wait_for(lock, std::chrono::milliseconds(50));
        }
        if (closed_) return false;
        items_.push_back(std::move(doc));
        not_empty_.notify_one();
        return true;
    }

    // Blocks while empty and not closed. Returns false when drained + closed.
    bool pop(DocumentFile& out) {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return false;
        out = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return true;
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

private:
    std::mutex mutex_;
    std::condition_variable not_empty_, not_full_;
    std::deque<DocumentFile> items_;
    std::size_t capacity_;
    bool closed_ = false;
};

void interruptible_sleep(std::int64_t ms, const std::atomic<bool>* stop) {
    auto deadline = Clock::now() + std::chrono::milliseconds(ms);
    while (Clock::now() < deadline) {
        if (stop && stop->load()) return;
        auto remain =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        std::this_thread::sleep_for(
            std::min<std::chrono::milliseconds>(remain, std::chrono::milliseconds(50)));
    }
}

}  // namespace

std::vector<PipelineResult> run_loop(const PipelineConfig& cfg,
                                     adapters::AdapterRuntime& runtime, store::Store& store,
                                     const std::atomic<bool>* stop) {
    validate_config(cfg);
    if (cfg.monitor.directory.empty())
        throw ConfigError("monitor.directory", "must not be empty");
    {
        std::error_code ec;
        if (!fs::is_directory(cfg.monitor.directory, ec) || ec)
            throw ConfigError("monitor.directory",
                              "\"" + cfg.monitor.directory + "\" is not a readable directory");
    }

    BoundedQueue queue(static_cast<std::size_t>(cfg.monitor.queue_capacity));
    std::vector<PipelineResult> results;
    std::mutex results_mutex;

    log::info("loop_started", {},
              json{{"directory", cfg.monitor.directory},
                   {"interval_ms", cfg.monitor.interval_ms},
                   {"engines", cfg.engines.size()},
                   {"structurers", cfg.structurers.size()}});

    std::thread watcher([&] {
        MonitorState state;
        state.directory = cfg.monitor.directory;
        state.interval_ms = cfg.monitor.interval_ms;
        state.horizon_ms = cfg.monitor.horizon_ms;
        watch::ScanOptions options{cfg.monitor.strict_magic, cfg.monitor.settle_ms};
        auto started = Clock::now();
        auto horizon_reached = [&] {
            return state.horizon_ms &&
                   std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started)
                           .count() >= *state.horizon_ms;
        };
        while (!(stop && stop->load()) && !horizon_reached()) {
            try {
                auto scan_result = watch::scan(state, options);
                state = std::move(scan_result.next_state);
                for (const auto& path : scan_result.ignored_non_images)
                    log::info("ignored_non_image", {}, json{{"path", path}});
                for (auto& doc : scan_result.new_documents) {
                    log::info("detected", doc.id, json{{"path", doc.path}});
                    if (!queue.push(std::move(doc), stop)) break;
                }
            } catch (const WatchError& e) {
                log::warn("scan_error", {}, json{{"error", e.what()}});
            }
            interruptible_sleep(cfg.monitor.interval_ms, stop);
        }
        queue.close();
    });

    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(cfg.max_in_flight));
    for (int w = 0; w < cfg.max_in_flight; ++w) {
        workers.emplace_back([&] {
            DocumentFile doc;
            while (queue.pop(doc)) {
                PipelineResult r;
                try {
                    r = process_document(doc, cfg, runtime, store);
                } catch (const std::exception& e) {
                    r.document_id = doc.id;
                    r.status = PipelineResult::Status::persistence_failure;
                    r.failure_reason = e.what();
                    log::error("doc_failed", doc.id, json{{"error", e.what()}});
                }
                std::lock_guard lock(results_mutex);
                results.push_back(std::move(r));
            }
        });
    }

    watcher.join();
    for (auto& w : workers) w.join();
    log::info("shutdown", {}, json{{"results", results.size()}});
    return results;
}

}  // namespace lmv::pipeline
