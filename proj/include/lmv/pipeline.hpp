#pragma once

// End-to-end orchestration: consume detected documents, fan out to engines
// and structurers, vote, persist, report. Extraction runs one concurrent
// task per engine; each extraction that succeeds immediately fans out to
// every structurer (pipelined). A sequential reference mode runs every call
// one after another for latency comparisons.

#include <atomic>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmv/adapters.hpp"
#include "lmv/model.hpp"
#include "lmv/store.hpp"
#include "lmv/vote.hpp"

namespace lmv {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error("config field \"" + field + "\": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

namespace pipeline {

struct MonitorParams {
    std::string directory;
    std::int64_t interval_ms = 1000;
    bool strict_magic = false;
    std::int64_t settle_ms = 50;
    std::optional<std::int64_t> horizon_ms;  // absent = run forever
    int queue_capacity = 64;
};

struct PipelineConfig {
    std::vector<EngineDescriptor> engines;
    std::vector<StructurerDescriptor> structurers;
    VotingConfig voting;
    std::string output_dir;
    bool audit = true;
    MonitorParams monitor;
    int max_in_flight = 2;
    bool sequential = false;  // reference mode: no concurrency inside a document
};

// Parses the JSON form (field-for-field mirror of PipelineConfig) and
// validates every invariant; throws ConfigError naming the offending field.
PipelineConfig load_config(const nlohmann::json& j);
void validate_config(const PipelineConfig& cfg);
nlohmann::json config_to_json(const PipelineConfig& cfg);

struct PipelineResult {
    enum class Status { ok, insufficient_ballots, persistence_failure, skipped_existing };

    std::string document_id;
    Status status = Status::ok;
    std::string failure_reason;
    std::optional<VoteOutcome> outcome;
    std::vector<Extraction> extractions;
    std::vector<Ballot> ballots;  // every produced ballot, including failed ones
    std::int64_t extraction_span_ms = 0;
    std::int64_t structuring_span_ms = 0;
    std::int64_t vote_ms = 0;
    std::int64_t total_ms = 0;
};

const char* to_string(PipelineResult::Status s);

PipelineResult process_document(const DocumentFile& doc, const PipelineConfig& cfg,
                                adapters::AdapterRuntime& runtime, store::Store& store);

// Scan / enqueue / process until the horizon elapses or `stop` becomes
// true; queued and in-flight documents are drained before returning.
// Throws ConfigError on invalid configuration; every runtime failure is
// logged and survived.
std::vector<PipelineResult> run_loop(const PipelineConfig& cfg,
                                     adapters::AdapterRuntime& runtime, store::Store& store,
                                     const std::atomic<bool>* stop = nullptr);

}  // namespace pipeline
}  // namespace lmv
