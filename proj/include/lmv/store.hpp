#pragma once

// Persistence of consensus outputs, ballots, and audit trails, plus the
// per-run report. Layout under output_dir:
//
//   final/<document_id>.json          rendered consensus (atomic write)
//   records.jsonl                     append-only, one record per document
//   audit/<document_id>/ballot_<engine>_<structurer>.json
//   audit/<document_id>/vote_explain.txt
//   report.md                         written by render_report
//
// records.jsonl line schema (snake_case):
//   kind            "ok" | "failed"
//   document_id, completed_at, wall_clock_ms, ballots_ok, ballots_total
//   ok lines add:   included_paths, n_ballots, degraded, ties, final_path
//   failed lines:   reason

#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmv/model.hpp"
#include "lmv/vote.hpp"

namespace lmv {

class StoreError : public std::runtime_error {
public:
    enum class Code { persistence_failure, report_failure };

    StoreError(Code code, const std::string& what, int line = 0)
        : std::runtime_error(what), code_(code), line_(line) {}
    Code code() const { return code_; }
    int line() const { return line_; }  // 1-based offending line for report failures

private:
    Code code_;
    int line_;
};

namespace store {

struct StoredPaths {
    std::string final_path;
    std::string record_path;
    std::optional<std::string> audit_dir;
};

struct PersistInfo {
    std::int64_t wall_clock_ms = 0;
    int ballots_ok = 0;
    int ballots_total = 0;
};

class Store {
public:
    Store(std::string output_dir, bool audit);

    const std::string& output_dir() const { return output_dir_; }
    bool audit() const { return audit_; }

    std::string final_path(const std::string& document_id) const;
    bool final_exists(const std::string& document_id) const;

    // Writes the consensus JSON, appends the record line, and (when audit is
    // on) the ballots and vote explanation. Throws StoreError with temp
    // files cleaned up on failure.
    StoredPaths persist(const VoteOutcome& outcome, const std::vector<Ballot>& ballots,
                        const PersistInfo& info);

    // Appends a kind="failed" record line; the audit failure detail is
    // written only when audit is on.
    void persist_failure(const std::string& document_id, const std::string& reason,
                         const PersistInfo& info);

private:
    void append_record(const nlohmann::json& line);

    std::string output_dir_;
    bool audit_;
    std::mutex mutex_;  // single store gate: all writes serialize here
};

// Renders report.md from records.jsonl; returns the report path. Throws
// StoreError::report_failure naming the offending line on unparseable input.
std::string render_report(const std::string& records_path, const std::string& output_path);

}  // namespace store
}  // namespace lmv
