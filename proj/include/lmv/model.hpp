#pragma once

// Domain types shared by every stage of the pipeline. All values are
// immutable once constructed and safe to copy across threads. The canonical
// serialized form of each type is a JSON object with snake_case field names;
// that form is what lands in the audit log and the record store.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmv/canon.hpp"

namespace lmv {

enum class MediaType { png, jpeg, tiff, bmp };

const char* to_string(MediaType t);
MediaType media_type_from_string(std::string_view s);

// Maps a filename extension (without dot, any case) to its media kind.
std::optional<MediaType> media_type_from_extension(std::string_view ext);

struct DocumentFile {
    std::string id;       // lowercase hex SHA-256 of the file bytes at detection
    std::string path;
    std::int64_t detected_at = 0;  // wall clock, ms since epoch
    MediaType media_type = MediaType::png;

    bool operator==(const DocumentFile&) const = default;
};

struct MonitorState {
    std::string directory;
    std::int64_t interval_ms = 1000;
    std::map<std::string, std::string> known_files;  // path -> content hash
    std::optional<std::int64_t> horizon_ms;          // absent = run forever

    bool operator==(const MonitorState&) const = default;
};

enum class BackendKind { subprocess, http, mock };

const char* to_string(BackendKind k);
BackendKind backend_kind_from_string(std::string_view s);

struct EngineDescriptor {
    std::string engine_id;
    BackendKind kind = BackendKind::mock;
    std::string target;  // command line, URL, or mock spec reference
    std::int64_t timeout_ms = 30000;
    int priority = 1;    // unique among engines, 1 = highest
    std::int64_t inter_call_delay_ms = 0;

    bool operator==(const EngineDescriptor&) const = default;
};

struct StructurerDescriptor {
    std::string structurer_id;
    BackendKind kind = BackendKind::mock;
    std::string target;
    std::int64_t timeout_ms = 30000;
    int priority = 1;

    bool operator==(const StructurerDescriptor&) const = default;
};

enum class CallState { ok, timeout, failed, invalid_json };

const char* to_string(CallState s);
CallState call_state_from_string(std::string_view s);

struct CallStatus {
    CallState state = CallState::ok;
    std::string reason;  // set for failed / invalid_json

    bool ok() const { return state == CallState::ok; }
    static CallStatus okay() { return {CallState::ok, {}}; }
    static CallStatus timeout() { return {CallState::timeout, {}}; }
    static CallStatus failed(std::string reason) { return {CallState::failed, std::move(reason)}; }
    static CallStatus invalid(std::string reason) {
        return {CallState::invalid_json, std::move(reason)};
    }

    bool operator==(const CallStatus&) const = default;
};

struct Extraction {
    std::string document_id;
    std::string engine_id;
    std::string text;
    std::int64_t latency_ms = 0;
    CallStatus status;

    bool operator==(const Extraction&) const = default;
};

struct Ballot {
    std::string document_id;
    std::string engine_id;
    std::string structurer_id;
    std::string raw_json;
    CanonicalFieldMap fields;
    std::int64_t latency_ms = 0;
    CallStatus status;

    bool operator==(const Ballot&) const = default;
};

struct VoteCandidateTally {
    CanonValue value;
    int count = 0;
    std::int64_t sum_of_priorities = 0;

    bool operator==(const VoteCandidateTally&) const = default;
};

enum class Granularity { field, document };
enum class TieBreak { priority, lexicographic };

struct VoteOutcome {
    std::string document_id;
    CanonicalFieldMap fields;
    std::map<KeyPath, std::vector<VoteCandidateTally>> tallies;
    int n_ballots = 0;
    int quorum = 0;
    std::set<KeyPath> tie_broken_paths;
    Granularity granularity = Granularity::field;
    TieBreak tie_break = TieBreak::priority;  // rule that resolved the ties
    bool degraded = false;

    bool operator==(const VoteOutcome&) const = default;
};

const char* to_string(Granularity g);
Granularity granularity_from_string(std::string_view s);
const char* to_string(TieBreak t);
TieBreak tie_break_from_string(std::string_view s);

struct QuorumRule {
    bool majority = true;  // floor(n/2)+1 over ok ballots
    int fixed_k = 0;       // used when !majority; must be >= 1

    int threshold(int n_ballots) const { return majority ? n_ballots / 2 + 1 : fixed_k; }
    bool operator==(const QuorumRule&) const = default;
};

struct VotingConfig {
    Granularity granularity = Granularity::field;
    QuorumRule inclusion_quorum;
    TieBreak tie_break = TieBreak::priority;
    int min_ballots = 3;

    bool operator==(const VotingConfig&) const = default;
};

// JSON serialization (nlohmann ADL hooks).
void to_json(nlohmann::json& j, const DocumentFile& v);
void from_json(const nlohmann::json& j, DocumentFile& v);
void to_json(nlohmann::json& j, const MonitorState& v);
void from_json(const nlohmann::json& j, MonitorState& v);
void to_json(nlohmann::json& j, const EngineDescriptor& v);
void from_json(const nlohmann::json& j, EngineDescriptor& v);
void to_json(nlohmann::json& j, const StructurerDescriptor& v);
void from_json(const nlohmann::json& j, StructurerDescriptor& v);
void to_json(nlohmann::json& j, const CallStatus& v);
void from_json(const nlohmann::json& j, CallStatus& v);
void to_json(nlohmann::json& j, const Extraction& v);
void from_json(const nlohmann::json& j, Extraction& v);
void to_json(nlohmann::json& j, const Ballot& v);
void from_json(const nlohmann::json& j, Ballot& v);
void to_json(nlohmann::json& j, const VoteOutcome& v);
void from_json(const nlohmann::json& j, VoteOutcome& v);
void to_json(nlohmann::json& j, const VotingConfig& v);
void from_json(const nlohmann::json& j, VotingConfig& v);
void to_json(nlohmann::json& j, const CanonValue& v);
void from_json(const nlohmann::json& j, CanonValue& v);

nlohmann::json field_map_to_json(const CanonicalFieldMap& fields);
CanonicalFieldMap field_map_from_json(const nlohmann::json& j);

std::int64_t wall_clock_ms();

}  // namespace lmv
