#pragma once

// Uniform clients for extraction engines and structurer backends.
//
// Wire contracts:
//   subprocess engine  argv = configured command + document path appended;
//                      stdout = UTF-8 text; exit 0 = success.
//   http engine        POST document bytes (application/octet-stream);
//                      200 with {"text": string} = success.
//   http structurer    POST {"text": string} (application/json);
//                      200 with {"json": object} = success. A "schema_hint"
//                      request field is reserved but unused.
//   mock engine        reads <ground_truth_dir>/<document_id>.truth.json and
//                      renders it as "key: value" lines after applying the
//                      seeded noise model.
//   mock structurer    parses "key: value" lines into a flat JSON object
//                      (lines without ":" ignored, later duplicates win),
//                      optionally applying its own noise model.
//
// No adapter call throws: every failure mode is encoded in the returned
// status so the pipeline can proceed with the surviving ballots.
//
// Determinism: all mock randomness derives from SplitMix64 streams keyed as
//   field_seed = mix(noise.seed ^ stream_key ^ fnv1a64(field_key))
// with stream_key = fnv1a64(document_id, backend label). Draw order per
// field: drop, value-error, wrong-value index (only when corrupted), rename.
// Wrong value i (1-based, uniform over error_value_space) is the truth text
// with "~i" appended, so the wrong-value space is shared across backends.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "lmv/model.hpp"

namespace lmv {

struct NoiseModel {
    double field_error_rate = 0.0;
    double drop_rate = 0.0;
    double rename_rate = 0.0;
    std::uint64_t error_value_space = 1;  // V distinct wrong values per field
    std::uint64_t seed = 0;
    // When set, the corruption stream is keyed by this label instead of the
    // backend id, so several backends can share one stream (correlated
    // noise presets).
    std::string stream_label;

    bool zero() const { return field_error_rate == 0 && drop_rate == 0 && rename_rate == 0; }
    bool operator==(const NoiseModel&) const = default;
};

struct MockEngineSpec {
    std::string ground_truth_dir;
    NoiseModel noise;
    std::int64_t latency_ms = 0;

    bool operator==(const MockEngineSpec&) const = default;
};

struct MockStructurerSpec {
    NoiseModel noise;
    std::int64_t latency_ms = 0;

    bool operator==(const MockStructurerSpec&) const = default;
};

void to_json(nlohmann::json& j, const NoiseModel& v);
void from_json(const nlohmann::json& j, NoiseModel& v);
void to_json(nlohmann::json& j, const MockEngineSpec& v);
void from_json(const nlohmann::json& j, MockEngineSpec& v);
void to_json(nlohmann::json& j, const MockStructurerSpec& v);
void from_json(const nlohmann::json& j, MockStructurerSpec& v);

namespace adapters {

using FlatRecord = std::vector<std::pair<std::string, std::string>>;

struct CorruptResult {
    std::string text;    // "key: value" lines, lexicographic by final key
    FlatRecord record;   // surviving (possibly renamed/corrupted) fields
};

// Deterministic given (noise.seed, stream_key); per-field decisions are
// independent of every other field.
CorruptResult corrupt_record(const FlatRecord& truth, const NoiseModel& noise,
                             std::uint64_t stream_key);

// Parse "key: value" lines (the mock structurer grammar).
FlatRecord parse_key_value_lines(const std::string& text);

// Shared state for adapter calls: per-backend rate gates and mock spec
// registry. Safe for concurrent use. Mock descriptors resolve their target
// first against specs registered in memory, then as a JSON file path.
class AdapterRuntime {
public:
    void register_mock_engine(const std::string& target, MockEngineSpec spec);
    void register_mock_structurer(const std::string& target, MockStructurerSpec spec);

    Extraction extract_text(const EngineDescriptor& engine, const DocumentFile& doc);
    Ballot structure_text(const StructurerDescriptor& structurer, const Extraction& extraction);

private:
    struct Gate {
        std::mutex mutex;
        std::chrono::steady_clock::time_point next_free{};
    };

    void rate_gate(const std::string& backend_id, std::int64_t delay_ms);
    const MockEngineSpec* resolve_engine_spec(const std::string& target, std::string& error);
    const MockStructurerSpec* resolve_structurer_spec(const std::string& target,
                                                      std::string& error);

    std::mutex mutex_;
    std::map<std::string, std::unique_ptr<Gate>> gates_;
    std::map<std::string, MockEngineSpec> engine_specs_;
    std::map<std::string, MockStructurerSpec> structurer_specs_;
};

}  // namespace adapters
}  // namespace lmv
