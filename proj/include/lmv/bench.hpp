#pragma once

// Synthetic-corpus benchmark harness: generates invoice-like ground truth
// with placeholder images, runs the full pipeline with mock backends under
// configurable noise, and scores the consensus outputs against the sidecar
// truths. An analytic oracle predicts field-level voting accuracy exactly
// for the independent-noise presets.
//
// bench_report.json is byte-deterministic for a given spec (measured wall
// clock appears only in bench_report.md; the JSON carries the modeled
// latency derived from the configured backend latencies).

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmv/adapters.hpp"

namespace lmv {

class BenchError : public std::runtime_error {
public:
    enum class Code { bad_spec, target_not_empty, corpus_missing, enumeration_too_large };

    BenchError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

namespace bench {

struct BenchConfigRow {
    std::string label;
    int engines = 1;
    int structurers = 1;
    bool voting = false;
    bool sequential = false;
};

struct LatencyModel {
    std::int64_t engine_ms = 0;
    std::int64_t structurer_ms = 0;
};

struct BenchSpec {
    int n_documents = 1;
    int fields_per_document = 10;
    std::vector<NoiseModel> engine_noise;  // one model per available engine
    NoiseModel structurer_noise;
    std::vector<BenchConfigRow> configurations;
    std::uint64_t seed = 0;
    LatencyModel latency;
    std::string corpus_dir;
    std::string output_dir;
};

BenchSpec load_spec(const nlohmann::json& j);
void validate_spec(const BenchSpec& spec);

struct BenchRow {
    BenchConfigRow config;
    int documents = 0;
    int failures = 0;
    std::int64_t fields_scored = 0;
    double field_accuracy = 0.0;
    double document_accuracy = 0.0;
    std::int64_t modeled_wall_clock_ms = 0;
    double measured_mean_wall_clock_ms = 0.0;  // md only, not in the JSON
    std::optional<double> oracle_accuracy;
};

struct BenchReport {
    std::uint64_t seed = 0;
    std::vector<BenchRow> rows;

    nlohmann::json to_json() const;  // deterministic
    std::string to_markdown() const;
};

// A minimal valid 1x1 PNG carrying `tag` in a tEXt chunk so content hashes
// differ per document.
std::string tiny_png(const std::string& tag);

// Writes n_documents placeholder images plus one truth sidecar per document
// id into spec.corpus_dir. The directory must be absent or empty. All truth
// values are JSON strings (that is what the key:value wire carries).
void generate_corpus(const BenchSpec& spec);

// Runs every configuration over the corpus (generating it when absent) and
// writes bench_report.json + bench_report.md under spec.output_dir.
BenchReport run_benchmark(const BenchSpec& spec);

enum class TieModel { against, for_, priority };

TieModel tie_model_from_string(std::string_view s);

// Exact probability that field-level plurality with quorum `kappa` returns
// the true value, for n independent ballots that are each correct with
// probability q and otherwise uniform over V shared wrong values. Ties are
// resolved per the model: "against" always loses, "for" always wins,
// "priority" wins an m-way tie with probability 1/m (exchangeable
// priorities).
double analytic_vote_accuracy(int n, double q, std::uint64_t v, int kappa,
                              TieModel tie_model = TieModel::priority);

}  // namespace bench
}  // namespace lmv
