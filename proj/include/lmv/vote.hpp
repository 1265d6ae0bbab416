#pragma once

// Field-level plurality over canonical ballots with quorum-based key
// inclusion and deterministic tie-breaking.
//
// With n ok ballots the quorum kappa is floor(n/2)+1 (or a configured fixed
// k). A key path enters the consensus iff it appears in at least kappa
// ballots; its value is the plurality winner among the ballots that contain
// the path. Equal counts are broken either by backend priority (the
// candidate whose supporters include the smallest BallotWeight wins) or by
// lexicographically least canonical text.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmv/model.hpp"

namespace lmv {

class VoteError : public std::runtime_error {
public:
    enum class Code {
        insufficient_ballots,
        mixed_documents,
        invalid_ballot,
        unknown_backend,
    };

    VoteError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

// Tie-break weight of one ballot: engine_priority * 10 + structurer_priority.
// Unique per (engine, structurer) pair as long as descriptor priorities are
// unique and structurer priorities stay below 10 (enforced at config load).
struct BallotWeight {
    const Ballot* ballot = nullptr;
    int priority = 0;
};

struct PriorityTable {
    std::map<std::string, int> engine_priority;
    std::map<std::string, int> structurer_priority;

    static PriorityTable from_descriptors(std::span<const EngineDescriptor> engines,
                                          std::span<const StructurerDescriptor> structurers);

    int weight_of(const std::string& engine_id, const std::string& structurer_id) const;
};

namespace vote {

// `expected_ballots` is the configured total (engines x structurers); the
// outcome is flagged degraded when fewer ok ballots arrived. Pass 0 to mean
// "as many as given".
VoteOutcome majority_vote(std::span<const Ballot* const> ballots, const VotingConfig& cfg,
                          const PriorityTable& priorities, int expected_ballots = 0);

VoteOutcome majority_vote(const std::vector<Ballot>& ballots, const VotingConfig& cfg,
                          const PriorityTable& priorities, int expected_ballots = 0);

// Deterministic audit table: one row per path in the tally universe.
std::string explain(const VoteOutcome& outcome);

}  // namespace vote
}  // namespace lmv
