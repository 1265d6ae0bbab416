#include "lmv/vote.hpp"

#include <algorithm>
#include <climits>
#include <set>
#include <sstream>

namespace lmv {

PriorityTable PriorityTable::from_descriptors(std::span<const EngineDescriptor> engines,
                                              std::span<const StructurerDescriptor> structurers) {
    PriorityTable t;
    for (const auto& e : engines) t.engine_priority[e.engine_id] = e.priority;
    for (const auto& s : structurers) t.structurer_priority[s.structurer_id] = s.priority;
    return t;
}

int PriorityTable::weight_of(const std::string& engine_id, const std::string& structurer_id) const {
    auto e = engine_priority.find(engine_id);
    auto s = structurer_priority.find(structurer_id);
    if (e == engine_priority.end())
        throw VoteError(VoteError::Code::unknown_backend, "no priority for engine \"" + engine_id + "\"");
    if (s == structurer_priority.end())
        throw VoteError(VoteError::Code::unknown_backend,
                        "no priority for structurer \"" + structurer_id + "\"");
    return e->second * 10 + s->second;
}

namespace vote {

namespace {

struct Agg {
    int count = 0;
    std::int64_t sum = 0;
    int min_prio = INT_MAX;
};

struct CandidateRow {
    CanonValue value;
    Agg agg;
};

bool value_less(const CanonValue& a, const CanonValue& b) { return a < b; }

// Deterministic tally order: count desc, best (smallest) priority asc,
// canonical text asc.
void sort_rows(std::vector<CandidateRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const CandidateRow& a, const CandidateRow& b) {
        if (a.agg.count != b.agg.count) return a.agg.count > b.agg.count;
        if (a.agg.min_prio != b.agg.min_prio) return a.agg.min_prio < b.agg.min_prio;
        return value_less(a.value, b.value);
    });
}

// Winner among the max-count rows under the configured tie rule. Returns
// the index into `rows` (already sorted) and sets `tied`.
std::size_t select_winner(const std::vector<CandidateRow>& rows, TieBreak tie_break, bool& tied) {
    int max_count = rows.front().agg.count;
    std::size_t n_max = 1;
    while (n_max < rows.size() && rows[n_max].agg.count == max_count) ++n_max;
    tied = n_max > 1;
    if (!tied || tie_break == TieBreak::priority) return 0;  // sorted by min_prio already
    std::size_t best = 0;
    for (std::size_t i = 1; i < n_max; ++i)
        if (value_less(rows[i].value, rows[best].value)) best = i;
    return best;
}

}  // namespace

VoteOutcome majority_vote(std::span<const Ballot* const> ballots, const VotingConfig& cfg,
                          const PriorityTable& priorities, int expected_ballots) {
    const int n = static_cast<int>(ballots.size());
    if (n == 0 || n < cfg.min_ballots)
        throw VoteError(VoteError::Code::insufficient_ballots,
                        std::to_string(n) + " ballots, need at least " +
                            std::to_string(std::max(1, cfg.min_ballots)));
    const std::string& doc = ballots[0]->document_id;
    std::set<std::pair<std::string, std::string>> seen_pairs;
    std::vector<int> weight(ballots.size());
    for (std::size_t i = 0; i < ballots.size(); ++i) {
        const Ballot* b = ballots[i];
        if (!b->status.ok())
            throw VoteError(VoteError::Code::invalid_ballot,
                            "ballot " + b->engine_id + "/" + b->structurer_id + " has status " +
                                std::string(to_string(b->status.state)));
        if (b->document_id != doc)
            throw VoteError(VoteError::Code::mixed_documents,
                            "ballots span documents \"" + doc + "\" and \"" + b->document_id + "\"");
        if (!seen_pairs.emplace(b->engine_id, b->structurer_id).second)
            throw VoteError(VoteError::Code::invalid_ballot,
                            "duplicate ballot for (" + b->engine_id + ", " + b->structurer_id + ")");
        weight[i] = priorities.weight_of(b->engine_id, b->structurer_id);
    }

    VoteOutcome out;
    out.document_id = doc;
    out.n_ballots = n;
    out.quorum = cfg.inclusion_quorum.threshold(n);
    out.granularity = cfg.granularity;
    out.tie_break = cfg.tie_break;
    out.degraded = expected_ballots > 0 && n < expected_ballots;

    // Per-path, per-value tally over all ballots; this universe U also
    // backs document-level selection below.
    std::map<KeyPath, std::map<CanonValue, Agg>> tally;
    for (std::size_t i = 0; i < ballots.size(); ++i) {
        for (const auto& [path, value] : ballots[i]->fields) {
            Agg& a = tally[path][value];
            a.count += 1;
            a.sum += weight[i];
            a.min_prio = std::min(a.min_prio, weight[i]);
        }
    }

    for (auto& [path, values] : tally) {
        std::vector<CandidateRow> rows;
        rows.reserve(values.size());
        int presence = 0;
        for (auto& [value, agg] : values) {
            presence += agg.count;
            rows.push_back(CandidateRow{value, agg});
        }
        sort_rows(rows);
        if (cfg.granularity == Granularity::field && presence >= out.quorum) {
            bool tied = false;
            std::size_t win = select_winner(rows, cfg.tie_break, tied);
            if (tied) out.tie_broken_paths.insert(path);
            out.fields.emplace(path, rows[win].value);
        }
        std::vector<VoteCandidateTally> list;
        list.reserve(rows.size());
        for (const auto& r : rows)
            list.push_back(VoteCandidateTally{r.value, r.agg.count, r.agg.sum});
        out.tallies.emplace(path, std::move(list));
    }

    if (cfg.granularity == Granularity::document) {
        // Plurality over whole field maps; the winning map is adopted
        // verbatim (no quorum filter applies to its keys).
        std::map<CanonicalFieldMap, Agg> candidates;
        for (std::size_t i = 0; i < ballots.size(); ++i) {
            Agg& a = candidates[ballots[i]->fields];
            a.count += 1;
            a.sum += weight[i];
            a.min_prio = std::min(a.min_prio, weight[i]);
        }
        std::vector<std::pair<const CanonicalFieldMap*, Agg>> rows;
        for (auto& [fields, agg] : candidates) rows.emplace_back(&fields, agg);
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            if (a.second.count != b.second.count) return a.second.count > b.second.count;
            if (a.second.min_prio != b.second.min_prio) return a.second.min_prio < b.second.min_prio;
            return *a.first < *b.first;
        });
        int max_count = rows.front().second.count;
        std::size_t n_max = 1;
        while (n_max < rows.size() && rows[n_max].second.count == max_count) ++n_max;
        std::size_t win = 0;
        if (n_max > 1 && cfg.tie_break == TieBreak::lexicographic) {
            for (std::size_t i = 1; i < n_max; ++i)
                if (*rows[i].first < *rows[win].first) win = i;
        }
        out.fields = *rows[win].first;
        if (n_max > 1) {
            // Audit which paths the tied candidates actually disagreed on.
            for (std::size_t i = 0; i < n_max; ++i) {
                for (std::size_t k = i + 1; k < n_max; ++k) {
                    const auto& a = *rows[i].first;
                    const auto& b = *rows[k].first;
                    for (const auto& [p, v] : a) {
                        auto it = b.find(p);
                        if (it == b.end() || !(it->second == v)) out.tie_broken_paths.insert(p);
                    }
                    for (const auto& [p, v] : b)
                        if (!a.contains(p)) out.tie_broken_paths.insert(p);
                }
            }
        }
    }
    return out;
}

VoteOutcome majority_vote(const std::vector<Ballot>& ballots, const VotingConfig& cfg,
                          const PriorityTable& priorities, int expected_ballots) {
    std::vector<const Ballot*> ptrs;
    ptrs.reserve(ballots.size());
    for (const auto& b : ballots) ptrs.push_back(&b);
    return majority_vote(std::span<const Ballot* const>(ptrs), cfg, priorities, expected_ballots);
}

std::string explain(const VoteOutcome& outcome) {
    std::ostringstream os;
    os << "document " << outcome.document_id << ": " << outcome.n_ballots << " ballots, quorum "
       << outcome.quorum << ", " << outcome.tie_broken_paths.size() << " tie(s), degraded="
       << (outcome.degraded ? "true" : "false") << "\n";
    os << "path\tstatus\twinner\tcandidates\n";
    const char* tie_tag =
        outcome.tie_break == TieBreak::priority ? "tie→priority" : "tie→lexicographic";
    for (const auto& [path, cands] : outcome.tallies) {
        os << path.rendered() << "\t";
        auto win = outcome.fields.find(path);
        bool included = win != outcome.fields.end();
        bool tied = outcome.tie_broken_paths.contains(path);
        if (included) {
            os << "ok";
            if (tied) os << " (" << tie_tag << ")";
        } else if (outcome.granularity == Granularity::field) {
            os << "below quorum " << outcome.quorum << "/" << outcome.n_ballots;
            if (tied) os << " (" << tie_tag << ")";
        } else {
            os << "not in winning ballot";
            if (tied) os << " (" << tie_tag << ")";
        }
        os << "\t" << (included ? win->second.json_text() : std::string("-")) << "\t";
        bool first = true;
        for (const auto& c : cands) {
            if (!first) os << " | ";
            first = false;
            os << c.value.json_text() << " x" << c.count << " (prio " << c.sum_of_priorities << ")";
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace vote
}  // namespace lmv
