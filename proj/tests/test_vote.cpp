#include <doctest.h>

#include <algorithm>
#include <climits>
#include <map>
#include <random>
#include <set>

#include "lmv/rng.hpp"
#include "lmv/vote.hpp"

using namespace lmv;

namespace {

// Fixture backends: engines e1..e8 (priority 1..8), structurers s1, s2
// (priority 1, 2). BallotWeight = engine*10 + structurer.
PriorityTable fixture_priorities() {
    PriorityTable t;
    for (int i = 1; i <= 8; ++i) t.engine_priority["e" + std::to_string(i)] = i;
    t.structurer_priority["s1"] = 1;
    t.structurer_priority["s2"] = 2;
    return t;
}

Ballot make_ballot(const std::string& engine, const std::string& structurer,
                   const std::vector<std::pair<std::string, std::string>>& fields,
                   const std::string& doc = "doc-1") {
    Ballot b;
    b.document_id = doc;
    b.engine_id = engine;
    b.structurer_id = structurer;
    b.status = CallStatus::okay();
    for (const auto& [path, text] : fields)
        b.fields.emplace(KeyPath::parse(path), CanonValue{CanonValue::Kind::string, text});
    return b;
}

// The 8 (engine, structurer) slots of the 4x2 fixture in a fixed order.
std::vector<std::pair<std::string, std::string>> slots8() {
    std::vector<std::pair<std::string, std::string>> v;
    for (int e = 1; e <= 4; ++e)
        for (int s = 1; s <= 2; ++s)
            v.emplace_back("e" + std::to_string(e), "s" + std::to_string(s));
    return v;
}

// ---------------------------------------------------------------------------
// Independent brute-force tally oracle. Written against the contract, not
// the implementation: nested loops over paths/values, no shared helpers.

struct OracleOutcome {
    std::map<std::string, std::string> fields;  // rendered path -> winning text
    std::map<std::string, std::map<std::string, int>> counts;
    std::set<std::string> ties;
};

OracleOutcome oracle_vote(const std::vector<Ballot>& ballots, const PriorityTable& prio,
                          int quorum_override = 0, bool lexicographic = false) {
    OracleOutcome out;
    int n = static_cast<int>(ballots.size());
    int kappa = quorum_override > 0 ? quorum_override : n / 2 + 1;

    std::vector<std::string> paths;
    for (const auto& b : ballots)
        for (const auto& [p, v] : b.fields)
            if (std::find(paths.begin(), paths.end(), p.rendered()) == paths.end())
                paths.push_back(p.rendered());

    for (const auto& path : paths) {
        std::map<std::string, std::vector<int>> support;
        int presence = 0;
        for (const auto& b : ballots) {
            for (const auto& [p, v] : b.fields) {
                if (p.rendered() != path) continue;
                ++presence;
                support[v.text].push_back(prio.weight_of(b.engine_id, b.structurer_id));
            }
        }
        for (const auto& [text, weights] : support)
            out.counts[path][text] = static_cast<int>(weights.size());
        if (presence < kappa) continue;

        int best_count = 0;
        for (const auto& [text, weights] : support)
            best_count = std::max(best_count, static_cast<int>(weights.size()));
        std::vector<std::string> leaders;
        for (const auto& [text, weights] : support)
            if (static_cast<int>(weights.size()) == best_count) leaders.push_back(text);

        std::string winner;
        if (leaders.size() == 1) {
            winner = leaders[0];
        } else {
            out.ties.insert(path);
            if (lexicographic) {
                winner = *std::min_element(leaders.begin(), leaders.end());
            } else {
                int best_min = INT_MAX;
                for (const auto& text : leaders) {
                    int m = *std::min_element(support[text].begin(), support[text].end());
                    if (m < best_min) {
                        best_min = m;
                        winner = text;
                    }
                }
            }
        }
        out.fields[path] = winner;
    }
    return out;
}

void check_against_oracle(const std::vector<Ballot>& ballots, const VotingConfig& cfg,
                          const PriorityTable& prio) {
    VoteOutcome got = vote::majority_vote(ballots, cfg, prio);
    OracleOutcome want =
        oracle_vote(ballots, prio,
                    cfg.inclusion_quorum.majority ? 0 : cfg.inclusion_quorum.fixed_k,
                    cfg.tie_break == TieBreak::lexicographic);
    REQUIRE(got.fields.size() == want.fields.size());
    for (const auto& [p, v] : got.fields) {
        REQUIRE(want.fields.count(p.rendered()));
        CHECK(v.text == want.fields.at(p.rendered()));
    }
    REQUIRE(got.tallies.size() == want.counts.size());
    for (const auto& [p, cands] : got.tallies) {
        const auto& oracle_counts = want.counts.at(p.rendered());
        REQUIRE(cands.size() == oracle_counts.size());
        for (const auto& c : cands) CHECK(oracle_counts.at(c.value.text) == c.count);
    }
    for (const auto& p : got.tie_broken_paths) CHECK(want.ties.count(p.rendered()));
}

}  // namespace

TEST_CASE("unanimity: eight identical ballots") {
    std::vector<Ballot> ballots;
    for (const auto& [e, s] : slots8())
        ballots.push_back(make_ballot(e, s, {{"vendor", "ACME"}, {"total", "100.00"}}));
    VotingConfig cfg;
    auto out = vote::majority_vote(ballots, cfg, fixture_priorities(), 8);
    CHECK(out.fields == ballots[0].fields);
    CHECK(out.n_ballots == 8);
    CHECK(out.quorum == 5);
    CHECK(out.tie_broken_paths.empty());
    CHECK_FALSE(out.degraded);
    for (const auto& [p, cands] : out.tallies) {
        REQUIRE(cands.size() == 1);
        CHECK(cands[0].count == 8);
    }
}

TEST_CASE("strict majority 5 vs 3") {
    std::vector<Ballot> ballots;
    auto slots = slots8();
    for (std::size_t i = 0; i < slots.size(); ++i)
        ballots.push_back(
            make_ballot(slots[i].first, slots[i].second, {{"total", i < 5 ? "100.00" : "10000"}}));
    VotingConfig cfg;
    auto out = vote::majority_vote(ballots, cfg, fixture_priorities(), 8);
    CHECK(out.fields.at(KeyPath::parse("total")).text == "100.00");
    CHECK(out.tie_broken_paths.empty());
    auto& cands = out.tallies.at(KeyPath::parse("total"));
    REQUIRE(cands.size() == 2);
    CHECK(cands[0].count == 5);
    CHECK(cands[1].count == 3);
}

TEST_CASE("4-4 tie broken by smallest supporter weight") {
    // "100.00" on slots with weights {11, 22, 31, 42}; "10000" on
    // {12, 21, 32, 41}. Best supporter 11 < 12, so "100.00" wins.
    std::map<std::pair<int, int>, std::string> value_of = {
        {{1, 1}, "100.00"}, {{2, 2}, "100.00"}, {{3, 1}, "100.00"}, {{4, 2}, "100.00"},
        {{1, 2}, "10000"},  {{2, 1}, "10000"},  {{3, 2}, "10000"},  {{4, 1}, "10000"},
    };
    std::vector<Ballot> ballots;
    for (const auto& [slot, value] : value_of)
        ballots.push_back(make_ballot("e" + std::to_string(slot.first),
                                      "s" + std::to_string(slot.second), {{"total", value}}));
    VotingConfig cfg;
    auto out = vote::majority_vote(ballots, cfg, fixture_priorities(), 8);
    CHECK(out.fields.at(KeyPath::parse("total")).text == "100.00");
    REQUIRE(out.tie_broken_paths.size() == 1);
    CHECK(out.tie_broken_paths.begin()->rendered() == "total");
    auto& cands = out.tallies.at(KeyPath::parse("total"));
    REQUIRE(cands.size() == 2);
    CHECK(cands[0].sum_of_priorities == 106);
    CHECK(cands[1].sum_of_priorities == 106);

    cfg.tie_break = TieBreak::lexicographic;
    auto lex = vote::majority_vote(ballots, cfg, fixture_priorities(), 8);
    CHECK(lex.fields.at(KeyPath::parse("total")).text == "100.00");  // "100.00" < "10000"

    check_against_oracle(ballots, VotingConfig{}, fixture_priorities());
}

TEST_CASE("quorum exclusion keeps the tally") {
    std::vector<Ballot> ballots;
    auto slots = slots8();
    for (std::size_t i = 0; i < slots.size(); ++i) {
        std::vector<std::pair<std::string, std::string>> fields = {{"vendor", "ACME"}};
        if (i < 3) fields.emplace_back("po_number", "PO-77");
        ballots.push_back(make_ballot(slots[i].first, slots[i].second, fields));
    }
    VotingConfig cfg;
    auto out = vote::majority_vote(ballots, cfg, fixture_priorities(), 8);
    CHECK(out.fields.size() == 1);  // po_number present in 3 < kappa=5
    CHECK_FALSE(out.fields.contains(KeyPath::parse("po_number")));
    REQUIRE(out.tallies.contains(KeyPath::parse("po_number")));
    CHECK(out.tallies.at(KeyPath::parse("po_number"))[0].count == 3);

    std::string table = vote::explain(out);
    CHECK(table.find("below quorum 5/8") != std::string::npos);
}

TEST_CASE("explain carries tie markers and winners") {
    std::vector<Ballot> ballots;
    auto slots = slots8();
    for (std::size_t i = 0; i < slots.size(); ++i)
        ballots.push_back(make_ballot(slots[i].first, slots[i].second,
                                      {{"total", i % 2 ? "1" : "2"}, {"vendor", "ACME"}}));
    VotingConfig cfg;
    auto out = vote::majority_vote(ballots, cfg, fixture_priorities(), 8);
    std::string table = vote::explain(out);
    CHECK(table.find("tie→priority") != std::string::npos);
    CHECK(table.find("\"ACME\" x8") != std::string::npos);
    CHECK(table.find("8 ballots, quorum 5") != std::string::npos);

    std::vector<Ballot> same;
    for (const auto& [e, s] : slots8()) same.push_back(make_ballot(e, s, {{"vendor", "ACME"}}));
    auto u = vote::majority_vote(same, cfg, fixture_priorities(), 8);
    std::string utable = vote::explain(u);
    CHECK(utable.find("x8") != std::string::npos);
    CHECK(utable.find("0 tie(s)") != std::string::npos);
}

TEST_CASE("heterogeneous fixtures match the brute-force oracle") {
    SplitMix64 rng(777);
    const char* paths[] = {"total", "vendor", "date", "po_number"};
    const char* values[] = {"a", "b", "c"};
    for (int round = 0; round < 200; ++round) {
        int n = 3 + static_cast<int>(rng.next_below(6));  // 3..8
        auto slots = slots8();
        std::vector<Ballot> ballots;
        for (int i = 0; i < n; ++i) {
            std::vector<std::pair<std::string, std::string>> fields;
            for (const char* p : paths)
                if (rng.next_u01() < 0.8) fields.emplace_back(p, values[rng.next_below(3)]);
            ballots.push_back(make_ballot(slots[static_cast<std::size_t>(i)].first,
                                          slots[static_cast<std::size_t>(i)].second, fields));
        }
        VotingConfig cfg;
        cfg.min_ballots = 3;
        if (round % 3 == 1) cfg.tie_break = TieBreak::lexicographic;
        if (round % 5 == 2)
            cfg.inclusion_quorum = QuorumRule{false, 1 + static_cast<int>(rng.next_below(8))};
        check_against_oracle(ballots, cfg, fixture_priorities());
    }
}

TEST_CASE("property: ballot order permutation invariance") {
    SplitMix64 rng(404);
    for (int round = 0; round < 50; ++round) {
        auto slots = slots8();
        std::vector<Ballot> ballots;
        for (const auto& [e, s] : slots) {
            std::vector<std::pair<std::string, std::string>> fields;
            for (const char* p : {"total", "vendor", "tax"})
                if (rng.next_u01() < 0.85)
                    fields.emplace_back(p,
                                        std::string(1, static_cast<char>('a' + rng.next_below(3))));
            ballots.push_back(make_ballot(e, s, fields));
        }
        VotingConfig cfg;
        auto reference = vote::majority_vote(ballots, cfg, fixture_priorities(), 8);
        std::mt19937 shuffler(static_cast<unsigned>(round));
        for (int p = 0; p < 5; ++p) {
            std::shuffle(ballots.begin(), ballots.end(), shuffler);
            auto shuffled = vote::majority_vote(ballots, cfg, fixture_priorities(), 8);
            CHECK(shuffled == reference);
        }
    }
}

TEST_CASE("property: quorum monotonicity") {
    SplitMix64 rng(808);
    for (int round = 0; round < 40; ++round) {
        auto slots = slots8();
        std::vector<Ballot> ballots;
        for (const auto& [e, s] : slots) {
            std::vector<std::pair<std::string, std::string>> fields;
            for (const char* p : {"total", "vendor", "tax", "date"})
                if (rng.next_u01() < 0.7)
                    fields.emplace_back(p,
                                        std::string(1, static_cast<char>('a' + rng.next_below(2))));
            ballots.push_back(make_ballot(e, s, fields));
        }
        std::set<std::string> previous;
        bool first = true;
        for (int k = 1; k <= 9; ++k) {
            VotingConfig cfg;
            cfg.inclusion_quorum = QuorumRule{false, k};
            auto out = vote::majority_vote(ballots, cfg, fixture_priorities(), 8);
            std::set<std::string> included;
            for (const auto& [p, v] : out.fields) included.insert(p.rendered());
            if (!first)
                for (const auto& p : included) CHECK(previous.count(p));  // non-increasing
            previous = included;
            first = false;
        }
    }
}

TEST_CASE("winner support: winning count is maximal") {
    SplitMix64 rng(909);
    for (int round = 0; round < 40; ++round) {
        auto slots = slots8();
        std::vector<Ballot> ballots;
        for (const auto& [e, s] : slots)
            ballots.push_back(
                make_ballot(e, s, {{"k", std::string(1, static_cast<char>('a' + rng.next_below(4)))}}));
        auto out = vote::majority_vote(ballots, VotingConfig{}, fixture_priorities(), 8);
        if (!out.fields.contains(KeyPath::parse("k"))) continue;
        auto win = out.fields.at(KeyPath::parse("k"));
        int win_count = 0;
        for (const auto& c : out.tallies.at(KeyPath::parse("k")))
            if (c.value == win) win_count = c.count;
        for (const auto& c : out.tallies.at(KeyPath::parse("k"))) CHECK(win_count >= c.count);
    }
}

TEST_CASE("error contracts") {
    VotingConfig cfg;
    std::vector<Ballot> two = {make_ballot("e1", "s1", {{"a", "x"}}),
                               make_ballot("e2", "s1", {{"a", "x"}})};
    CHECK_THROWS_AS(static_cast<void>(vote::majority_vote(two, cfg, fixture_priorities())),
                    VoteError);

    std::vector<Ballot> mixed = {make_ballot("e1", "s1", {{"a", "x"}}, "doc-1"),
                                 make_ballot("e2", "s1", {{"a", "x"}}, "doc-2"),
                                 make_ballot("e3", "s1", {{"a", "x"}}, "doc-1")};
    try {
        static_cast<void>(vote::majority_vote(mixed, cfg, fixture_priorities()));
        FAIL("expected VoteError");
    } catch (const VoteError& e) {
        CHECK(e.code() == VoteError::Code::mixed_documents);
    }

    // empty consensus is NOT an error: every path below quorum
    std::vector<Ballot> sparse;
    auto slots = slots8();
    for (std::size_t i = 0; i < slots.size(); ++i)
        sparse.push_back(
            make_ballot(slots[i].first, slots[i].second, {{"p" + std::to_string(i), "v"}}));
    auto out = vote::majority_vote(sparse, cfg, fixture_priorities(), 8);
    CHECK(out.fields.empty());
    CHECK(out.tallies.size() == 8);
}

TEST_CASE("degraded flag tracks expected ballots") {
    std::vector<Ballot> ballots;
    auto slots = slots8();
    for (int i = 0; i < 4; ++i)
        ballots.push_back(make_ballot(slots[static_cast<std::size_t>(i)].first,
                                      slots[static_cast<std::size_t>(i)].second, {{"a", "x"}}));
    auto out = vote::majority_vote(ballots, VotingConfig{}, fixture_priorities(), 8);
    CHECK(out.degraded);
    CHECK(out.quorum == 3);  // kappa adapts to ok ballots: floor(4/2)+1
    auto full = vote::majority_vote(ballots, VotingConfig{}, fixture_priorities(), 4);
    CHECK_FALSE(full.degraded);
}

TEST_CASE("document granularity adopts the winning map verbatim") {
    auto slots = slots8();
    std::vector<Ballot> ballots;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (i < 5)
            ballots.push_back(
                make_ballot(slots[i].first, slots[i].second, {{"a", "x"}, {"rare", "q"}}));
        else
            ballots.push_back(make_ballot(slots[i].first, slots[i].second, {{"a", "y"}}));
    }
    VotingConfig cfg;
    cfg.granularity = Granularity::document;
    auto out = vote::majority_vote(ballots, cfg, fixture_priorities(), 8);
    CHECK(out.fields == ballots[0].fields);  // winner verbatim, no quorum filter
    CHECK(out.fields.contains(KeyPath::parse("rare")));

    // document-level 4-4 tie goes to the map with the best supporter weight
    std::vector<Ballot> tied;
    for (std::size_t i = 0; i < slots.size(); ++i)
        tied.push_back(make_ballot(slots[i].first, slots[i].second, {{"a", i % 2 ? "x" : "y"}}));
    auto tie_out = vote::majority_vote(tied, cfg, fixture_priorities(), 8);
    // slot (e1,s1) weight 11 voted "y" (index 0)
    CHECK(tie_out.fields.at(KeyPath::parse("a")).text == "y");
    CHECK(tie_out.tie_broken_paths.size() == 1);
}

TEST_CASE("idempotence: n copies of one ballot map") {
    for (int n : {3, 5, 8}) {
        std::vector<Ballot> ballots;
        for (int i = 0; i < n; ++i)
            ballots.push_back(make_ballot("e" + std::to_string(i + 1), "s1",
                                          {{"a", "x"}, {"b.c", "y"}, {"arr[0]", "z"}}));
        auto out = vote::majority_vote(ballots, VotingConfig{}, fixture_priorities(), n);
        CHECK(out.fields == ballots[0].fields);
    }
}
