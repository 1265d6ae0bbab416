#include "lmv/model.hpp"

#include <chrono>
#include <stdexcept>

namespace lmv {

using nlohmann::json;

std::int64_t wall_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

const char* to_string(MediaType t) {
    switch (t) {
        case MediaType::png: return "png";
        case MediaType::jpeg: return "jpeg";
        case MediaType::tiff: return "tiff";
        case MediaType::bmp: return "bmp";
    }
    return "png";
}

MediaType media_type_from_string(std::string_view s) {
    if (s == "png") return MediaType::png;
    if (s == "jpeg") return MediaType::jpeg;
    if (s == "tiff") return MediaType::tiff;
    if (s == "bmp") return MediaType::bmp;
    throw std::invalid_argument("unknown media type \"" + std::string(s) + "\"");
}

std::optional<MediaType> media_type_from_extension(std::string_view ext) {
    std::string low;
    low.reserve(ext.size());
    for (char c : ext) low.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    if (low == "png") return MediaType::png;
    if (low == "jpg" || low == "jpeg") return MediaType::jpeg;
    if (low == "tif" || low == "tiff") return MediaType::tiff;
    if (low == "bmp") return MediaType::bmp;
    return std::nullopt;
}

const char* to_string(BackendKind k) {
    switch (k) {
        case BackendKind::subprocess: return "subprocess";
        case BackendKind::http: return "http";
        case BackendKind::mock: return "mock";
    }
    return "mock";
}

BackendKind backend_kind_from_string(std::string_view s) {
    if (s == "subprocess") return BackendKind::subprocess;
    if (s == "http") return BackendKind::http;
    if (s == "mock") return BackendKind::mock;
    throw std::invalid_argument("unknown backend kind \"" + std::string(s) + "\"");
}

const char* to_string(CallState s) {
    switch (s) {
        case CallState::ok: return "ok";
        case CallState::timeout: return "timeout";
        case CallState::failed: return "failed";
        case CallState::invalid_json: return "invalid_json";
    }
    return "failed";
}

CallState call_state_from_string(std::string_view s) {
    if (s == "ok") return CallState::ok;
    if (s == "timeout") return CallState::timeout;
    if (s == "failed") return CallState::failed;
    if (s == "invalid_json") return CallState::invalid_json;
    throw std::invalid_argument("unknown call state \"" + std::string(s) + "\"");
}

const char* to_string(Granularity g) {
    return g == Granularity::field ? "field" : "document";
}

Granularity granularity_from_string(std::string_view s) {
    if (s == "field") return Granularity::field;
    if (s == "document") return Granularity::document;
    throw std::invalid_argument("unknown granularity \"" + std::string(s) + "\"");
}

const char* to_string(TieBreak t) {
    return t == TieBreak::priority ? "priority" : "lexicographic";
}

TieBreak tie_break_from_string(std::string_view s) {
    if (s == "priority") return TieBreak::priority;
    if (s == "lexicographic") return TieBreak::lexicographic;
    throw std::invalid_argument("unknown tie break \"" + std::string(s) + "\"");
}

void to_json(json& j, const CanonValue& v) {
    j = json{{"kind", to_string(v.kind)}, {"text", v.text}};
}

void from_json(const json& j, CanonValue& v) {
    v.kind = canon_kind_from_string(j.at("kind").get<std::string>());
    v.text = j.at("text").get<std::string>();
}

json field_map_to_json(const CanonicalFieldMap& fields) {
    json j = json::object();
    for (const auto& [path, value] : fields) j[path.rendered()] = value;
    return j;
}

CanonicalFieldMap field_map_from_json(const json& j) {
    CanonicalFieldMap out;
    for (auto it = j.begin(); it != j.end(); ++it)
        out.emplace(KeyPath::parse(it.key()), it.value().get<CanonValue>());
    return out;
}

void to_json(json& j, const DocumentFile& v) {
    j = json{{"id", v.id},
             {"path", v.path},
             {"detected_at", v.detected_at},
             {"media_type", to_string(v.media_type)}};
}

void from_json(const json& j, DocumentFile& v) {
    v.id = j.at("id").get<std::string>();
    v.path = j.at("path").get<std::string>();
    v.detected_at = j.at("detected_at").get<std::int64_t>();
    v.media_type = media_type_from_string(j.at("media_type").get<std::string>());
}

void to_json(json& j, const MonitorState& v) {
    json files = json::array();
    for (const auto& [path, hash] : v.known_files)
        files.push_back(json{{"path", path}, {"hash", hash}});
    j = json{{"directory", v.directory},
             {"interval_ms", v.interval_ms},
             {"known_files", files},
             {"horizon_ms", v.horizon_ms ? json(*v.horizon_ms) : json(nullptr)}};
}

void from_json(const json& j, MonitorState& v) {
    v.directory = j.at("directory").get<std::string>();
    v.interval_ms = j.at("interval_ms").get<std::int64_t>();
    v.known_files.clear();
    for (const auto& f : j.at("known_files"))
        v.known_files[f.at("path").get<std::string>()] = f.at("hash").get<std::string>();
    const auto& h = j.at("horizon_ms");
    v.horizon_ms = h.is_null() ? std::nullopt : std::optional<std::int64_t>(h.get<std::int64_t>());
}

void to_json(json& j, const EngineDescriptor& v) {
    j = json{{"engine_id", v.engine_id},
             {"kind", to_string(v.kind)},
             {"target", v.target},
             {"timeout_ms", v.timeout_ms},
             {"priority", v.priority},
             {"inter_call_delay_ms", v.inter_call_delay_ms}};
}

void from_json(const json& j, EngineDescriptor& v) {
    v.engine_id = j.at("engine_id").get<std::string>();
    v.kind = backend_kind_from_string(j.at("kind").get<std::string>());
    v.target = j.at("target").get<std::string>();
    v.timeout_ms = j.value("timeout_ms", std::int64_t{30000});
    v.priority = j.at("priority").get<int>();
    v.inter_call_delay_ms = j.value("inter_call_delay_ms", std::int64_t{0});
}

void to_json(json& j, const StructurerDescriptor& v) {
    j = json{{"structurer_id", v.structurer_id},
             {"kind", to_string(v.kind)},
             {"target", v.target},
             {"timeout_ms", v.timeout_ms},
             {"priority", v.priority}};
}

void from_json(const json& j, StructurerDescriptor& v) {
    v.structurer_id = j.at("structurer_id").get<std::string>();
    v.kind = backend_kind_from_string(j.at("kind").get<std::string>());
    v.target = j.at("target").get<std::string>();
    v.timeout_ms = j.value("timeout_ms", std::int64_t{30000});
    v.priority = j.at("priority").get<int>();
}

void to_json(json& j, const CallStatus& v) {
    j = json{{"state", to_string(v.state)}};
    if (!v.reason.empty()) j["reason"] = v.reason;
}

void from_json(const json& j, CallStatus& v) {
    v.state = call_state_from_string(j.at("state").get<std::string>());
    v.reason = j.value("reason", std::string{});
}

void to_json(json& j, const Extraction& v) {
    j = json{{"document_id", v.document_id},
             {"engine_id", v.engine_id},
             {"text", v.text},
             {"latency_ms", v.latency_ms},
             {"status", v.status}};
}

void from_json(const json& j, Extraction& v) {
    v.document_id = j.at("document_id").get<std::string>();
    v.engine_id = j.at("engine_id").get<std::string>();
    v.text = j.at("text").get<std::string>();
    v.latency_ms = j.at("latency_ms").get<std::int64_t>();
    v.status = j.at("status").get<CallStatus>();
}

void to_json(json& j, const Ballot& v) {
    j = json{{"document_id", v.document_id},
             {"engine_id", v.engine_id},
             {"structurer_id", v.structurer_id},
             {"raw_json", v.raw_json},
             {"fields", field_map_to_json(v.fields)},
             {"latency_ms", v.latency_ms},
             {"status", v.status}};
}

void from_json(const json& j, Ballot& v) {
    v.document_id = j.at("document_id").get<std::string>();
    v.engine_id = j.at("engine_id").get<std::string>();
    v.structurer_id = j.at("structurer_id").get<std::string>();
    v.raw_json = j.at("raw_json").get<std::string>();
    v.fields = field_map_from_json(j.at("fields"));
    v.latency_ms = j.at("latency_ms").get<std::int64_t>();
    v.status = j.at("status").get<CallStatus>();
}

void to_json(json& j, const VoteOutcome& v) {
    json tallies = json::object();
    for (const auto& [path, cands] : v.tallies) {
        json arr = json::array();
        for (const auto& c : cands)
            arr.push_back(json{{"value", c.value},
                               {"count", c.count},
                               {"sum_of_priorities", c.sum_of_priorities}});
        tallies[path.rendered()] = arr;
    }
    json ties = json::array();
    for (const auto& p : v.tie_broken_paths) ties.push_back(p.rendered());
    j = json{{"document_id", v.document_id},
             {"fields", field_map_to_json(v.fields)},
             {"tallies", tallies},
             {"n_ballots", v.n_ballots},
             {"quorum", v.quorum},
             {"tie_broken_paths", ties},
             {"granularity", to_string(v.granularity)},
             {"tie_break", to_string(v.tie_break)},
             {"degraded", v.degraded}};
}

void from_json(const json& j, VoteOutcome& v) {
    v.document_id = j.at("document_id").get<std::string>();
    v.fields = field_map_from_json(j.at("fields"));
    v.tallies.clear();
    for (auto it = j.at("tallies").begin(); it != j.at("tallies").end(); ++it) {
        std::vector<VoteCandidateTally> cands;
        for (const auto& c : it.value()) {
            VoteCandidateTally t;
            t.value = c.at("value").get<CanonValue>();
            t.count = c.at("count").get<int>();
            t.sum_of_priorities = c.at("sum_of_priorities").get<std::int64_t>();
            cands.push_back(std::move(t));
        }
        v.tallies.emplace(KeyPath::parse(it.key()), std::move(cands));
    }
    v.n_ballots = j.at("n_ballots").get<int>();
    v.quorum = j.at("quorum").get<int>();
    v.tie_broken_paths.clear();
    for (const auto& p : j.at("tie_broken_paths")) v.tie_broken_paths.insert(KeyPath::parse(p.get<std::string>()));
    v.granularity = granularity_from_string(j.value("granularity", std::string("field")));
    v.tie_break = tie_break_from_string(j.value("tie_break", std::string("priority")));
    v.degraded = j.at("degraded").get<bool>();
}

void to_json(json& j, const VotingConfig& v) {
    j = json{{"granularity", to_string(v.granularity)},
             {"inclusion_quorum",
              v.inclusion_quorum.majority ? json("majority") : json(v.inclusion_quorum.fixed_k)},
             {"tie_break", to_string(v.tie_break)},
             {"min_ballots", v.min_ballots}};
}

void from_json(const json& j, VotingConfig& v) {
    v.granularity = granularity_from_string(j.value("granularity", std::string("field")));
    if (j.contains("inclusion_quorum")) {
        const auto& q = j.at("inclusion_quorum");
        if (q.is_string()) {
            if (q.get<std::string>() != "majority")
                throw std::invalid_argument("inclusion_quorum must be \"majority\" or an integer");
            v.inclusion_quorum = QuorumRule{true, 0};
        } else {
            v.inclusion_quorum = QuorumRule{false, q.get<int>()};
        }
    } else {
        v.inclusion_quorum = QuorumRule{};
    }
    v.tie_break = tie_break_from_string(j.value("tie_break", std::string("priority")));
    v.min_ballots = j.value("min_ballots", 3);
}

}  // namespace lmv
