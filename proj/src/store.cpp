#include "lmv/store.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lmv/fsutil.hpp"

namespace lmv::store {

namespace fs = std::filesystem;
using nlohmann::json;

Store::Store(std::string output_dir, bool audit)
    : output_dir_(std::move(output_dir)), audit_(audit) {
    fs::create_directories(fs::path(output_dir_) / "final");
    if (audit_) fs::create_directories(fs::path(output_dir_) / "audit");
}

std::string Store::final_path(const std::string& document_id) const {
    return (fs::path(output_dir_) / "final" / (document_id + ".json")).string();
}

bool Store::final_exists(const std::string& document_id) const {
    std::error_code ec;
    return fs::exists(final_path(document_id), ec);
}

void Store::append_record(const json& line) {
    std::ofstream out(fs::path(output_dir_) / "records.jsonl", std::ios::app);
    if (!out) throw StoreError(StoreError::Code::persistence_failure, "cannot open records.jsonl");
    out << line.dump() << "\n";
    out.flush();
    if (!out)
        throw StoreError(StoreError::Code::persistence_failure, "write to records.jsonl failed");
}

StoredPaths Store::persist(const VoteOutcome& outcome, const std::vector<Ballot>& ballots,
                           const PersistInfo& info) {
    std::lock_guard lock(mutex_);
    StoredPaths paths;
    paths.final_path = final_path(outcome.document_id);
    paths.record_path = (fs::path(output_dir_) / "records.jsonl").string();
    try {
        write_file_atomic(paths.final_path, canon::render(outcome.fields) + "\n");

        if (audit_) {
            fs::path audit_dir = fs::path(output_dir_) / "audit" / outcome.document_id;
            fs::create_directories(audit_dir);
            for (const auto& ballot : ballots) {
                std::string name =
                    "ballot_" + ballot.engine_id + "_" + ballot.structurer_id + ".json";
                write_file_atomic((audit_dir / name).string(), json(ballot).dump(2) + "\n");
            }
            write_file_atomic((audit_dir / "vote_explain.txt").string(), vote::explain(outcome));
            paths.audit_dir = audit_dir.string();
        }

        json record{{"kind", "ok"},
                    {"document_id", outcome.document_id},
                    {"completed_at", wall_clock_ms()},
                    {"wall_clock_ms", info.wall_clock_ms},
                    {"ballots_ok", info.ballots_ok},
                    {"ballots_total", info.ballots_total},
                    {"included_paths", outcome.fields.size()},
                    {"n_ballots", outcome.n_ballots},
                    {"degraded", outcome.degraded},
                    {"ties", outcome.tie_broken_paths.size()},
                    {"final_path", "final/" + outcome.document_id + ".json"}};
        append_record(record);
    } catch (const StoreError&) {
        throw;
    } catch (const std::exception& e) {
        throw StoreError(StoreError::Code::persistence_failure, e.what());
    }
    return paths;
}

void Store::persist_failure(const std::string& document_id, const std::string& reason,
                            const PersistInfo& info) {
    std::lock_guard lock(mutex_);
    try {
        if (audit_) {
            fs::path audit_dir = fs::path(output_dir_) / "audit" / document_id;
            fs::create_directories(audit_dir);
            json detail{{"document_id", document_id},
                        {"reason", reason},
                        {"ballots_ok", info.ballots_ok},
                        {"ballots_total", info.ballots_total}};
            write_file_atomic((audit_dir / "failure.json").string(), detail.dump(2) + "\n");
        }
        json record{{"kind", "failed"},
                    {"document_id", document_id},
                    {"completed_at", wall_clock_ms()},
                    {"wall_clock_ms", info.wall_clock_ms},
                    {"ballots_ok", info.ballots_ok},
                    {"ballots_total", info.ballots_total},
                    {"reason", reason}};
        append_record(record);
    } catch (const StoreError&) {
        throw;
    } catch (const std::exception& e) {
        throw StoreError(StoreError::Code::persistence_failure, e.what());
    }
}

namespace {

std::string fmt_ms(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

}  // namespace

std::string render_report(const std::string& records_path, const std::string& output_path) {
    std::ifstream in(records_path);
    std::vector<json> rows;
    if (in) {
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                rows.push_back(json::parse(line));
            } catch (const json::exception& e) {
                throw StoreError(StoreError::Code::report_failure,
                                 "records line " + std::to_string(line_no) +
                                     " is not valid JSON: " + e.what(),
                                 line_no);
            }
        }
    }

    std::ostringstream os;
    os << "# Processing report\n\n";
    os << "| document | status | fields | ballots | degraded | ties | wall clock (ms) |\n";
    os << "|---|---|---|---|---|---|---|\n";
    std::vector<double> wall;
    int failed = 0;
    for (const auto& r : rows) {
        std::string kind = r.value("kind", std::string("ok"));
        bool ok = kind == "ok";
        if (!ok) ++failed;
        double w = r.value("wall_clock_ms", 0.0);
        wall.push_back(w);
        os << "| " << r.value("document_id", std::string("?")) << " | " << kind << " | ";
        if (ok)
            os << r.value("included_paths", 0);
        else
            os << "-";
        os << " | " << r.value("ballots_ok", 0) << "/" << r.value("ballots_total", 0) << " | ";
        if (ok)
            os << (r.value("degraded", false) ? "yes" : "no");
        else
            os << "-";
        os << " | ";
        if (ok)
            os << r.value("ties", 0);
        else
            os << "-";
        os << " | " << fmt_ms(w) << " |\n";
    }
    os << "\n";
    os << rows.size() << " document(s), " << (rows.size() - static_cast<std::size_t>(failed))
       << " ok, " << failed << " failed\n";
    if (!wall.empty()) {
        double mean = 0;
        for (double w : wall) mean += w;
        mean /= static_cast<double>(wall.size());
        std::vector<double> sorted = wall;
        std::sort(sorted.begin(), sorted.end());
        double median = sorted.size() % 2 == 1
                            ? sorted[sorted.size() / 2]
                            : (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]) / 2.0;
        os << "\nmean wall clock: " << fmt_ms(mean) << " ms\n";
        os << "median wall clock: " << fmt_ms(median) << " ms\n";
    }

    try {
        write_file_atomic(output_path, os.str());
    } catch (const std::exception& e) {
        throw StoreError(StoreError::Code::persistence_failure, e.what());
    }
    return output_path;
}

}  // namespace lmv::store
