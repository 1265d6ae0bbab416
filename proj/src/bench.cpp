#include "lmv/bench.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "lmv/canon.hpp"
#include "lmv/digest.hpp"
#include "lmv/fsutil.hpp"
#include "lmv/pipeline.hpp"
#include "lmv/rng.hpp"

namespace lmv::bench {

namespace fs = std::filesystem;
using nlohmann::json;

// --------------------------------------------------------------------------
// Spec

BenchSpec load_spec(const json& j) {
    BenchSpec spec;
    try {
        spec.n_documents = j.at("n_documents").get<int>();
        spec.fields_per_document = j.at("fields_per_document").get<int>();
        spec.engine_noise = j.value("engine_noise", std::vector<NoiseModel>{});
        spec.structurer_noise = j.value("structurer_noise", NoiseModel{});
        for (const auto& c : j.at("configurations")) {
            BenchConfigRow row;
            row.label = c.at("label").get<std::string>();
            row.engines = c.value("engines", 1);
            row.structurers = c.value("structurers", 1);
            row.voting = c.value("voting", false);
            row.sequential = c.value("sequential", false);
            spec.configurations.push_back(std::move(row));
        }
        spec.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("latency")) {
            spec.latency.engine_ms = j.at("latency").value("engine_ms", std::int64_t{0});
            spec.latency.structurer_ms = j.at("latency").value("structurer_ms", std::int64_t{0});
        }
        spec.corpus_dir = j.value("corpus_dir", std::string{});
        spec.output_dir = j.value("output_dir", std::string{});
    } catch (const json::exception& e) {
        throw BenchError(BenchError::Code::bad_spec, std::string("bad bench spec: ") + e.what());
    }
    validate_spec(spec);
    return spec;
}

void validate_spec(const BenchSpec& spec) {
    auto bad = [](const std::string& msg) {
        throw BenchError(BenchError::Code::bad_spec, "bad bench spec: " + msg);
    };
    if (spec.n_documents < 1) bad("n_documents must be >= 1");
    if (spec.fields_per_document < 1) bad("fields_per_document must be >= 1");
    if (spec.configurations.empty()) bad("configurations must not be empty");
    if (spec.corpus_dir.empty()) bad("corpus_dir must not be empty");
    if (spec.output_dir.empty()) bad("output_dir must not be empty");
    if (spec.latency.engine_ms < 0 || spec.latency.structurer_ms < 0)
        bad("latencies must be >= 0");
    std::set<std::string> labels;
    for (const auto& row : spec.configurations) {
        if (row.label.empty()) bad("configuration label must not be empty");
        for (char c : row.label)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'))
                bad("label \"" + row.label + "\" must be [a-zA-Z0-9_-]");
        if (!labels.insert(row.label).second) bad("duplicate label \"" + row.label + "\"");
        if (row.engines < 1) bad("engine count must be >= 1 in \"" + row.label + "\"");
        if (static_cast<std::size_t>(row.engines) > std::max<std::size_t>(spec.engine_noise.size(), 1))
            bad("engine count exceeds configured engine_noise models in \"" + row.label + "\"");
        if (row.structurers < 1 || row.structurers > 9)
            bad("structurer count must be in [1, 9] in \"" + row.label + "\"");
        if (!row.voting && (row.engines != 1 || row.structurers != 1))
            bad("voting=false rows are the single-backend baseline; use engines=1, structurers=1 "
                "in \"" + row.label + "\"");
    }
    for (const auto& n : spec.engine_noise) {
        if (n.field_error_rate < 0 || n.field_error_rate > 1 || n.drop_rate < 0 ||
            n.drop_rate > 1 || n.rename_rate < 0 || n.rename_rate > 1)
            bad("noise rates must be in [0, 1]");
        if (n.error_value_space < 1) bad("error_value_space must be >= 1");
    }
}

// --------------------------------------------------------------------------
// Corpus

namespace {

void push_u32_be(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>(v & 0xFF));
}

void push_chunk(std::string& out, const char type[4], const std::string& data) {
    push_u32_be(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    push_u32_be(out, static_cast<std::uint32_t>(
                          ::crc32(0, reinterpret_cast<const Bytef*>(body.data()),
                                  static_cast<uInt>(body.size()))));
}

}  // namespace

std::string tiny_png(const std::string& tag) {
    std::string png("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    push_u32_be(ihdr, 1);  // width
    push_u32_be(ihdr, 1);  // height
    ihdr += std::string("\x08\x00\x00\x00\x00", 5);  // 8-bit grayscale
    push_chunk(png, "IHDR", ihdr);
    // Pre-built zlib stream (stored deflate block) of the 1x1 scanline
    // {filter 0, pixel 0x7F}.
    static const unsigned char idat[] = {0x78, 0x01, 0x01, 0x02, 0x00, 0xFD, 0xFF,
                                         0x00, 0x7F, 0x00, 0x81, 0x00, 0x80};
    push_chunk(png, "IDAT", std::string(reinterpret_cast<const char*>(idat), sizeof(idat)));
    std::string text("id");
    text.push_back('\0');
    text += tag;
    push_chunk(png, "tEXt", text);
    push_chunk(png, "IEND", "");
    return png;
}

namespace {

const char* kBaseKeys[] = {"invoice_number", "vendor",  "total",       "date",    "currency",
                           "po_number",      "tax",     "subtotal",    "contact", "balance_due",
                           "address",        "payment_terms"};

std::string money_string(SplitMix64& rng) {
    std::uint64_t whole = rng.next_below(999900) + 100;
    std::uint64_t cents = rng.next_below(100);
    std::string digits = std::to_string(whole);
    std::string grouped;
    int count = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (count && count % 3 == 0) grouped.push_back(',');
        grouped.push_back(*it);
        ++count;
    }
    std::reverse(grouped.begin(), grouped.end());
    char cents_buf[8];
    std::snprintf(cents_buf, sizeof(cents_buf), "%02llu",
                  static_cast<unsigned long long>(cents));
    return grouped + "." + cents_buf;
}

std::string token_string(SplitMix64& rng) {
    static const char* prefixes[] = {"acme", "globex", "initech", "umbra", "vertex", "nimbus"};
    return std::string(prefixes[rng.next_below(6)]) + "-" +
           std::to_string(1000 + rng.next_below(9000));
}

std::string date_string(SplitMix64& rng) {
    unsigned y = 2020 + static_cast<unsigned>(rng.next_below(6));
    unsigned m = 1 + static_cast<unsigned>(rng.next_below(12));
    unsigned d = 1 + static_cast<unsigned>(rng.next_below(28));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04u-%02u-%02u", y, m, d);
    return buf;
}

json truth_record(const BenchSpec& spec, int doc_index) {
    SplitMix64 rng(spec.seed ^ fnv1a64({"truth", std::to_string(doc_index)}));
    json record = json::object();
    const int n_base = static_cast<int>(std::size(kBaseKeys));
    for (int f = 0; f < spec.fields_per_document; ++f) {
        std::string key = f < n_base ? kBaseKeys[f] : "field_" + std::to_string(f - n_base + 1);
        std::string value;
        switch (f % 4) {
            case 0: value = token_string(rng); break;
            case 1: value = money_string(rng); break;
            case 2: value = date_string(rng); break;
            default: value = std::to_string(1 + rng.next_below(99999)); break;
        }
        record[key] = value;
    }
    return record;
}

}  // namespace

void generate_corpus(const BenchSpec& spec) {
    fs::path dir(spec.corpus_dir);
    std::error_code ec;
    if (fs::exists(dir, ec)) {
        if (!fs::is_directory(dir, ec) || !fs::is_empty(dir, ec))
            throw BenchError(BenchError::Code::target_not_empty,
                             "corpus dir \"" + spec.corpus_dir + "\" is not empty");
    } else {
        fs::create_directories(dir);
    }
    for (int k = 0; k < spec.n_documents; ++k) {
        std::string png =
            tiny_png("seed " + std::to_string(spec.seed) + " doc " + std::to_string(k));
        char name[32];
        std::snprintf(name, sizeof(name), "doc_%05d.png", k);
        write_file((dir / name).string(), png);
        std::string id = sha256_hex(png);
        json truth = truth_record(spec, k);
        // Render through the canonicalizer for byte-deterministic sidecars.
        write_file((dir / (id + ".truth.json")).string(),
                   canon::render(canon::canonicalize(truth.dump())) + "\n");
    }
}

// --------------------------------------------------------------------------
// Analytic oracle

TieModel tie_model_from_string(std::string_view s) {
    if (s == "against") return TieModel::against;
    if (s == "for") return TieModel::for_;
    if (s == "priority") return TieModel::priority;
    throw BenchError(BenchError::Code::bad_spec, "unknown tie model \"" + std::string(s) + "\"");
}

namespace {

// Visit every partition of `w` with at most `max_parts` parts, descending
// part sizes. `parts` is reused across calls.
template <typename Fn>
void visit_partitions(int w, int max_part, int max_parts, std::vector<int>& parts, Fn&& fn) {
    if (w == 0) {
        fn(parts);
        return;
    }
    if (max_parts == 0) return;
    for (int p = std::min(w, max_part); p >= 1; --p) {
        parts.push_back(p);
        visit_partitions(w - p, p, max_parts - 1, parts, fn);
        parts.pop_back();
    }
}

long double factorial(int n) {
    long double f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

long double binomial(int n, int k) {
    long double b = 1;
    for (int i = 0; i < k; ++i) b = b * static_cast<long double>(n - i) / (i + 1);
    return b;
}

}  // namespace

double analytic_vote_accuracy(int n, double q, std::uint64_t v, int kappa, TieModel tie_model) {
    if (n < 1) throw BenchError(BenchError::Code::bad_spec, "ballot count must be >= 1");
    if (q < 0.0 || q > 1.0) throw BenchError(BenchError::Code::bad_spec, "q must be in [0, 1]");
    if (v < 1) throw BenchError(BenchError::Code::bad_spec, "error value space must be >= 1");
    if (n > 12 && v > 8)
        throw BenchError(BenchError::Code::enumeration_too_large,
                         "exact enumeration supports n <= 12 (or V <= 8)");
    if (n < kappa) return 0.0;  // the path can never reach quorum

    long double total = 0.0L;
    std::vector<int> parts;
    for (int c = 0; c <= n; ++c) {
        long double p_c = binomial(n, c) * std::pow(static_cast<long double>(q), c) *
                          std::pow(static_cast<long double>(1.0 - q), n - c);
        if (p_c <= 0.0L) continue;
        int w = n - c;
        long double win_given_c = 0.0L;
        int max_parts = static_cast<int>(std::min<std::uint64_t>(v, static_cast<std::uint64_t>(w)));
        visit_partitions(w, w, std::max(max_parts, 0), parts, [&](const std::vector<int>& lambda) {
            // P(lambda) = w!/(prod lambda_i!) * fallingfactorial(V, k)/(prod m_s!) / V^w
            long double weight = factorial(w);
            for (int part : lambda) weight /= factorial(part);
            int k = static_cast<int>(lambda.size());
            std::map<int, int> mult;
            for (int part : lambda) ++mult[part];
            for (const auto& [size, m] : mult) {
                (void)size;
                weight /= factorial(m);
            }
            for (int i = 0; i < k; ++i) weight *= static_cast<long double>(v - static_cast<std::uint64_t>(i));
            for (int i = 0; i < w; ++i) weight /= static_cast<long double>(v);

            long double win;
            int max_wrong = lambda.empty() ? 0 : lambda.front();
            if (c == 0) {
                win = 0.0L;
            } else if (c > max_wrong) {
                win = 1.0L;
            } else if (c == max_wrong) {
                int tied = 1 + mult[max_wrong];
                switch (tie_model) {
                    case TieModel::against: win = 0.0L; break;
                    case TieModel::for_: win = 1.0L; break;
                    default: win = 1.0L / tied; break;
                }
            } else {
                win = 0.0L;
            }
            win_given_c += weight * win;
        });
        total += p_c * win_given_c;
    }
    return static_cast<double>(total);
}

// --------------------------------------------------------------------------
// Benchmark runner

namespace {

struct ScoredDoc {
    DocumentFile doc;
    CanonicalFieldMap truth;
};

std::vector<ScoredDoc> load_corpus(const BenchSpec& spec) {
    std::vector<ScoredDoc> docs;
    std::vector<std::string> pngs;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(spec.corpus_dir, ec)) {
        if (entry.path().extension() == ".png") pngs.push_back(entry.path().string());
    }
    if (ec || pngs.empty())
        throw BenchError(BenchError::Code::corpus_missing,
                         "no corpus images under \"" + spec.corpus_dir + "\"");
    std::sort(pngs.begin(), pngs.end());
    for (const auto& path : pngs) {
        auto bytes = read_file(path);
        if (!bytes)
            throw BenchError(BenchError::Code::corpus_missing, "cannot read \"" + path + "\"");
        ScoredDoc sd;
        sd.doc.id = sha256_hex(*bytes);
        sd.doc.path = path;
        sd.doc.detected_at = wall_clock_ms();
        sd.doc.media_type = MediaType::png;
        auto truth_bytes = read_file(spec.corpus_dir + "/" + sd.doc.id + ".truth.json");
        if (!truth_bytes)
            throw BenchError(BenchError::Code::corpus_missing,
                             "missing sidecar for \"" + path + "\"");
        sd.truth = canon::canonicalize(*truth_bytes);
        docs.push_back(std::move(sd));
    }
    return docs;
}

std::optional<double> oracle_for_row(const BenchSpec& spec, const BenchConfigRow& row) {
    if (!row.voting) return std::nullopt;
    int n = row.engines * row.structurers;
    int kappa = n / 2 + 1;
    auto pure_value_noise = [](const NoiseModel& m) {
        return m.drop_rate == 0 && m.rename_rate == 0 && m.stream_label.empty();
    };
    bool engines_clean = true;
    for (int i = 0; i < row.engines; ++i) {
        const NoiseModel& m = static_cast<std::size_t>(i) < spec.engine_noise.size()
                                  ? spec.engine_noise[static_cast<std::size_t>(i)]
                                  : NoiseModel{};
        if (!m.zero()) engines_clean = false;
    }
    // Independent per-ballot errors only arise when the value noise sits at
    // the structuring stage; engine noise is shared by that engine's
    // ballots.
    if (engines_clean && pure_value_noise(spec.structurer_noise)) {
        double q = 1.0 - spec.structurer_noise.field_error_rate;
        return analytic_vote_accuracy(n, q, spec.structurer_noise.error_value_space, kappa,
                                      TieModel::priority);
    }
    if (row.structurers == 1 && spec.structurer_noise.zero()) {
        bool uniform = true;
        NoiseModel first = spec.engine_noise.empty() ? NoiseModel{} : spec.engine_noise[0];
        for (int i = 0; i < row.engines; ++i) {
            const NoiseModel& m = static_cast<std::size_t>(i) < spec.engine_noise.size()
                                      ? spec.engine_noise[static_cast<std::size_t>(i)]
                                      : NoiseModel{};
            if (!pure_value_noise(m) || m.field_error_rate != first.field_error_rate ||
                m.error_value_space != first.error_value_space)
                uniform = false;
        }
        if (uniform)
            return analytic_vote_accuracy(n, 1.0 - first.field_error_rate,
                                          first.error_value_space, kappa, TieModel::priority);
    }
    return std::nullopt;
}

std::string fmt(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace

json BenchReport::to_json() const {
    json rows_json = json::array();
    for (const auto& row : rows) {
        json r{{"label", row.config.label},
               {"engines", row.config.engines},
               {"structurers", row.config.structurers},
               {"voting", row.config.voting},
               {"sequential", row.config.sequential},
               {"documents", row.documents},
               {"failures", row.failures},
               {"fields_scored", row.fields_scored},
               {"field_accuracy", row.field_accuracy},
               {"document_accuracy", row.document_accuracy},
               {"mean_wall_clock_ms", row.modeled_wall_clock_ms},
               {"oracle_accuracy",
                row.oracle_accuracy ? json(*row.oracle_accuracy) : json(nullptr)}};
        rows_json.push_back(std::move(r));
    }
    return json{{"seed", seed}, {"configurations", rows_json}};
}

std::string BenchReport::to_markdown() const {
    std::ostringstream os;
    os << "# Benchmark report\n\n";
    os << "seed: " << seed << "\n\n";
    os << "| configuration | backends | voting | field accuracy | document accuracy | oracle | "
          "modeled ms/doc | measured ms/doc |\n";
    os << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& row : rows) {
        os << "| " << row.config.label << " | " << row.config.engines << "x"
           << row.config.structurers << (row.config.sequential ? " (sequential)" : "") << " | "
           << (row.config.voting ? "on" : "off") << " | " << fmt(row.field_accuracy) << " | "
           << fmt(row.document_accuracy) << " | "
           << (row.oracle_accuracy ? fmt(*row.oracle_accuracy) : std::string("-")) << " | "
           << row.modeled_wall_clock_ms << " | " << fmt(row.measured_mean_wall_clock_ms, 1)
           << " |\n";
    }
    os << "\nfields scored per configuration: "
       << (rows.empty() ? 0 : rows.front().fields_scored) << "\n";
    return os.str();
}

BenchReport run_benchmark(const BenchSpec& spec) {
    validate_spec(spec);
    {
        std::error_code ec;
        if (!fs::exists(spec.corpus_dir, ec) || fs::is_empty(spec.corpus_dir, ec))
            generate_corpus(spec);
    }
    auto docs = load_corpus(spec);

    BenchReport report;
    report.seed = spec.seed;

    for (const auto& row : spec.configurations) {
        pipeline::PipelineConfig cfg;
        for (int i = 0; i < row.engines; ++i) {
            EngineDescriptor e;
            e.engine_id = "e" + std::to_string(i + 1);
            e.kind = BackendKind::mock;
            e.target = "mem:" + row.label + ":engine:" + std::to_string(i + 1);
            e.timeout_ms = std::max<std::int64_t>(10000, spec.latency.engine_ms * 4 + 1000);
            e.priority = i + 1;
            cfg.engines.push_back(std::move(e));
        }
        for (int j = 0; j < row.structurers; ++j) {
            StructurerDescriptor s;
            s.structurer_id = "s" + std::to_string(j + 1);
            s.kind = BackendKind::mock;
            s.target = "mem:" + row.label + ":structurer:" + std::to_string(j + 1);
            s.timeout_ms = std::max<std::int64_t>(10000, spec.latency.structurer_ms * 4 + 1000);
            s.priority = j + 1;
            cfg.structurers.push_back(std::move(s));
        }
        cfg.voting.min_ballots = std::min(3, row.engines * row.structurers);
        cfg.output_dir = spec.output_dir + "/runs/" + row.label;
        cfg.audit = false;
        cfg.sequential = row.sequential;
        cfg.monitor.directory = spec.corpus_dir;  // unused; keeps validation happy

        // Fresh run directory: each benchmark invocation is a new measurement.
        std::error_code ec;
        fs::remove_all(cfg.output_dir, ec);

        adapters::AdapterRuntime runtime;
        for (int i = 0; i < row.engines; ++i) {
            MockEngineSpec mock;
            mock.ground_truth_dir = spec.corpus_dir;
            mock.noise = static_cast<std::size_t>(i) < spec.engine_noise.size()
                             ? spec.engine_noise[static_cast<std::size_t>(i)]
                             : NoiseModel{};
            mock.latency_ms = spec.latency.engine_ms;
            runtime.register_mock_engine(cfg.engines[static_cast<std::size_t>(i)].target,
                                         std::move(mock));
        }
        for (int j = 0; j < row.structurers; ++j) {
            MockStructurerSpec mock;
            mock.noise = spec.structurer_noise;
            mock.latency_ms = spec.latency.structurer_ms;
            runtime.register_mock_structurer(cfg.structurers[static_cast<std::size_t>(j)].target,
                                             std::move(mock));
        }

        store::Store store(cfg.output_dir, cfg.audit);
        BenchRow result;
        result.config = row;
        result.documents = static_cast<int>(docs.size());
        std::int64_t matched = 0;
        std::int64_t measured_total = 0;
        int docs_all_correct = 0;
        for (const auto& sd : docs) {
            auto pr = pipeline::process_document(sd.doc, cfg, runtime, store);
            measured_total += pr.total_ms;
            bool all_correct = true;
            for (const auto& [path, value] : sd.truth) {
                ++result.fields_scored;
                bool correct = false;
                if (pr.outcome) {
                    auto it = pr.outcome->fields.find(path);
                    correct = it != pr.outcome->fields.end() && it->second == value;
                }
                if (correct)
                    ++matched;
                else
                    all_correct = false;
            }
            if (!pr.outcome) ++result.failures;
            if (all_correct && pr.outcome) ++docs_all_correct;
        }
        result.field_accuracy =
            result.fields_scored ? static_cast<double>(matched) / result.fields_scored : 0.0;
        result.document_accuracy =
            docs.empty() ? 0.0 : static_cast<double>(docs_all_correct) / docs.size();
        result.measured_mean_wall_clock_ms =
            docs.empty() ? 0.0 : static_cast<double>(measured_total) / docs.size();
        result.modeled_wall_clock_ms =
            row.sequential ? spec.latency.engine_ms * row.engines +
                                 spec.latency.structurer_ms * row.engines * row.structurers
                           : spec.latency.engine_ms + spec.latency.structurer_ms;
        result.oracle_accuracy = oracle_for_row(spec, row);
        report.rows.push_back(std::move(result));
    }

    fs::create_directories(spec.output_dir);
    write_file_atomic(spec.output_dir + "/bench_report.json", report.to_json().dump(2) + "\n");
    write_file_atomic(spec.output_dir + "/bench_report.md", report.to_markdown());
    return report;
}

}  // namespace lmv::bench
