#include "lmv/adapters.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lmv/canon.hpp"
#include "lmv/digest.hpp"
#include "lmv/fsutil.hpp"
#include "lmv/rng.hpp"

namespace lmv {

using nlohmann::json;

void to_json(json& j, const NoiseModel& v) {
    j = json{{"field_error_rate", v.field_error_rate},
             {"drop_rate", v.drop_rate},
             {"rename_rate", v.rename_rate},
             {"error_value_space", v.error_value_space},
             {"seed", v.seed}};
    if (!v.stream_label.empty()) j["stream_label"] = v.stream_label;
}

void from_json(const json& j, NoiseModel& v) {
    v.field_error_rate = j.value("field_error_rate", 0.0);
    v.drop_rate = j.value("drop_rate", 0.0);
    v.rename_rate = j.value("rename_rate", 0.0);
    v.error_value_space = j.value("error_value_space", std::uint64_t{1});
    v.seed = j.value("seed", std::uint64_t{0});
    v.stream_label = j.value("stream_label", std::string{});
}

void to_json(json& j, const MockEngineSpec& v) {
    j = json{{"ground_truth_dir", v.ground_truth_dir},
             {"noise", v.noise},
             {"latency_ms", v.latency_ms}};
}

void from_json(const json& j, MockEngineSpec& v) {
    v.ground_truth_dir = j.at("ground_truth_dir").get<std::string>();
    v.noise = j.value("noise", NoiseModel{});
    v.latency_ms = j.value("latency_ms", std::int64_t{0});
}

void to_json(json& j, const MockStructurerSpec& v) {
    j = json{{"noise", v.noise}, {"latency_ms", v.latency_ms}};
}

void from_json(const json& j, MockStructurerSpec& v) {
    v.noise = j.value("noise", NoiseModel{});
    v.latency_ms = j.value("latency_ms", std::int64_t{0});
}

namespace adapters {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ms(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

std::string_view trim_view(std::string_view s) {
    std::size_t b = 0, e = s.size();
    auto sp = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (b < e && sp(s[b])) ++b;
    while (e > b && sp(s[e - 1])) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_command(const std::string& target) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : target) {
        if (c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

struct SubprocessResult {
    bool spawn_failed = false;
    bool timed_out = false;
    int exit_code = -1;
    bool signaled = false;
    int signal_no = 0;
    std::string out;
    std::string err;
    std::string error;
};

SubprocessResult run_subprocess(const std::vector<std::string>& argv, std::int64_t timeout_ms) {
    SubprocessResult r;
    if (argv.empty()) {
        r.spawn_failed = true;
        r.error = "empty command";
        return r;
    }
    int out_pipe[2], err_pipe[2];
    if (pipe(out_pipe) != 0) {
        r.spawn_failed = true;
        r.error = "pipe failed";
        return r;
    }
    if (pipe(err_pipe) != 0) {
        close(out_pipe[0]);
        close(out_pipe[1]);
        r.spawn_failed = true;
        r.error = "pipe failed";
        return r;
    }
    pid_t pid = fork();
    if (pid < 0) {
        for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) close(fd);
        r.spawn_failed = true;
        r.error = "fork failed";
        return r;
    }
    if (pid == 0) {
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) close(fd);
        std::vector<char*> cargv;
        cargv.reserve(argv.size() + 1);
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        _exit(127);
    }
    close(out_pipe[1]);
    close(err_pipe[1]);
    fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);
    fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

    auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
    bool out_open = true, err_open = true;
    char buf[4096];
    while (out_open || err_open) {
        auto remain = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (remain.count() <= 0) {
            r.timed_out = true;
            kill(pid, SIGKILL);
            break;
        }
        struct pollfd fds[2];
        nfds_t nfds = 0;
        if (out_open) fds[nfds++] = {out_pipe[0], POLLIN, 0};
        if (err_open) fds[nfds++] = {err_pipe[0], POLLIN, 0};
        int pr = poll(fds, nfds, static_cast<int>(std::min<std::int64_t>(remain.count(), 200)));
        if (pr < 0 && errno != EINTR) break;
        auto drain = [&](int fd, bool& open_flag, std::string& sink) {
            while (true) {
                ssize_t n = read(fd, buf, sizeof(buf));
                if (n > 0) {
                    sink.append(buf, static_cast<std::size_t>(n));
                } else if (n == 0) {
                    open_flag = false;
                    break;
                } else {
                    break;  // EAGAIN or error
                }
            }
        };
        if (out_open) drain(out_pipe[0], out_open, r.out);
        if (err_open) drain(err_pipe[0], err_open, r.err);
    }
    close(out_pipe[0]);
    close(err_pipe[0]);
    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFEXITED(status)) {
        r.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        r.signaled = true;
        r.signal_no = WTERMSIG(status);
    }
    return r;
}

std::string excerpt(const std::string& s, std::size_t limit = 200) {
    std::string t(trim_view(s));
    if (t.size() > limit) t = t.substr(0, limit) + "...";
    return t;
}

// "http://host:port/path" -> ("http://host:port", "/path")
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme = url.find("://");
    std::size_t authority = scheme == std::string::npos ? 0 : scheme + 3;
    auto slash = url.find('/', authority);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

std::uint64_t field_stream_seed(const NoiseModel& noise, std::uint64_t stream_key,
                                const std::string& field_key) {
    return noise.seed ^ stream_key ^ fnv1a64({field_key});
}

std::uint64_t engine_stream_key(const DocumentFile& doc, const EngineDescriptor& engine,
                                const NoiseModel& noise) {
    const std::string& label = noise.stream_label.empty() ? engine.engine_id : noise.stream_label;
    return fnv1a64({doc.id, label});
}

}  // namespace

CorruptResult corrupt_record(const FlatRecord& truth, const NoiseModel& noise,
                             std::uint64_t stream_key) {
    FlatRecord sorted = truth;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::map<std::string, std::string> survivors;
    for (const auto& [key, value] : sorted) {
        SplitMix64 rng(field_stream_seed(noise, stream_key, key));
        if (rng.next_u01() < noise.drop_rate) continue;
        std::string v = value;
        if (rng.next_u01() < noise.field_error_rate) {
            std::uint64_t idx = rng.next_below(std::max<std::uint64_t>(1, noise.error_value_space));
            v = value + "~" + std::to_string(idx + 1);
        }
        std::string k = key;
        if (rng.next_u01() < noise.rename_rate) k += "_x";
        survivors[k] = std::move(v);  // later original key wins on rename collision
    }
    CorruptResult result;
    for (const auto& [k, v] : survivors) {
        result.text += k;
        result.text += ": ";
        result.text += v;
        result.text += "\n";
        result.record.emplace_back(k, v);
    }
    return result;
}

FlatRecord parse_key_value_lines(const std::string& text) {
    std::map<std::string, std::string> fields;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (nl == std::string::npos ? text.size() : nl) - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        std::string key(trim_view(line.substr(0, colon)));
        std::string value(trim_view(line.substr(colon + 1)));
        if (key.empty()) continue;
        fields[key] = value;  // later duplicates win
    }
    return FlatRecord(fields.begin(), fields.end());
}

void AdapterRuntime::register_mock_engine(const std::string& target, MockEngineSpec spec) {
    std::lock_guard lock(mutex_);
    engine_specs_[target] = std::move(spec);
}

void AdapterRuntime::register_mock_structurer(const std::string& target, MockStructurerSpec spec) {
    std::lock_guard lock(mutex_);
    structurer_specs_[target] = std::move(spec);
}

void AdapterRuntime::rate_gate(const std::string& backend_id, std::int64_t delay_ms) {
    if (delay_ms <= 0) return;
    Gate* gate;
    {
        std::lock_guard lock(mutex_);
        auto& slot = gates_[backend_id];
        if (!slot) slot = std::make_unique<Gate>();
        gate = slot.get();
    }
    Clock::time_point wait_until;
    {
        std::lock_guard lock(gate->mutex);
        auto now = Clock::now();
        wait_until = std::max(gate->next_free, now);
        gate->next_free = wait_until + std::chrono::milliseconds(delay_ms);
    }
    std::this_thread::sleep_until(wait_until);
}

const MockEngineSpec* AdapterRuntime::resolve_engine_spec(const std::string& target,
                                                          std::string& error) {
    {
        std::lock_guard lock(mutex_);
        auto it = engine_specs_.find(target);
        if (it != engine_specs_.end()) return &it->second;
    }
    auto content = read_file(target);
    if (!content) {
        error = "cannot read mock spec \"" + target + "\"";
        return nullptr;
    }
    try {
        MockEngineSpec spec = json::parse(*content).get<MockEngineSpec>();
        std::lock_guard lock(mutex_);
        auto [it, _] = engine_specs_.emplace(target, std::move(spec));
        return &it->second;
    } catch (const std::exception& e) {
        error = "bad mock spec \"" + target + "\": " + e.what();
        return nullptr;
    }
}

const MockStructurerSpec* AdapterRuntime::resolve_structurer_spec(const std::string& target,
                                                                  std::string& error) {
    static const MockStructurerSpec default_spec{};
    if (target.empty()) return &default_spec;
    {
        std::lock_guard lock(mutex_);
        auto it = structurer_specs_.find(target);
        if (it != structurer_specs_.end()) return &it->second;
    }
    auto content = read_file(target);
    if (!content) {
        error = "cannot read mock spec \"" + target + "\"";
        return nullptr;
    }
    try {
        MockStructurerSpec spec = json::parse(*content).get<MockStructurerSpec>();
        std::lock_guard lock(mutex_);
        auto [it, _] = structurer_specs_.emplace(target, std::move(spec));
        return &it->second;
    } catch (const std::exception& e) {
        error = "bad mock spec \"" + target + "\": " + e.what();
        return nullptr;
    }
}

Extraction AdapterRuntime::extract_text(const EngineDescriptor& engine, const DocumentFile& doc) {
    Extraction ex;
    ex.document_id = doc.id;
    ex.engine_id = engine.engine_id;
    rate_gate("engine:" + engine.engine_id, engine.inter_call_delay_ms);
    auto start = Clock::now();
    auto finish = [&](CallStatus status, std::string text = {}) {
        ex.latency_ms = elapsed_ms(start);
        ex.status = std::move(status);
        ex.text = std::move(text);
        return ex;
    };

    try {
        switch (engine.kind) {
            case BackendKind::subprocess: {
                auto argv = split_command(engine.target);
                argv.push_back(doc.path);
                auto r = run_subprocess(argv, engine.timeout_ms);
                if (r.spawn_failed) return finish(CallStatus::failed(r.error));
                if (r.timed_out) return finish(CallStatus::timeout());
                if (r.signaled)
                    return finish(CallStatus::failed("killed by signal " +
                                                     std::to_string(r.signal_no)));
                if (r.exit_code != 0)
                    return finish(CallStatus::failed("exit " + std::to_string(r.exit_code) +
                                                     (r.err.empty() ? "" : ": " + excerpt(r.err))));
                if (!utf8_valid(r.out)) return finish(CallStatus::failed("stdout is not valid UTF-8"));
                return finish(CallStatus::okay(), std::move(r.out));
            }
            case BackendKind::http: {
                auto bytes = read_file(doc.path);
                if (!bytes) return finish(CallStatus::failed("cannot read \"" + doc.path + "\""));
                auto [base, path] = split_url(engine.target);
                httplib::Client client(base);
                client.set_connection_timeout(engine.timeout_ms / 1000,
                                              static_cast<int>(engine.timeout_ms % 1000) * 1000);
                client.set_read_timeout(engine.timeout_ms / 1000,
                                        static_cast<int>(engine.timeout_ms % 1000) * 1000);
                client.set_write_timeout(engine.timeout_ms / 1000,
                                         static_cast<int>(engine.timeout_ms % 1000) * 1000);
                auto res = client.Post(path, *bytes, "application/octet-stream");
                if (!res) {
                    if (elapsed_ms(start) >= engine.timeout_ms) return finish(CallStatus::timeout());
                    return finish(CallStatus::failed(httplib::to_string(res.error())));
                }
                if (res->status != 200)
                    return finish(CallStatus::failed("http " + std::to_string(res->status)));
                try {
                    json body = json::parse(res->body);
                    if (!body.is_object() || !body.contains("text") || !body["text"].is_string())
                        return finish(CallStatus::failed("bad response body"));
                    return finish(CallStatus::okay(), body["text"].get<std::string>());
                } catch (const json::exception&) {
                    return finish(CallStatus::failed("bad response body"));
                }
            }
            case BackendKind::mock: {
                std::string error;
                const MockEngineSpec* spec = resolve_engine_spec(engine.target, error);
                if (!spec) return finish(CallStatus::failed(error));
                std::string sidecar = spec->ground_truth_dir + "/" + doc.id + ".truth.json";
                auto content = read_file(sidecar);
                if (!content)
                    return finish(CallStatus::failed("cannot read sidecar \"" + sidecar + "\""));
                FlatRecord truth;
                try {
                    json j = json::parse(*content);
                    if (!j.is_object())
                        return finish(CallStatus::failed("sidecar is not a JSON object"));
                    for (const auto& [k, v] : j.items()) {
                        if (v.is_string())
                            truth.emplace_back(k, v.get<std::string>());
                        else if (v.is_number_integer())
                            truth.emplace_back(k, std::to_string(v.get<std::int64_t>()));
                        else if (v.is_number_unsigned())
                            truth.emplace_back(k, std::to_string(v.get<std::uint64_t>()));
                        else if (v.is_number_float())
                            truth.emplace_back(k, canon::number_text(v.get<double>()));
                        else if (v.is_boolean())
                            truth.emplace_back(k, v.get<bool>() ? "true" : "false");
                        else if (v.is_null())
                            truth.emplace_back(k, "null");
                        else
                            return finish(CallStatus::failed("sidecar is not flat"));
                    }
                } catch (const json::exception& e) {
                    return finish(CallStatus::failed(std::string("bad sidecar: ") + e.what()));
                }
                auto corrupted =
                    corrupt_record(truth, spec->noise, engine_stream_key(doc, engine, spec->noise));
                if (spec->latency_ms >= engine.timeout_ms) {
                    std::this_thread::sleep_for(std::chrono::milliseconds(engine.timeout_ms));
                    return finish(CallStatus::timeout());
                }
                if (spec->latency_ms > 0)
                    std::this_thread::sleep_for(std::chrono::milliseconds(spec->latency_ms));
                return finish(CallStatus::okay(), std::move(corrupted.text));
            }
        }
    } catch (const std::exception& e) {
        return finish(CallStatus::failed(std::string("adapter error: ") + e.what()));
    }
    return finish(CallStatus::failed("unknown backend kind"));
}

Ballot AdapterRuntime::structure_text(const StructurerDescriptor& structurer,
                                      const Extraction& extraction) {
    Ballot b;
    b.document_id = extraction.document_id;
    b.engine_id = extraction.engine_id;
    b.structurer_id = structurer.structurer_id;
    if (!extraction.status.ok()) {
        b.status = CallStatus::failed("extraction status is " +
                                      std::string(to_string(extraction.status.state)));
        return b;
    }
    auto start = Clock::now();
    auto finish = [&](CallStatus status) {
        b.latency_ms = elapsed_ms(start);
        b.status = std::move(status);
        return b;
    };
    auto adopt = [&](const std::string& raw) {
        try {
            std::vector<std::string> warnings;
            b.fields = canon::canonicalize(raw, &warnings);
            b.raw_json = raw;
            return finish(CallStatus::okay());
        } catch (const CanonError& e) {
            b.raw_json = raw;
            return finish(CallStatus::invalid(e.what()));
        }
    };

    try {
        switch (structurer.kind) {
            case BackendKind::http: {
                json req{{"text", extraction.text}};
                auto [base, path] = split_url(structurer.target);
                httplib::Client client(base);
                client.set_connection_timeout(structurer.timeout_ms / 1000,
                                              static_cast<int>(structurer.timeout_ms % 1000) * 1000);
                client.set_read_timeout(structurer.timeout_ms / 1000,
                                        static_cast<int>(structurer.timeout_ms % 1000) * 1000);
                client.set_write_timeout(structurer.timeout_ms / 1000,
                                         static_cast<int>(structurer.timeout_ms % 1000) * 1000);
                auto res = client.Post(path, req.dump(), "application/json");
                if (!res) {
                    if (elapsed_ms(start) >= structurer.timeout_ms)
                        return finish(CallStatus::timeout());
                    return finish(CallStatus::failed(httplib::to_string(res.error())));
                }
                if (res->status != 200)
                    return finish(CallStatus::failed("http " + std::to_string(res->status)));
                try {
                    json body = json::parse(res->body);
                    if (!body.is_object() || !body.contains("json"))
                        return finish(CallStatus::failed("bad response body"));
                    if (!body["json"].is_object())
                        return finish(CallStatus::invalid("top level is not a JSON object"));
                    return adopt(body["json"].dump());
                } catch (const json::exception&) {
                    return finish(CallStatus::failed("bad response body"));
                }
            }
            case BackendKind::mock: {
                std::string error;
                const MockStructurerSpec* spec = resolve_structurer_spec(structurer.target, error);
                if (!spec) return finish(CallStatus::failed(error));
                if (spec->latency_ms >= structurer.timeout_ms) {
                    std::this_thread::sleep_for(std::chrono::milliseconds(structurer.timeout_ms));
                    return finish(CallStatus::timeout());
                }
                if (spec->latency_ms > 0)
                    std::this_thread::sleep_for(std::chrono::milliseconds(spec->latency_ms));
                FlatRecord record = parse_key_value_lines(extraction.text);
                if (!spec->noise.zero()) {
                    std::uint64_t stream_key =
                        spec->noise.stream_label.empty()
                            ? fnv1a64({extraction.document_id, extraction.engine_id,
                                       structurer.structurer_id})
                            : fnv1a64({extraction.document_id, spec->noise.stream_label});
                    record = corrupt_record(record, spec->noise, stream_key).record;
                }
                json obj = json::object();
                for (const auto& [k, v] : record) obj[k] = v;
                return adopt(obj.dump());
            }
            case BackendKind::subprocess:
                return finish(CallStatus::failed("subprocess structurers are not supported"));
        }
    } catch (const std::exception& e) {
        return finish(CallStatus::failed(std::string("adapter error: ") + e.what()));
    }
    return finish(CallStatus::failed("unknown backend kind"));
}

}  // namespace adapters
}  // namespace lmv
