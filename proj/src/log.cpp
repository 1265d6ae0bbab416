#include "lmv/log.hpp"

#include <cstdio>
#include <mutex>
#include <stdexcept>

#include "lmv/model.hpp"

namespace lmv::log {

namespace {

std::mutex g_mutex;
Level g_level = Level::info;
Sink g_sink;

const char* level_name(Level l) {
    switch (l) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
    }
    return "info";
}

}  // namespace

Level level_from_string(std::string_view s) {
    if (s == "debug") return Level::debug;
    if (s == "info") return Level::info;
    if (s == "warn") return Level::warn;
    if (s == "error") return Level::error;
    throw std::invalid_argument("unknown log level \"" + std::string(s) + "\"");
}

void set_level(Level level) {
    std::lock_guard lock(g_mutex);
    g_level = level;
}

Level level() {
    std::lock_guard lock(g_mutex);
    return g_level;
}

void set_sink(Sink sink) {
    std::lock_guard lock(g_mutex);
    g_sink = std::move(sink);
}

void emit(Level level, std::string_view event, std::string_view document_id,
          nlohmann::json detail) {
    std::lock_guard lock(g_mutex);
    if (level < g_level) return;
    nlohmann::json line{{"ts", wall_clock_ms()},
                        {"level", level_name(level)},
                        {"event", std::string(event)},
                        {"document_id", std::string(document_id)},
                        {"detail", std::move(detail)}};
    std::string s = line.dump();
    if (g_sink) {
        g_sink(s);
    } else {
        std::fprintf(stderr, "%s\n", s.c_str());
        std::fflush(stderr);
    }
}

}  // namespace lmv::log
