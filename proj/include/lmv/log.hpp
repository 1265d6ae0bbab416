#pragma once

// Structured logging: one JSON object per line on stderr with fields
// ts, level, event, document_id, detail. The sink is swappable for tests.

#include <functional>
#include <string>

#include <nlohmann/json.hpp>

namespace lmv::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3 };

Level level_from_string(std::string_view s);

void set_level(Level level);
Level level();

using Sink = std::function<void(const std::string& line)>;

// Replaces the output sink (default writes to stderr). Pass nullptr to
// restore the default.
void set_sink(Sink sink);

void emit(Level level, std::string_view event, std::string_view document_id,
          nlohmann::json detail = nlohmann::json::object());

inline void debug(std::string_view event, std::string_view doc = {},
                  nlohmann::json detail = nlohmann::json::object()) {
    emit(Level::debug, event, doc, std::move(detail));
}
inline void info(std::string_view event, std::string_view doc = {},
                 nlohmann::json detail = nlohmann::json::object()) {
    emit(Level::info, event, doc, std::move(detail));
}
inline void warn(std::string_view event, std::string_view doc = {},
                 nlohmann::json detail = nlohmann::json::object()) {
    emit(Level::warn, event, doc, std::move(detail));
}
inline void error(std::string_view event, std::string_view doc = {},
                  nlohmann::json detail = nlohmann::json::object()) {
    emit(Level::error, event, doc, std::move(detail));
}

}  // namespace lmv::log
