#pragma once

#include <optional>
#include <string>

namespace lmv {

std::optional<std::string> read_file(const std::string& path);

// Writes via a temp file in the same directory followed by rename, so
// readers never observe a partial file. Throws std::runtime_error on
// failure (the temp file is removed).
void write_file_atomic(const std::string& path, const std::string& content);

void write_file(const std::string& path, const std::string& content);

}  // namespace lmv
