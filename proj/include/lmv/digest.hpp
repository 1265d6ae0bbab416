#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace lmv {

// Lowercase hex SHA-256 of a byte buffer.
std::string sha256_hex(const void* data, std::size_t len);
inline std::string sha256_hex(std::string_view s) { return sha256_hex(s.data(), s.size()); }

// Hash of the file's current bytes; nullopt when the file cannot be read
// (e.g. it vanished between listing and hashing).
std::optional<std::string> sha256_file(const std::string& path);

bool utf8_valid(std::string_view s);

}  // namespace lmv
