#pragma once

// JSON canonicalization: parse a candidate JSON object and flatten it into a
// sorted map of key paths to canonical scalar values, so that semantically
// equal outputs from different backends compare equal under voting.
//
// Key normalization: lowercase, runs of whitespace/hyphens collapse to a
// single underscore, and the path metacharacters "." "[" "]" are escaped as
// %2E %5B %5D. Already-escaped triplets are preserved verbatim so that
// normalization is idempotent (required for canonicalize . render .
// canonicalize == canonicalize).
//
// Value normalization:
//   string  - trimmed, internal whitespace runs collapsed to single spaces.
//             Strings that read as plain decimal numbers (optionally with
//             comma thousands separators) keep string kind but lose commas
//             and surrounding whitespace; digits are kept exactly as
//             written ("1,234.50" -> "1234.50"). ID-like strings with a
//             leading zero ("007") are exempt.
//   number  - minimal decimal form: no exponent, no leading zeros, no
//             trailing fractional zeros, no separators.
//   boolean - "true" / "false"
//   null    - "null"

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lmv {

inline constexpr int kMaxNestingDepth = 32;
inline constexpr std::size_t kMaxKeyPathChars = 1024;
inline constexpr std::uint32_t kMaxArrayIndex = 100000;

class CanonError : public std::runtime_error {
public:
    enum class Code {
        invalid_json,
        not_an_object,
        depth_exceeded,
        path_too_long,
        path_conflict,
        index_too_large,
    };

    CanonError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

struct KeyPath {
    struct Segment {
        bool is_index = false;
        std::string key;           // normalized, valid when !is_index
        std::uint32_t index = 0;   // valid when is_index

        bool operator==(const Segment&) const = default;
    };

    std::vector<Segment> segments;

    KeyPath() = default;
    explicit KeyPath(std::vector<Segment> segs);

    // "vendor.name", "items[2].qty". Cached at construction.
    const std::string& rendered() const { return rendered_; }

    // Strict parse of a rendered path; key segments are re-normalized
    // (a no-op on canonical input). Throws CanonError on bad grammar.
    static KeyPath parse(std::string_view rendered);

    static KeyPath of_key(std::string_view raw_key);

    bool operator==(const KeyPath& o) const { return rendered_ == o.rendered_; }
    bool operator<(const KeyPath& o) const { return rendered_ < o.rendered_; }

private:
    std::string rendered_;
};

struct CanonValue {
    enum class Kind { string, number, boolean, null };

    Kind kind = Kind::null;
    std::string text = "null";

    bool operator==(const CanonValue&) const = default;
    bool operator<(const CanonValue& o) const {
        if (text != o.text) return text < o.text;
        return kind < o.kind;
    }

    static CanonValue str(std::string_view raw);
    static CanonValue num(double v);
    static CanonValue num(std::int64_t v);
    static CanonValue num(std::uint64_t v);
    static CanonValue boolean(bool v) { return {Kind::boolean, v ? "true" : "false"}; }
    static CanonValue null() { return {Kind::null, "null"}; }

    // JSON-rendered form: strings quoted and escaped, everything else raw.
    std::string json_text() const;
};

const char* to_string(CanonValue::Kind k);
CanonValue::Kind canon_kind_from_string(std::string_view s);

using CanonicalFieldMap = std::map<KeyPath, CanonValue>;

namespace canon {

// Key text normalization, exposed for reuse (mock structurer, tests).
std::string normalize_key(std::string_view raw);

// Canonical text of a double: plain minimal decimal, round-trips to the
// same value.
std::string number_text(double v);

// Flatten a JSON object. Empty objects and arrays contribute no entries;
// array elements whose whole subtree is empty do not consume an index.
// `warnings` (optional) collects notes such as duplicate keys; they are
// surfaced in the audit log by callers.
CanonicalFieldMap canonicalize(std::string_view raw_json,
                               std::vector<std::string>* warnings = nullptr);

// Rebuild the nested JSON document: lexicographic keys, two-space indent,
// "\n" line endings, arrays materialized with null-filled gaps. Output is
// byte-deterministic. Throws CanonError::path_conflict when one path is a
// strict prefix of another or a node is addressed both as array and object.
std::string render(const CanonicalFieldMap& fields);

}  // namespace canon
}  // namespace lmv
