#include "lmv/canon.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>

namespace lmv {

using nlohmann::json;

// --------------------------------------------------------------------------
// KeyPath

KeyPath::KeyPath(std::vector<Segment> segs) : segments(std::move(segs)) {
    std::string r;
    for (const auto& seg : segments) {
        if (seg.is_index) {
            r += '[';
            r += std::to_string(seg.index);
            r += ']';
        } else {
            if (!r.empty()) r += '.';
            r += seg.key;
        }
    }
    rendered_ = std::move(r);
}

KeyPath KeyPath::of_key(std::string_view raw_key) {
    return KeyPath({Segment{false, canon::normalize_key(raw_key), 0}});
}

KeyPath KeyPath::parse(std::string_view s) {
    if (s.empty()) throw CanonError(CanonError::Code::invalid_json, "empty key path");
    if (s.size() > kMaxKeyPathChars)
        throw CanonError(CanonError::Code::path_too_long,
                         "key path longer than " + std::to_string(kMaxKeyPathChars) + " chars");
    std::vector<Segment> segs;
    std::size_t i = 0;
    auto read_key = [&]() {
        std::size_t start = i;
        while (i < s.size() && s[i] != '.' && s[i] != '[') ++i;
        if (i == start)
            throw CanonError(CanonError::Code::invalid_json,
                             "bad key path \"" + std::string(s) + "\": empty key segment");
        segs.push_back(Segment{false, canon::normalize_key(s.substr(start, i - start)), 0});
    };
    read_key();
    while (i < s.size()) {
        if (s[i] == '[') {
            std::size_t close = s.find(']', i + 1);
            if (close == std::string_view::npos || close == i + 1)
                throw CanonError(CanonError::Code::invalid_json,
                                 "bad key path \"" + std::string(s) + "\": malformed index");
            std::uint64_t idx = 0;
            for (std::size_t k = i + 1; k < close; ++k) {
                if (s[k] < '0' || s[k] > '9')
                    throw CanonError(CanonError::Code::invalid_json,
                                     "bad key path \"" + std::string(s) + "\": non-numeric index");
                idx = idx * 10 + static_cast<std::uint64_t>(s[k] - '0');
                if (idx > kMaxArrayIndex)
                    throw CanonError(CanonError::Code::index_too_large,
                                     "array index above " + std::to_string(kMaxArrayIndex));
            }
            segs.push_back(Segment{true, {}, static_cast<std::uint32_t>(idx)});
            i = close + 1;
        } else if (s[i] == '.') {
            ++i;
            read_key();
        } else {
            throw CanonError(CanonError::Code::invalid_json,
                             "bad key path \"" + std::string(s) + "\": unexpected character");
        }
    }
    if (segs.size() > static_cast<std::size_t>(kMaxNestingDepth))
        throw CanonError(CanonError::Code::depth_exceeded, "key path deeper than 32 segments");
    return KeyPath(std::move(segs));
}

// --------------------------------------------------------------------------
// Value canonicalization

const char* to_string(CanonValue::Kind k) {
    switch (k) {
        case CanonValue::Kind::string: return "string";
        case CanonValue::Kind::number: return "number";
        case CanonValue::Kind::boolean: return "boolean";
        case CanonValue::Kind::null: return "null";
    }
    return "null";
}

CanonValue::Kind canon_kind_from_string(std::string_view s) {
    if (s == "string") return CanonValue::Kind::string;
    if (s == "number") return CanonValue::Kind::number;
    if (s == "boolean") return CanonValue::Kind::boolean;
    if (s == "null") return CanonValue::Kind::null;
    throw CanonError(CanonError::Code::invalid_json, "unknown value kind \"" + std::string(s) + "\"");
}

namespace {

bool is_space_byte(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space_byte(s[b])) ++b;
    while (e > b && is_space_byte(s[e - 1])) --e;
    return s.substr(b, e - b);
}

std::string collapse_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (is_space_byte(s[i])) {
            while (i < s.size() && is_space_byte(s[i])) ++i;
            out.push_back(' ');
        } else {
            out.push_back(s[i++]);
        }
    }
    return out;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Plain decimal number, optionally with comma thousands separators. Returns
// the comma-free text. ID-like strings (leading zero followed by more
// digits) are rejected so "007" stays an identifier.
bool numeric_string(std::string_view t, std::string& out) {
    std::size_t i = 0;
    bool neg = false;
    if (i < t.size() && t[i] == '-') {
        neg = true;
        ++i;
    }
    std::size_t int_start = i;
    bool has_comma = false;
    while (i < t.size() && (is_digit(t[i]) || t[i] == ',')) {
        if (t[i] == ',') has_comma = true;
        ++i;
    }
    std::string_view intpart = t.substr(int_start, i - int_start);
    if (intpart.empty() || intpart.front() == ',' || intpart.back() == ',') return false;
    std::string digits;
    if (has_comma) {
        std::size_t group_len = 0, group_idx = 0;
        bool first_done = false;
        for (char c : intpart) {
            if (c == ',') {
                if (group_idx == 0 ? (group_len < 1 || group_len > 3) : group_len != 3) return false;
                first_done = true;
                ++group_idx;
                group_len = 0;
            } else {
                digits.push_back(c);
                ++group_len;
            }
        }
        if (group_len != 3) return false;
        (void)first_done;
    } else {
        digits.assign(intpart);
    }
    std::string frac;
    if (i < t.size()) {
        if (t[i] != '.') return false;
        ++i;
        while (i < t.size() && is_digit(t[i])) frac.push_back(t[i++]);
        if (i != t.size() || frac.empty()) return false;
    }
    if (digits.size() > 1 && digits.front() == '0') return false;  // ID-like
    out.clear();
    if (neg) out.push_back('-');
    out += digits;
    if (!frac.empty()) {
        out.push_back('.');
        out += frac;
    }
    return true;
}

}  // namespace

CanonValue CanonValue::str(std::string_view raw) {
    std::string_view t = trim(raw);
    std::string numeric;
    if (numeric_string(t, numeric)) return {Kind::string, std::move(numeric)};
    return {Kind::string, collapse_ws(t)};
}

CanonValue CanonValue::num(std::int64_t v) { return {Kind::number, std::to_string(v)}; }
CanonValue CanonValue::num(std::uint64_t v) { return {Kind::number, std::to_string(v)}; }
CanonValue CanonValue::num(double v) { return {Kind::number, canon::number_text(v)}; }

std::string CanonValue::json_text() const {
    if (kind == Kind::string)
        return json(text).dump(-1, ' ', false, json::error_handler_t::replace);
    return text;
}

namespace canon {

std::string normalize_key(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    auto soft = [](char c) { return c == '-' || is_space_byte(c); };
    std::size_t i = 0;
    const std::size_t n = raw.size();
    while (i < n) {
        if (i + 3 <= n && raw[i] == '%' &&
            (raw.compare(i, 3, "%2E") == 0 || raw.compare(i, 3, "%5B") == 0 ||
             raw.compare(i, 3, "%5D") == 0)) {
            out.append(raw.substr(i, 3));
            i += 3;
            continue;
        }
        char c = raw[i];
        if (soft(c)) {
            while (i < n && soft(raw[i])) ++i;
            out.push_back('_');
            continue;
        }
        if (c == '.')
            out += "%2E";
        else if (c == '[')
            out += "%5B";
        else if (c == ']')
            out += "%5D";
        else if (c >= 'A' && c <= 'Z')
            out.push_back(static_cast<char>(c - 'A' + 'a'));
        else
            out.push_back(c);
        ++i;
    }
    if (out.empty()) out = "_";
    return out;
}

std::string number_text(double v) {
    if (!std::isfinite(v)) return "null";
    if (v == 0.0) return "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
    std::string s(buf, res.ptr);

    bool neg = false;
    if (s[0] == '-') {
        neg = true;
        s.erase(0, 1);
    }
    int exp10 = 0;
    if (auto e = s.find_first_of("eE"); e != std::string::npos) {
        exp10 = std::atoi(s.c_str() + e + 1);
        s.erase(e);
    }
    std::string digits = s;
    int frac_len = 0;
    if (auto dot = digits.find('.'); dot != std::string::npos) {
        frac_len = static_cast<int>(digits.size() - dot - 1);
        digits.erase(dot, 1);
    }
    // value = digits * 10^(exp10 - frac_len)
    int shift = exp10 - frac_len;
    std::string out;
    if (shift >= 0) {
        out = digits + std::string(static_cast<std::size_t>(shift), '0');
    } else {
        int point = static_cast<int>(digits.size()) + shift;
        if (point > 0) {
            out = digits.substr(0, static_cast<std::size_t>(point)) + "." +
                  digits.substr(static_cast<std::size_t>(point));
        } else {
            out = "0." + std::string(static_cast<std::size_t>(-point), '0') + digits;
        }
    }
    if (auto dot = out.find('.'); dot != std::string::npos) {
        std::size_t last = out.find_last_not_of('0');
        if (last > dot)
            out.erase(last + 1);
        else
            out.erase(dot);
    }
    std::size_t keep = 0;
    while (keep + 1 < out.size() && out[keep] == '0' && out[keep + 1] != '.') ++keep;
    out.erase(0, keep);
    if (neg) out.insert(out.begin(), '-');
    return out;
}

// --------------------------------------------------------------------------
// canonicalize: SAX parse into a light tree (duplicate keys resolved
// last-wins with a warning, depth capped), then flatten.

namespace {

struct Node {
    enum class Kind { null_v, bool_v, int_v, uint_v, dbl_v, str_v, object, array };
    Kind kind = Kind::null_v;
    bool b = false;
    std::int64_t i = 0;
    std::uint64_t u = 0;
    double d = 0;
    std::string s;
    std::vector<std::pair<std::string, Node>> members;
    std::vector<Node> elems;
};

struct FlattenSax {
    using json_t = nlohmann::json;

    Node root;
    bool have_root = false;
    std::vector<std::string>* warnings = nullptr;
    std::string error_msg;
    CanonError::Code error_code = CanonError::Code::invalid_json;
    bool failed = false;

    struct Open {
        Node* node;
        std::map<std::string, std::size_t> keys;  // for duplicate detection
    };
    std::vector<Open> stack;
    std::string pending_key;

    bool fail(CanonError::Code c, std::string msg) {
        failed = true;
        error_code = c;
        error_msg = std::move(msg);
        return false;
    }

    Node* attach(Node&& v) {
        if (stack.empty()) {
            root = std::move(v);
            have_root = true;
            return &root;
        }
        Open& top = stack.back();
        if (top.node->kind == Node::Kind::object) {
            auto it = top.keys.find(pending_key);
            if (it != top.keys.end()) {
                if (warnings)
                    warnings->push_back("duplicate key \"" + pending_key +
                                        "\": last occurrence wins");
                top.node->members[it->second].second = std::move(v);
                return &top.node->members[it->second].second;
            }
            top.keys.emplace(pending_key, top.node->members.size());
            top.node->members.emplace_back(pending_key, std::move(v));
            return &top.node->members.back().second;
        }
        top.node->elems.push_back(std::move(v));
        return &top.node->elems.back();
    }

    bool scalar(Node&& v) {
        attach(std::move(v));
        return true;
    }

    bool null() { return scalar(Node{}); }
    bool boolean(bool val) {
        Node n;
        n.kind = Node::Kind::bool_v;
        n.b = val;
        return scalar(std::move(n));
    }
    bool number_integer(json_t::number_integer_t val) {
        Node n;
        n.kind = Node::Kind::int_v;
        n.i = val;
        return scalar(std::move(n));
    }
    bool number_unsigned(json_t::number_unsigned_t val) {
        Node n;
        n.kind = Node::Kind::uint_v;
        n.u = val;
        return scalar(std::move(n));
    }
    bool number_float(json_t::number_float_t val, const json_t::string_t&) {
        Node n;
        n.kind = Node::Kind::dbl_v;
        n.d = val;
        return scalar(std::move(n));
    }
    bool string(json_t::string_t& val) {
        Node n;
        n.kind = Node::Kind::str_v;
        n.s = val;
        return scalar(std::move(n));
    }
    bool binary(json_t::binary_t&) {
        return fail(CanonError::Code::invalid_json, "binary values not supported");
    }

    bool start_container(Node::Kind k) {
        if (stack.size() >= static_cast<std::size_t>(kMaxNestingDepth))
            return fail(CanonError::Code::depth_exceeded,
                        "nesting deeper than " + std::to_string(kMaxNestingDepth) + " levels");
        Node n;
        n.kind = k;
        Node* placed = attach(std::move(n));
        stack.push_back(Open{placed, {}});
        return true;
    }
    bool start_object(std::size_t) { return start_container(Node::Kind::object); }
    bool start_array(std::size_t) { return start_container(Node::Kind::array); }
    bool key(json_t::string_t& val) {
        pending_key = val;
        return true;
    }
    bool end_object() {
        stack.pop_back();
        return true;
    }
    bool end_array() {
        stack.pop_back();
        return true;
    }
    bool parse_error(std::size_t position, const std::string&,
                     const nlohmann::detail::exception& ex) {
        return fail(CanonError::Code::invalid_json,
                    "invalid JSON at byte " + std::to_string(position) + ": " + ex.what());
    }
};

CanonValue leaf_value(const Node& n) {
    switch (n.kind) {
        case Node::Kind::null_v: return CanonValue::null();
        case Node::Kind::bool_v: return CanonValue::boolean(n.b);
        case Node::Kind::int_v: return CanonValue::num(n.i);
        case Node::Kind::uint_v: return CanonValue::num(n.u);
        case Node::Kind::dbl_v: return CanonValue::num(n.d);
        case Node::Kind::str_v: return CanonValue::str(n.s);
        default: break;
    }
    return CanonValue::null();
}

// Returns whether the subtree contributed at least one entry. Array
// elements whose subtree is empty (e.g. nested empty containers) do not
// consume an index; otherwise the canonical map would carry index gaps that
// render() fills with null, breaking idempotence.
bool flatten_into(const Node& node, std::vector<KeyPath::Segment>& prefix,
                  CanonicalFieldMap& out, std::vector<std::string>* warnings) {
    if (node.kind == Node::Kind::object) {
        bool emitted = false;
        for (const auto& [raw_key, child] : node.members) {
            prefix.push_back(KeyPath::Segment{false, normalize_key(raw_key), 0});
            emitted |= flatten_into(child, prefix, out, warnings);
            prefix.pop_back();
        }
        return emitted;
    }
    if (node.kind == Node::Kind::array) {
        std::uint32_t next_index = 0;
        for (const auto& elem : node.elems) {
            if (next_index > kMaxArrayIndex)
                throw CanonError(CanonError::Code::index_too_large,
                                 "array index above " + std::to_string(kMaxArrayIndex));
            prefix.push_back(KeyPath::Segment{true, {}, next_index});
            if (flatten_into(elem, prefix, out, warnings)) ++next_index;
            prefix.pop_back();
        }
        return next_index > 0;
    }
    KeyPath path(prefix);
    if (path.rendered().size() > kMaxKeyPathChars)
        throw CanonError(CanonError::Code::path_too_long,
                         "key path longer than " + std::to_string(kMaxKeyPathChars) + " chars");
    auto it = out.find(path);
    if (it != out.end()) {
        if (warnings)
            warnings->push_back("key path collision after normalization: \"" + path.rendered() +
                                "\" (last occurrence wins)");
        it->second = leaf_value(node);
    } else {
        out.emplace(std::move(path), leaf_value(node));
    }
    return true;
}

}  // namespace

CanonicalFieldMap canonicalize(std::string_view raw_json, std::vector<std::string>* warnings) {
    FlattenSax sax;
    sax.warnings = warnings;
    bool ok = json::sax_parse(raw_json, &sax);
    if (!ok || sax.failed) {
        if (sax.failed) throw CanonError(sax.error_code, sax.error_msg);
        throw CanonError(CanonError::Code::invalid_json, "invalid JSON");
    }
    if (!sax.have_root || sax.root.kind != Node::Kind::object)
        throw CanonError(CanonError::Code::not_an_object, "top level is not a JSON object");
    CanonicalFieldMap out;
    std::vector<KeyPath::Segment> prefix;
    flatten_into(sax.root, prefix, out, warnings);
    return out;
}

// --------------------------------------------------------------------------
// render

namespace {

struct RenderNode {
    enum class Kind { unset, leaf, object, array };
    Kind kind = Kind::unset;
    CanonValue leaf;
    std::map<std::string, RenderNode> obj;
    std::map<std::uint32_t, RenderNode> arr;
};

[[noreturn]] void conflict(const KeyPath& path) {
    throw CanonError(CanonError::Code::path_conflict,
                     "key path \"" + path.rendered() + "\" conflicts with another path");
}

void insert_path(RenderNode& root, const KeyPath& path, const CanonValue& value) {
    RenderNode* cur = &root;
    for (std::size_t i = 0; i < path.segments.size(); ++i) {
        const auto& seg = path.segments[i];
        RenderNode::Kind need = seg.is_index ? RenderNode::Kind::array : RenderNode::Kind::object;
        if (cur->kind == RenderNode::Kind::unset)
            cur->kind = need;
        else if (cur->kind != need)
            conflict(path);
        if (seg.is_index && seg.index > kMaxArrayIndex)
            throw CanonError(CanonError::Code::index_too_large,
                             "array index above " + std::to_string(kMaxArrayIndex));
        RenderNode* child = seg.is_index ? &cur->arr[seg.index] : &cur->obj[seg.key];
        if (i + 1 == path.segments.size()) {
            if (child->kind != RenderNode::Kind::unset) conflict(path);
            child->kind = RenderNode::Kind::leaf;
            child->leaf = value;
        } else {
            if (child->kind == RenderNode::Kind::leaf) conflict(path);
            cur = child;
        }
    }
}

void emit(const RenderNode& node, int indent, std::string& out) {
    const std::string pad(static_cast<std::size_t>(indent), ' ');
    const std::string pad2(static_cast<std::size_t>(indent) + 2, ' ');
    switch (node.kind) {
        case RenderNode::Kind::leaf:
            out += node.leaf.json_text();
            return;
        case RenderNode::Kind::unset:
            out += "null";
            return;
        case RenderNode::Kind::object: {
            if (node.obj.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (const auto& [k, child] : node.obj) {
                if (!first) out += ",\n";
                first = false;
                out += pad2;
                out += json(k).dump(-1, ' ', false, json::error_handler_t::replace);
                out += ": ";
                emit(child, indent + 2, out);
            }
            out += "\n";
            out += pad;
            out += "}";
            return;
        }
        case RenderNode::Kind::array: {
            out += "[\n";
            std::uint32_t max_idx = node.arr.rbegin()->first;
            for (std::uint32_t i = 0; i <= max_idx; ++i) {
                if (i) out += ",\n";
                out += pad2;
                auto it = node.arr.find(i);
                if (it == node.arr.end())
                    out += "null";
                else
                    emit(it->second, indent + 2, out);
            }
            out += "\n";
            out += pad;
            out += "]";
            return;
        }
    }
}

}  // namespace

std::string render(const CanonicalFieldMap& fields) {
    RenderNode root;
    for (const auto& [path, value] : fields) insert_path(root, path, value);
    if (root.kind == RenderNode::Kind::unset) return "{}";
    std::string out;
    emit(root, 0, out);
    return out;
}

}  // namespace canon
}  // namespace lmv
