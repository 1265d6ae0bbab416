#include <doctest.h>

#include <nlohmann/json.hpp>

#include "lmv/canon.hpp"
#include "lmv/rng.hpp"

using namespace lmv;
using canon::canonicalize;
using canon::normalize_key;
using canon::render;

namespace {

CanonValue at(const CanonicalFieldMap& m, const std::string& path) {
    auto it = m.find(KeyPath::parse(path));
    REQUIRE(it != m.end());
    return it->second;
}

// Random raw-JSON documents with controllable key order, so order
// insensitivity can be exercised (a DOM builder would already sort keys).
struct RawGen {
    SplitMix64 rng;

    explicit RawGen(std::uint64_t seed) : rng(seed) {}

    std::string key() {
        static const char* fragments[] = {"Total",  "amount", "vendor-name", "a.b",
                                          "IT[0]",  "x]y",    " sp  ed ",    "qty",
                                          "item",   "PO",     "%2E",         "n\xc3\xa4me"};
        std::string k = fragments[rng.next_below(std::size(fragments))];
        if (rng.next_u01() < 0.3) {
            k += "_";
            k += fragments[rng.next_below(std::size(fragments))];
        }
        return k;
    }

    std::string scalar() {
        switch (rng.next_below(9)) {
            case 0: return "\"ACME  Co \"";
            case 1: return "\" 1,234.50\"";
            case 2: return "\"007\"";
            case 3: return "\"\"";
            case 4: return std::to_string(static_cast<std::int64_t>(rng.next()) % 100000);
            case 5: {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.6g",
                              (static_cast<double>(rng.next_below(2000000)) - 1000000.0) / 997.0);
                return buf;
            }
            case 6: return rng.next_u01() < 0.5 ? "true" : "false";
            case 7: return "null";
            default: return "\"tok-" + std::to_string(rng.next_below(100000)) + "\"";
        }
    }

    std::string value(int depth, bool reverse) {
        double roll = rng.next_u01();
        if (depth >= 3 || roll < 0.55) return scalar();
        if (roll < 0.75) {
            std::size_t n = rng.next_below(3);
            std::string out = "[";
            for (std::size_t i = 0; i < n; ++i) {
                if (i) out += ",";
                out += value(depth + 1, reverse);
            }
            return out + "]";
        }
        return object(depth + 1, reverse);
    }

    std::string object(int depth, bool reverse) {
        std::size_t n = 1 + rng.next_below(4);
        std::vector<std::pair<std::string, std::string>> members;
        for (std::size_t i = 0; i < n; ++i)
            members.emplace_back(key() + std::to_string(i), value(depth, reverse));
        if (reverse) std::reverse(members.begin(), members.end());
        std::string out = "{";
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (i) out += ",";
            out += nlohmann::json(members[i].first).dump();
            out += ":";
            out += members[i].second;
        }
        return out + "}";
    }
};

}  // namespace

TEST_CASE("canonicalize flattens and normalizes") {
    auto m = canonicalize(R"({"Total Amount": "1,234.50"})");
    CHECK(m.size() == 1);
    CHECK(at(m, "total_amount") == CanonValue{CanonValue::Kind::string, "1234.50"});

    m = canonicalize(R"({"vendor":{"name":"  ACME  Co "}})");
    CHECK(at(m, "vendor.name") == CanonValue{CanonValue::Kind::string, "ACME Co"});

    m = canonicalize(R"({"items":[{"qty":2},{"qty":5}]})");
    CHECK(at(m, "items[0].qty") == CanonValue{CanonValue::Kind::number, "2"});
    CHECK(at(m, "items[1].qty") == CanonValue{CanonValue::Kind::number, "5"});
}

TEST_CASE("canonicalize rejects malformed and non-object input") {
    CHECK_THROWS_AS(canonicalize(R"({"items":[{"qty":2},{"qty":03}]})"), CanonError);
    try {
        canonicalize(R"({"a":)");
        FAIL("expected CanonError");
    } catch (const CanonError& e) {
        CHECK(e.code() == CanonError::Code::invalid_json);
    }
    try {
        canonicalize("[1, 2]");
        FAIL("expected CanonError");
    } catch (const CanonError& e) {
        CHECK(e.code() == CanonError::Code::not_an_object);
    }
    try {
        canonicalize("42");
        FAIL("expected CanonError");
    } catch (const CanonError& e) {
        CHECK(e.code() == CanonError::Code::not_an_object);
    }
}

TEST_CASE("canonicalize depth cap") {
    std::string deep, close;
    for (int i = 0; i < 33; ++i) {
        deep += "{\"k\":";
        close += "}";
    }
    deep += "1" + close;
    try {
        canonicalize(deep);
        FAIL("expected CanonError");
    } catch (const CanonError& e) {
        CHECK(e.code() == CanonError::Code::depth_exceeded);
    }
    // 32 levels are fine
    std::string ok_doc = "{\"k\":";
    std::string ok_close = "}";
    for (int i = 0; i < 31; ++i) {
        ok_doc += "{\"k\":";
        ok_close += "}";
    }
    ok_doc += "1" + ok_close;
    CHECK(canonicalize(ok_doc).size() == 1);
}

TEST_CASE("duplicate keys: last occurrence wins with a warning") {
    std::vector<std::string> warnings;
    auto m = canonicalize(R"({"a": 1, "a": 2})", &warnings);
    CHECK(at(m, "a") == CanonValue{CanonValue::Kind::number, "2"});
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("duplicate key") != std::string::npos);

    // A duplicate object discards the first subtree wholly.
    warnings.clear();
    m = canonicalize(R"({"a": {"x": 1}, "a": {"y": 2}})", &warnings);
    CHECK(m.size() == 1);
    CHECK(at(m, "a.y") == CanonValue{CanonValue::Kind::number, "2"});
    CHECK(warnings.size() == 1);
}

TEST_CASE("string numeric normalization") {
    auto val = [](const std::string& doc) { return at(canonicalize(doc), "k"); };
    CHECK(val(R"({"k": "1,234.50"})").text == "1234.50");   // commas stripped, digits kept
    CHECK(val(R"({"k": " 42 "})").text == "42");
    CHECK(val(R"({"k": "007"})").text == "007");            // ID-like, exempt
    CHECK(val(R"({"k": "0"})").text == "0");
    CHECK(val(R"({"k": "0.50"})").text == "0.50");
    CHECK(val(R"({"k": "-1,234.5"})").text == "-1234.5");
    CHECK(val(R"({"k": "1,23"})").text == "1,23");          // bad grouping: plain string
    CHECK(val(R"({"k": "+5"})").text == "+5");
    CHECK(val(R"({"k": "12 500"})").text == "12 500");      // internal space: not numeric
    for (const char* doc : {R"({"k": "1,234.50"})", R"({"k": "007"})"})
        CHECK(val(doc).kind == CanonValue::Kind::string);
}

TEST_CASE("number canonical text") {
    auto val = [](const std::string& doc) { return at(canonicalize(doc), "k"); };
    CHECK(val(R"({"k": 100.00})") == CanonValue{CanonValue::Kind::number, "100"});
    CHECK(val(R"({"k": 1e2})") == CanonValue{CanonValue::Kind::number, "100"});
    CHECK(val(R"({"k": 0.5})") == CanonValue{CanonValue::Kind::number, "0.5"});
    CHECK(val(R"({"k": -0.0})") == CanonValue{CanonValue::Kind::number, "0"});
    CHECK(val(R"({"k": 1e22})") == CanonValue{CanonValue::Kind::number, "10000000000000000000000"});
    CHECK(val(R"({"k": 1.5e-7})") == CanonValue{CanonValue::Kind::number, "0.00000015"});
    CHECK(val(R"({"k": -12.340})") == CanonValue{CanonValue::Kind::number, "-12.34"});
    CHECK(val(R"({"k": 18446744073709551615})") ==
          CanonValue{CanonValue::Kind::number, "18446744073709551615"});
    CHECK(val(R"({"k": -9223372036854775808})") ==
          CanonValue{CanonValue::Kind::number, "-9223372036854775808"});
}

TEST_CASE("key normalization") {
    CHECK(normalize_key("Total Amount") == "total_amount");
    CHECK(normalize_key("key-with-dash") == "key_with_dash");
    CHECK(normalize_key("a - b") == "a_b");
    CHECK(normalize_key("a.b") == "a%2Eb");
    CHECK(normalize_key("it[0]") == "it%5B0%5D");
    CHECK(normalize_key("") == "_");
    CHECK(normalize_key("-") == "_");
    CHECK(normalize_key("a_-_b") == "a___b");
    // normalize . normalize = normalize (escape triplets preserved verbatim)
    for (const char* raw : {"Total Amount", "a.b", "IT[0]", "x]y", "%2E", "a%2eb", "n\xc3\xa4me"}) {
        std::string once = normalize_key(raw);
        CHECK(normalize_key(once) == once);
    }
}

TEST_CASE("render basics") {
    CHECK(render({}) == "{}");

    CanonicalFieldMap m;
    m.emplace(KeyPath::parse("a"), CanonValue{CanonValue::Kind::number, "1"});
    m.emplace(KeyPath::parse("b.c"), CanonValue{CanonValue::Kind::string, "x"});
    CHECK(render(m) == "{\n  \"a\": 1,\n  \"b\": {\n    \"c\": \"x\"\n  }\n}");
}

TEST_CASE("render materializes array gaps with null") {
    CanonicalFieldMap m;
    m.emplace(KeyPath::parse("items[0].qty"), CanonValue{CanonValue::Kind::number, "2"});
    m.emplace(KeyPath::parse("items[2].qty"), CanonValue{CanonValue::Kind::number, "5"});
    std::string out = render(m);
    auto re = canonicalize(out);
    CHECK(re.size() == 3);
    CHECK(at(re, "items[0].qty") == CanonValue{CanonValue::Kind::number, "2"});
    CHECK(at(re, "items[1]") == CanonValue::null());
    CHECK(at(re, "items[2].qty") == CanonValue{CanonValue::Kind::number, "5"});
}

TEST_CASE("render path conflicts") {
    CanonicalFieldMap m;
    m.emplace(KeyPath::parse("a"), CanonValue{CanonValue::Kind::number, "1"});
    m.emplace(KeyPath::parse("a.b"), CanonValue{CanonValue::Kind::number, "2"});
    try {
        render(m);
        FAIL("expected CanonError");
    } catch (const CanonError& e) {
        CHECK(e.code() == CanonError::Code::path_conflict);
    }

    CanonicalFieldMap mixed;
    mixed.emplace(KeyPath::parse("a[0]"), CanonValue{CanonValue::Kind::number, "1"});
    mixed.emplace(KeyPath::parse("a.b"), CanonValue{CanonValue::Kind::number, "2"});
    CHECK_THROWS_AS(render(mixed), CanonError);
}

TEST_CASE("property: idempotence, order insensitivity, determinism, injectivity") {
    std::string previous_render;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        RawGen gen(0x5EED0000 + i);
        std::string raw = gen.object(0, false);
        RawGen gen2(0x5EED0000 + i);
        std::string raw_reversed = gen2.object(0, true);

        CanonicalFieldMap c1 = canonicalize(raw);

        // order insensitivity: same members, reversed order at every level
        CHECK(canonicalize(raw_reversed) == c1);

        // determinism
        CHECK(canonicalize(raw) == c1);
        std::string rendered = render(c1);
        CHECK(render(c1) == rendered);

        // idempotence: canonicalize . render . canonicalize = canonicalize
        CanonicalFieldMap c2 = canonicalize(rendered);
        CHECK(c2 == c1);

        // injectivity spot check: different canonical maps render differently
        if (i > 0 && !(c2 == canonicalize(previous_render)))
            CHECK(rendered != previous_render);
        previous_render = rendered;
    }
}

TEST_CASE("key path parse round trips") {
    for (const char* p : {"a", "a.b", "items[0].qty", "a[1][2].b", "total_amount"}) {
        KeyPath kp = KeyPath::parse(p);
        CHECK(kp.rendered() == p);
        CHECK(KeyPath::parse(kp.rendered()) == kp);
    }
    CHECK_THROWS_AS(KeyPath::parse(""), CanonError);
    CHECK_THROWS_AS(KeyPath::parse("a..b"), CanonError);
    CHECK_THROWS_AS(KeyPath::parse("a[x]"), CanonError);
    CHECK_THROWS_AS(KeyPath::parse("a[]"), CanonError);
}
