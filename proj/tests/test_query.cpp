#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "sigmacount/errors.hpp"
#include "sigmacount/query.hpp"
#include "sigmacount/random.hpp"
#include "sigmacount/schema.hpp"

using namespace sigmacount;

namespace {

SchemaPtr people_schema() {
    auto s = std::make_shared<Schema>();
    s->columns = {{"age", {"20s", "40s", "60s"}}, {"state", {"CA", "NY", "TX"}}};
    s->validate();
    return s;
}

SchemaPtr binary_schema(int p) {
    auto s = std::make_shared<Schema>();
    for (int c = 1; c <= p; ++c) s->columns.push_back({"c" + std::to_string(c), {"0", "1"}});
    s->validate();
    return s;
}

Database random_db(SchemaPtr schema, std::int64_t n, std::uint64_t seed) {
    std::vector<std::uint16_t> cells;
    const int p = schema->p();
    for (std::int64_t r = 0; r < n; ++r) {
        for (int c = 0; c < p; ++c) {
            const int d = schema->columns[c].domain_size();
            cells.push_back(static_cast<std::uint16_t>(
                rng::draw(seed, static_cast<std::uint64_t>(r) * p + c) % d));
        }
    }
    return Database(std::move(schema), std::move(cells));
}

// Uniformly random query: each column independently keeps a random
// non-empty subset of its domain.
Query random_query(const Schema& schema, std::uint64_t seed, std::uint64_t salt) {
    std::vector<std::pair<int, std::vector<std::uint16_t>>> cs;
    for (int c = 0; c < schema.p(); ++c) {
        const int d = schema.columns[c].domain_size();
        const std::uint64_t mask =
            rng::draw(seed, salt * 64 + static_cast<std::uint64_t>(c)) & ((1ull << d) - 1);
        if (mask == 0) continue;  // unconstrained stand-in
        std::vector<std::uint16_t> codes;
        for (int v = 0; v < d; ++v) {
            if (mask & (1ull << v)) codes.push_back(static_cast<std::uint16_t>(v));
        }
        cs.emplace_back(c, std::move(codes));
    }
    return Query::make(schema, std::move(cs));
}

std::set<std::int64_t> matching_rows(const Database& db, const Query& q) {
    std::set<std::int64_t> out;
    for (std::int64_t r = 0; r < db.n(); ++r) {
        if (q.row_matches(db.row_ptr(r))) out.insert(r);
    }
    return out;
}

}  // namespace

TEST_CASE("parse the two-column example") {
    auto s = people_schema();
    const Query q = parse_query("age IN {60s} AND state IN {CA}", *s);
    REQUIRE(q.constraints().size() == 2);
    CHECK(q.constraints()[0].first == 0);
    CHECK(q.constraints()[0].second == std::vector<std::uint16_t>{2});
    CHECK(q.constraints()[1].first == 1);
    CHECK(q.constraints()[1].second == std::vector<std::uint16_t>{0});
    CHECK(q.active_set() == std::vector<int>{0, 1});
}

TEST_CASE("empty text and star parse to the unconstrained query") {
    auto s = people_schema();
    CHECK(parse_query("", *s).unconstrained());
    CHECK(parse_query("   ", *s).unconstrained());
    CHECK(parse_query("*", *s).unconstrained());
}

TEST_CASE("contradiction and bad tokens are rejected by name") {
    auto s = binary_schema(2);
    CHECK_THROWS_AS(parse_query("c1 IN {1} AND c1 IN {0}", *s), ValidationError);
    try {
        parse_query("c9 IN {1}", *s);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("c9") != std::string::npos);
    }
    try {
        parse_query("c1 IN {7}", *s);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("7") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_query("c1 {1}", *s), ParseError);
    CHECK_THROWS_AS(parse_query("c1 IN {}", *s), Error);
}

TEST_CASE("repeated columns intersect") {
    auto s = people_schema();
    const Query q = parse_query("age IN {20s,60s} AND age IN {60s,40s}", *s);
    REQUIRE(q.constraints().size() == 1);
    CHECK(q.constraints()[0].second == std::vector<std::uint16_t>{2});
}

TEST_CASE("full-domain constraints are dropped from canonical form") {
    auto s = people_schema();
    const Query q = parse_query("age IN {20s,40s,60s} AND state IN {NY}", *s);
    REQUIRE(q.constraints().size() == 1);
    CHECK(q.constraints()[0].first == 1);
    CHECK(q.active_set() == std::vector<int>{1});
}

TEST_CASE("embedding bits") {
    auto s = binary_schema(4);
    CHECK(Query().embedding(*s) == std::vector<bool>{false, false, false, false});
    const Query q = Query::make(*s, {{0, {1}}, {2, {0}}});
    CHECK(q.embedding(*s) == std::vector<bool>{true, false, true, false});
}

TEST_CASE("exact_count basics") {
    auto s = people_schema();
    const Database db = load_csv_text(
        "age,state\n"
        "60s,CA\n"
        "60s,NY\n"
        "20s,CA\n"
        "60s,CA\n",
        s);
    CHECK(exact_count(db, Query()) == 4);
    CHECK(exact_count(db, parse_query("age IN {60s} AND state IN {CA}", *s)) == 2);
    const Database empty = load_csv_text("age,state\n", s);
    CHECK(exact_count(empty, parse_query("age IN {60s}", *s)) == 0);
}

TEST_CASE("exact_count matches a brute-force row scan") {
    auto s = binary_schema(3);
    const Database db = random_db(s, 50, 17);
    for (std::uint64_t t = 0; t < 200; ++t) {
        const Query q = random_query(*s, 23, t);
        std::int64_t brute = 0;
        for (std::int64_t r = 0; r < db.n(); ++r) {
            bool ok = true;
            for (const auto& [col, codes] : q.constraints()) {
                bool in = false;
                for (auto v : codes) in = in || v == db.cell(r, col);
                ok = ok && in;
            }
            if (ok) ++brute;
        }
        CHECK(exact_count(db, q) == brute);
    }
}

TEST_CASE("is_subset equals row-set inclusion on random pairs") {
    auto s = people_schema();
    const Database db = random_db(s, 200, 31);
    int subset_seen = 0;
    for (std::uint64_t t = 0; t < 1000; ++t) {
        const Query q1 = random_query(*s, 41, 2 * t);
        const Query q2 = random_query(*s, 41, 2 * t + 1);
        CHECK(is_subset(q1, q1));
        const bool sub = is_subset(q1, q2);
        if (sub) {
            ++subset_seen;
            const auto r1 = matching_rows(db, q1);
            const auto r2 = matching_rows(db, q2);
            CHECK(std::includes(r2.begin(), r2.end(), r1.begin(), r1.end()));
            CHECK(exact_count(db, q1) <= exact_count(db, q2));
        }
        // per-column inclusion is also necessary here: verify the negative
        // direction against row sets on a db that realizes every cell
        if (!sub) {
            bool per_col_sub = true;
            for (const auto& [col, codes] : q1.constraints()) {
                const auto* a2 = q2.allowed(col);
                if (a2 == nullptr) continue;
                per_col_sub =
                    per_col_sub && std::includes(a2->begin(), a2->end(), codes.begin(), codes.end());
            }
            for (const auto& [col, codes] : q2.constraints()) {
                if (q1.allowed(col) == nullptr) per_col_sub = false;
            }
            CHECK_FALSE(per_col_sub);
        }
    }
    CHECK(subset_seen > 10);  // the property must actually get exercised
    auto b = binary_schema(1);
    CHECK(is_subset(Query::make(*b, {{0, {1}}}), Query()));
}

TEST_CASE("parse-render round trip on random canonical queries") {
    auto s = people_schema();
    for (std::uint64_t t = 0; t < 300; ++t) {
        const Query q = random_query(*s, 59, t);
        const std::string text = render_query(q, *s);
        CHECK(parse_query(text, *s) == q);
    }
    CHECK(render_query(Query(), *s) == "*");
}

TEST_CASE("json round trip") {
    auto s = people_schema();
    const Query q = parse_query("age IN {20s,60s}", *s);
    const Query back = query_from_json(query_to_json(q, *s), *s);
    CHECK(back == q);
    CHECK(query_from_json("{}", *s).unconstrained());
    CHECK_THROWS_AS(query_from_json("{\"zz\": [\"1\"]}", *s), Error);
    CHECK_THROWS_AS(query_from_json("{\"age\": []}", *s), Error);
}

TEST_CASE("make validates codes against the schema") {
    auto s = binary_schema(2);
    CHECK_THROWS_AS(Query::make(*s, {{0, {2}}}), ValidationError);
    CHECK_THROWS_AS(Query::make(*s, {{5, {0}}}), ValidationError);
    CHECK_THROWS_AS(Query::make(*s, {{0, {}}}), ValidationError);
    // order-insensitive canonical form
    const Query a = Query::make(*s, {{1, {1, 0}}, {0, {1}}});
    const Query b = Query::make(*s, {{0, {1}}});
    CHECK(a == b);  // column 1's constraint was the full domain
    CHECK(a.key() == b.key());
}
