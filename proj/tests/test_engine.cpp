#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigmacount/engine.hpp"
#include "sigmacount/errors.hpp"
#include "sigmacount/harness.hpp"
#include "sigmacount/query.hpp"

using namespace sigmacount;
using nlohmann::json;

namespace {

std::unique_ptr<Engine> covered_engine(const Database& db, double budget = 10.0) {
    EngineConfig cfg;
    cfg.epsilon_budget = budget;
    cfg.epsilon_per_query = 0.01;
    cfg.seed = 5;
    auto e = std::make_unique<Engine>(db, cfg);
    // one algebra splitting column 0, perturbed outside the engine budget
    std::vector<Query> fam = {Query::make(db.schema(), {{0, {0}}}),
                              Query::make(db.schema(), {{0, {1}}})};
    PrivacyAccountant side(1e6);
    LaplaceSampler smp(99);
    auto sa = std::make_shared<SigmaAlgebra>(
        perturb_atoms(induce(fam, db.schema_ptr()), db, 0.05, side, smp));
    e->add_algebra(sa);
    return e;
}

}  // namespace

TEST_CASE("covered queries are free and replay byte-identically") {
    const Database db = harness::gen_sim_db(500, 4, 201);
    auto ep = covered_engine(db);
    Engine& e = *ep;
    const Query q = Query::make(db.schema(), {{0, {1}}});

    const HandleResult r1 = e.handle(q);
    CHECK(r1.path == ResponsePath::Sigma);
    CHECK(r1.count.epsilon_charged == 0.0);
    CHECK(r1.remaining_budget == e.config().epsilon_budget);

    const HandleResult r2 = e.handle(q);
    CHECK(r2.count.value == r1.count.value);
    CHECK(e.stats().covered == 2);
    CHECK(e.stats().uncovered == 0);
    CHECK(e.accountant().spent() == 0.0);
}

TEST_CASE("uncovered queries fall back with fresh noise") {
    const Database db = harness::gen_sim_db(500, 4, 202);
    auto ep = covered_engine(db);
    Engine& e = *ep;
    const Query q = Query::make(db.schema(), {{2, {1}}});  // column no algebra splits

    const HandleResult r1 = e.handle(q);
    CHECK(r1.path == ResponsePath::Benchmark);
    CHECK(r1.count.epsilon_charged == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(r1.remaining_budget == doctest::Approx(10.0 - 0.01).epsilon(1e-9));

    const HandleResult r2 = e.handle(q);
    CHECK(r2.count.value != r1.count.value);  // independent draws
    CHECK(e.stats().uncovered == 2);
    CHECK(e.accountant().spent() == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(e.history().size() == 2);
}

TEST_CASE("refusal zeroes the response and leaves no trace") {
    const Database db = harness::gen_sim_db(100, 3, 203);
    EngineConfig cfg;
    cfg.epsilon_budget = 0.015;
    cfg.epsilon_per_query = 0.01;
    Engine e(db, cfg);
    const Query q = Query::make(db.schema(), {{0, {1}}});

    CHECK(e.handle(q).path == ResponsePath::Benchmark);
    const HandleResult refused = e.handle(q);  // would need another 0.01
    CHECK(refused.path == ResponsePath::Refused);
    CHECK(refused.count.value == 0.0);
    CHECK(refused.count.epsilon_charged == 0.0);
    CHECK(e.stats().rejected == 1);
    CHECK(e.accountant().spent() == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(e.history().size() == 1);  // refused queries are not remembered
}

TEST_CASE("refresh materializes coverage from history") {
    const Database db = harness::gen_sim_db(400, 5, 204);
    EngineConfig cfg;
    cfg.epsilon_budget = 5.0;
    cfg.epsilon_per_query = 0.01;
    cfg.seed = 9;
    Engine e(db, cfg);

    // empty history: nothing to do
    const RefreshResult r0 = e.refresh(2);
    CHECK(r0.new_algebras == 0);
    CHECK(r0.new_atoms == 0);
    CHECK(r0.charged == 0.0);
    CHECK_FALSE(r0.budget_refused);

    const Query q = Query::make(db.schema(), {{1, {1}}});
    for (int i = 0; i < 100; ++i) e.handle(q);
    const double fallback_spend = e.accountant().spent();
    CHECK(fallback_spend == doctest::Approx(1.0).epsilon(1e-9));

    const RefreshResult r1 = e.refresh(2);
    CHECK(r1.new_algebras == 1);
    CHECK(r1.new_atoms == 1);  // one distinct query induces its own atom
    CHECK(r1.charged == doctest::Approx(0.01).epsilon(1e-12));

    // the repeat traffic is now covered and free
    const double spent_before = e.accountant().spent();
    const HandleResult rep1 = e.handle(q);
    const HandleResult rep2 = e.handle(q);
    CHECK(rep1.path == ResponsePath::Sigma);
    CHECK(rep1.count.value == rep2.count.value);
    CHECK(e.accountant().spent() == spent_before);

    // a second refresh finds nothing new to cover
    const RefreshResult r2 = e.refresh(2);
    CHECK(r2.new_algebras == 0);
    CHECK(r2.charged == 0.0);
}

TEST_CASE("refresh respects the clustering threshold") {
    const Database db = harness::gen_sim_db(300, 6, 205);
    EngineConfig cfg;
    cfg.epsilon_budget = 50.0;
    cfg.epsilon_per_query = 0.01;
    Engine e(db, cfg);

    // two narrow queries on distinct columns and one wide three-column query
    const Query a = Query::make(db.schema(), {{0, {1}}});
    const Query b = Query::make(db.schema(), {{1, {0}}});
    const Query wide = Query::make(db.schema(), {{2, {1}}, {3, {1}}, {4, {0}}});
    e.handle(a);
    e.handle(b);
    e.handle(wide);

    const RefreshResult r = e.refresh(2);
    CHECK(r.new_algebras == 2);  // the wide query stays on the fallback path

    CHECK(e.handle(a).path == ResponsePath::Sigma);
    CHECK(e.handle(b).path == ResponsePath::Sigma);
    CHECK(e.handle(wide).path == ResponsePath::Benchmark);
}

TEST_CASE("refresh refuses atomically when the budget cannot cover the plan") {
    const Database db = harness::gen_sim_db(200, 4, 206);
    EngineConfig cfg;
    cfg.epsilon_budget = 0.025;
    cfg.epsilon_per_query = 0.01;
    Engine e(db, cfg);

    const Query a = Query::make(db.schema(), {{0, {1}}});
    const Query b = Query::make(db.schema(), {{1, {1}}});
    e.handle(a);
    e.handle(b);
    const double spent = e.accountant().spent();
    CHECK(spent == doctest::Approx(0.02).epsilon(1e-12));

    // the plan needs 2 atoms * 0.01 = 0.02 but only 0.005 remains
    const RefreshResult r = e.refresh(2);
    CHECK(r.budget_refused);
    CHECK(r.new_algebras == 0);
    CHECK(r.charged == 0.0);
    CHECK(e.accountant().spent() == spent);
    CHECK(e.algebras().empty());
}

TEST_CASE("ledger equals materialization plus fallback charges exactly") {
    const Database db = harness::gen_sim_db(1000, 6, 207);
    EngineConfig cfg;
    cfg.epsilon_budget = 8.0;
    cfg.epsilon_per_query = 0.01;
    cfg.seed = 77;
    Engine e(db, cfg);

    harness::WorkloadSpec spec;
    spec.n_queries = 600;
    spec.p_cols = 6;
    spec.seed = 31;
    const auto queries = harness::gen_queries(spec, db.schema());

    std::int64_t uncovered = 0;
    double materialized = 0.0;
    double session_charges = 0.0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const HandleResult r = e.handle(queries[i]);
        if (r.path == ResponsePath::Benchmark) ++uncovered;
        if (i == 199 || i == 399) {
            const RefreshResult rr = e.refresh(2);
            materialized += rr.charged;
        }
        if (i == 300) {
            const std::int64_t sid = e.open_session(queries[i], 0.02, 0.1, 5);
            session_charges += e.sessions().at(sid).eps0_charged;
            e.session_respond(sid);
        }
    }
    const double expected = uncovered * cfg.epsilon_per_query + materialized + session_charges;
    CHECK(e.accountant().spent() == doctest::Approx(expected).epsilon(1e-9));
    CHECK(e.accountant().spent() <= cfg.epsilon_budget);
    CHECK(e.stats().covered + e.stats().uncovered + e.stats().rejected ==
          static_cast<std::int64_t>(queries.size()));
}

TEST_CASE("online advantage condition") {
    const std::vector<std::int64_t> tens = {10, 10};
    // p = 0 coincides with the grouped condition
    CHECK(Engine::online_advantage_condition(64, tens, 0.0));
    CHECK_FALSE(Engine::online_advantage_condition(63, tens, 0.0));
    // at p = 0.5 the threshold doubles: 126.4..., so 127 clears it
    CHECK(Engine::online_advantage_condition(127, tens, 0.5));
    CHECK_FALSE(Engine::online_advantage_condition(126, tens, 0.5));
    // all traffic uncovered: the algebra can never win
    CHECK_FALSE(Engine::online_advantage_condition(1000000, tens, 1.0));

    CHECK_THROWS_AS(Engine::online_advantage_condition(10, tens, -0.01), ValidationError);
    CHECK_THROWS_AS(Engine::online_advantage_condition(10, tens, 1.01), ValidationError);
}

TEST_CASE("sessions route through the engine accountant") {
    const Database db = harness::gen_sim_db(300, 4, 208);
    EngineConfig cfg;
    cfg.epsilon_budget = 1.0;
    cfg.epsilon_per_query = 0.01;
    Engine e(db, cfg);
    const Query q = Query::make(db.schema(), {{0, {1}}});

    const std::int64_t sid = e.open_session(q, 0.1, 0.0, 3);
    CHECK(e.accountant().spent() == doctest::Approx(0.1).epsilon(1e-12));
    const NoisyCount v1 = e.session_respond(sid);
    const NoisyCount v2 = e.session_respond(sid);
    CHECK(v1.value == v2.value);  // unchanged table
    e.session_respond(sid);
    CHECK_THROWS_AS(e.session_respond(sid), ValidationError);    // horizon spent
    CHECK_THROWS_AS(e.session_respond(sid + 99), ValidationError);  // unknown id
    CHECK(e.accountant().spent() == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("engine deltas bump the version and shift later answers") {
    const Database db = harness::gen_sim_db(100, 3, 209);
    EngineConfig cfg;
    cfg.epsilon_budget = 1e12;
    cfg.epsilon_per_query = 1e9;  // effectively noiseless fallback
    Engine e(db, cfg);
    const Query q = Query::make(db.schema(), {{0, {1}}});
    const std::uint64_t v0 = e.db().version();

    const double before = e.handle(q).count.value;
    for (int i = 0; i < 7; ++i) e.apply_delta({RowDelta::Kind::Insert, {"1", "0", "0"}, i});
    CHECK(e.db().version() == v0 + 7);
    const double after = e.handle(q).count.value;
    CHECK(after == doctest::Approx(before + 7.0).epsilon(1e-6));
}

TEST_CASE("serve answers the full line protocol") {
    const Database db = harness::gen_sim_db(400, 4, 210);
    auto ep = covered_engine(db, 2.0);
    Engine& e = *ep;

    // covered query
    json req = {{"id", "q1"}, {"query", {{"c1", {"1"}}}}};
    json rsp = json::parse(serve_one(e, req.dump()));
    CHECK(rsp["id"] == "q1");
    CHECK(rsp["path"] == "sigma");
    CHECK(rsp["charged"] == 0.0);
    CHECK(rsp["remaining_budget"] == 2.0);
    CHECK(rsp["value"].is_number());

    // uncovered query charges the fallback price
    req = {{"id", "q2"}, {"query", {{"c3", {"0"}}}}};
    rsp = json::parse(serve_one(e, req.dump()));
    CHECK(rsp["path"] == "benchmark");
    CHECK(rsp["charged"] == doctest::Approx(0.01));

    // stats reflect the two answered queries
    rsp = json::parse(serve_one(e, R"({"op":"stats"})"));
    CHECK(rsp["covered"] == 1);
    CHECK(rsp["uncovered"] == 1);
    CHECK(rsp["rejected"] == 0);
    CHECK(rsp["observed_uncovered_fraction"] == doctest::Approx(0.5));

    // refresh covers the uncovered history
    rsp = json::parse(serve_one(e, R"({"op":"refresh","u":2})"));
    CHECK(rsp["op"] == "refresh");
    CHECK(rsp["new_algebras"] == 1);
    CHECK(rsp["new_atoms"] == 1);
    req = {{"id", "q3"}, {"query", {{"c3", {"0"}}}}};
    rsp = json::parse(serve_one(e, req.dump()));
    CHECK(rsp["path"] == "sigma");

    // evolving session round trip
    req = {{"op", "open_session"}, {"query", {{"c2", {"1"}}}}, {"eps", 0.05},
           {"rho", 0.0}, {"T", 2}};
    rsp = json::parse(serve_one(e, req.dump()));
    CHECK(rsp["op"] == "open_session");
    CHECK(rsp["epsilon0"] == doctest::Approx(0.05));
    const std::int64_t sid = rsp["session"].get<std::int64_t>();
    rsp = json::parse(serve_one(e, json{{"op", "respond"}, {"session", sid}}.dump()));
    CHECK(rsp["session"] == sid);
    CHECK(rsp["t"] == 1);
    CHECK(rsp["value"].is_number());

    // delta
    rsp = json::parse(serve_one(
        e, R"({"op":"delta","kind":"insert","row":["1","1","0","0"],"time_step":1})"));
    CHECK(rsp.contains("version"));

    // errors keep the loop alive
    CHECK(json::parse(serve_one(e, R"({"op":"nope"})")).contains("error"));
    CHECK(json::parse(serve_one(e, "not json at all")).contains("error"));
    CHECK(json::parse(serve_one(e, R"({"id":"x"})")).contains("error"));
}

TEST_CASE("serve_stdio pumps lines until eof") {
    const Database db = harness::gen_sim_db(200, 4, 211);
    auto ep = covered_engine(db, 2.0);
    Engine& e = *ep;

    std::istringstream in(
        "{\"id\":\"a\",\"query\":{\"c1\":[\"0\"]}}\n"
        "garbage\n"
        "{\"op\":\"stats\"}\n");
    std::ostringstream out;
    const std::int64_t served = serve_stdio(e, in, out);
    CHECK(served == 3);

    std::istringstream lines(out.str());
    std::string l1, l2, l3;
    std::getline(lines, l1);
    std::getline(lines, l2);
    std::getline(lines, l3);
    CHECK(json::parse(l1)["id"] == "a");
    CHECK(json::parse(l2).contains("error"));
    CHECK(json::parse(l3)["covered"] == 1);
}

TEST_CASE("round_output rounds served values only") {
    const Database db = harness::gen_sim_db(300, 3, 212);
    EngineConfig cfg;
    cfg.epsilon_budget = 5.0;
    cfg.epsilon_per_query = 0.5;
    cfg.round_output = true;
    Engine e(db, cfg);

    json req = {{"id", "r"}, {"query", {{"c1", {"1"}}}}};
    const json rsp = json::parse(serve_one(e, req.dump()));
    const double v = rsp["value"].get<double>();
    CHECK(v == std::nearbyint(v));

    // the in-process result is left unrounded for composition
    const HandleResult hr = e.handle(Query::make(db.schema(), {{1, {1}}}));
    CHECK(hr.count.value != std::nearbyint(hr.count.value));
}
