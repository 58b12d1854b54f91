#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sigmacount/errors.hpp"
#include "sigmacount/evolving.hpp"
#include "sigmacount/harness.hpp"
#include "sigmacount/mechanism.hpp"
#include "sigmacount/random.hpp"

using namespace sigmacount;

TEST_CASE("horizon charge formula at the edges and the worked value") {
    CHECK(horizon_epsilon(0.5, 0.0, 7) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(horizon_epsilon(0.5, 0.3, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(horizon_epsilon(0.2, 1.0, 6) == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(horizon_epsilon(0.01, 0.1, 10) == doctest::Approx(0.019373).epsilon(1e-4));
    // sharper: direct evaluation of log(0.9 e^0.01 + 0.1 e^0.1)
    const double direct = std::log(0.9 * std::exp(0.01) + 0.1 * std::exp(0.1));
    CHECK(horizon_epsilon(0.01, 0.1, 10) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("horizon charge never exceeds paying every step") {
    for (double eps : {0.001, 0.01, 0.1, 0.5, 1.0}) {
        for (double rho : {0.0, 0.05, 0.3, 0.7, 1.0}) {
            for (std::int64_t T : {1, 2, 5, 10, 50}) {
                const double e0 = horizon_epsilon(eps, rho, T);
                CHECK(e0 <= T * eps + 1e-12);
                CHECK(e0 >= eps - 1e-12);
            }
        }
    }
}

TEST_CASE("horizon charge is monotone in each argument") {
    double prev = 0.0;
    for (std::int64_t T = 1; T <= 30; ++T) {
        const double e0 = horizon_epsilon(0.05, 0.2, T);
        CHECK(e0 >= prev);
        prev = e0;
    }
    prev = 0.0;
    for (double rho = 0.0; rho <= 1.0001; rho += 0.05) {
        const double e0 = horizon_epsilon(0.05, std::min(rho, 1.0), 12);
        CHECK(e0 >= prev - 1e-15);
        prev = e0;
    }
}

TEST_CASE("horizon charge argument validation") {
    CHECK_THROWS_AS(horizon_epsilon(0.0, 0.1, 5), ValidationError);
    CHECK_THROWS_AS(horizon_epsilon(-1.0, 0.1, 5), ValidationError);
    CHECK_THROWS_AS(horizon_epsilon(0.1, -0.01, 5), ValidationError);
    CHECK_THROWS_AS(horizon_epsilon(0.1, 1.01, 5), ValidationError);
    CHECK_THROWS_AS(horizon_epsilon(0.1, 0.1, 0), ValidationError);
}

TEST_CASE("first-order approximation tracks the exact charge") {
    CHECK(horizon_epsilon_approx(0.3, 0.0, 9) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(horizon_epsilon_approx(0.3, 0.4, 1) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(horizon_epsilon_approx(0.01, 0.1, 10) == doctest::Approx(0.019).epsilon(1e-12));

    // within 5% relative error in the small-charge regime
    for (double eps : {0.001, 0.005}) {
        for (double rho : {0.01, 0.05, 0.15}) {
            for (std::int64_t T : {2, 5, 10, 19}) {
                if (T * eps >= 0.1) continue;
                const double exact = horizon_epsilon(eps, rho, T);
                const double approx = horizon_epsilon_approx(eps, rho, T);
                CHECK(std::fabs(approx - exact) / exact < 0.05);
            }
        }
    }
}

TEST_CASE("open session charges the horizon price and baselines the query") {
    const Database db = harness::gen_sim_db(400, 4, 71);
    const Query q = Query::make(db.schema(), {{0, {1}}});
    const std::int64_t truth = exact_count(db, q);

    PrivacyAccountant acct(1e13);
    LaplaceSampler smp(31);
    EvolvingSession s = open_session(db, q, 1e9, 0.0, 5, acct, smp);
    CHECK(std::fabs(s.baseline_noisy - static_cast<double>(truth)) < 1e-6);
    CHECK(s.baseline_exact == truth);
    CHECK(s.t == 1);
    CHECK(s.t_max == 5);

    // rho = 0 charges exactly eps regardless of horizon
    PrivacyAccountant acct2(1.0);
    LaplaceSampler smp2(32);
    EvolvingSession s2 = open_session(db, q, 0.25, 0.0, 50, acct2, smp2);
    CHECK(s2.eps0_charged == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(acct2.spent() == doctest::Approx(0.25).epsilon(1e-12));

    // the worked horizon price
    PrivacyAccountant acct3(1.0);
    LaplaceSampler smp3(33);
    EvolvingSession s3 = open_session(db, q, 0.01, 0.1, 10, acct3, smp3);
    CHECK(acct3.spent() == doctest::Approx(0.019373).epsilon(1e-4));
    CHECK(s3.eps0_charged == doctest::Approx(horizon_epsilon(0.01, 0.1, 10)).epsilon(1e-12));

    // refusal happens before any draw
    PrivacyAccountant tight(0.1);
    LaplaceSampler smp4(34);
    CHECK_THROWS_AS(open_session(db, q, 0.5, 0.1, 4, tight, smp4), BudgetExhaustedError);
    CHECK(smp4.position() == 0);

    CHECK_THROWS_AS(open_session(db, q, 0.5, -0.1, 4, acct, smp), ValidationError);
    CHECK_THROWS_AS(open_session(db, q, 0.5, 0.1, 0, acct, smp), ValidationError);
    CHECK_THROWS_AS(open_session(db, q, 0.0, 0.1, 4, acct, smp), ValidationError);
}

TEST_CASE("responses ride the baseline draw across versions") {
    const Database db = harness::gen_sim_db(300, 3, 72);
    const Query q = Query::make(db.schema(), {{1, {1}}});
    PrivacyAccountant acct(5.0);
    LaplaceSampler smp(41);
    EvolvingSession s = open_session(db, q, 0.5, 0.2, 4, acct, smp);
    const double spent_after_open = acct.spent();

    // step 1 returns the baseline itself
    const NoisyCount r1 = respond_t(s, db);
    CHECK(r1.value == s.baseline_noisy);
    CHECK(r1.epsilon_charged == 0.0);
    CHECK(s.t == 2);

    // an unchanged database at step 2 reproduces step 1 exactly
    const NoisyCount r2 = respond_t(s, db);
    CHECK(r2.value == r1.value);

    // five new matching rows shift the response by exactly five
    const RowDelta ins{RowDelta::Kind::Insert, {"0", "1", "0"}, 0};
    Database db3 = db;
    for (int i = 0; i < 5; ++i) db3 = apply_delta(db3, ins);
    const NoisyCount r3 = respond_t(s, db3);
    CHECK(r3.value == doctest::Approx(r1.value + 5.0).epsilon(1e-12));

    // horizon exhausted after t_max responses
    respond_t(s, db3);
    CHECK_THROWS_AS(respond_t(s, db3), ValidationError);

    // no response ever charged anything
    CHECK(acct.spent() == spent_after_open);
}

TEST_CASE("sessions are deterministic given seed and position") {
    const Database db = harness::gen_sim_db(200, 3, 73);
    const Query q = Query::make(db.schema(), {{0, {0}}});
    PrivacyAccountant a1(5.0), a2(5.0);
    LaplaceSampler s1(55), s2(55);
    EvolvingSession e1 = open_session(db, q, 0.3, 0.1, 3, a1, s1);
    EvolvingSession e2 = open_session(db, q, 0.3, 0.1, 3, a2, s2);
    CHECK(e1.baseline_noisy == e2.baseline_noisy);
    CHECK(respond_t(e1, db).value == respond_t(e2, db).value);
}

TEST_CASE("interleaved sessions see deltas in order") {
    const Database base = harness::gen_sim_db(250, 3, 74);
    const Query qa = Query::make(base.schema(), {{0, {1}}});
    const Query qb = Query::make(base.schema(), {{2, {0}}});
    PrivacyAccountant acct(50.0);
    LaplaceSampler smp(61);

    EvolvingSession sa = open_session(base, qa, 0.4, 0.1, 3, acct, smp);
    const double a1 = respond_t(sa, base).value;

    const RowDelta hit_a{RowDelta::Kind::Insert, {"1", "0", "1"}, 0};  // matches qa, not qb
    const Database v2 = apply_delta(base, hit_a);

    // a second session opened against the newer version bakes the new row
    // into its baseline, while the first session sees it as a delta
    EvolvingSession sb = open_session(v2, qb, 0.4, 0.1, 3, acct, smp);
    const double b1 = respond_t(sb, v2).value;
    const double a2 = respond_t(sa, v2).value;
    CHECK(a2 == doctest::Approx(a1 + 1.0).epsilon(1e-12));

    const RowDelta hit_b{RowDelta::Kind::Insert, {"0", "0", "0"}, 0};  // matches qb, not qa
    const Database v3 = apply_delta(v2, hit_b);
    const double b2 = respond_t(sb, v3).value;
    const double a3 = respond_t(sa, v3).value;
    CHECK(b2 == doctest::Approx(b1 + 1.0).epsilon(1e-12));
    CHECK(a3 == doctest::Approx(a2).epsilon(1e-12));  // qa unaffected by the qb row
}
