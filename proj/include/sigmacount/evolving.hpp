#pragma once

#include <cstdint>

#include "sigmacount/mechanism.hpp"
#include "sigmacount/query.hpp"
#include "sigmacount/random.hpp"
#include "sigmacount/schema.hpp"

namespace sigmacount {

// Privacy charge for answering one query at every step of a horizon of T
// database versions, when a row changes between consecutive versions with
// probability rho:  log((1-rho) e^eps + rho e^(T eps)).
// Exact at the edges: rho=0 gives eps, rho=1 gives T*eps, T=1 gives eps.
double horizon_epsilon(double eps, double rho, std::int64_t T);

// First-order approximation eps * (1 + rho (T - 1)); accurate for small
// rho and small T*eps.
double horizon_epsilon_approx(double eps, double rho, std::int64_t T);

// One query tracked across database versions. The noisy baseline is drawn
// once at open; every later response adds the exact count delta against
// the baseline version, so repeated responses reuse the same single draw.
struct EvolvingSession {
    Query q;
    double baseline_noisy = 0.0;
    std::int64_t baseline_exact = 0;
    double eps = 0.0;
    double rho = 0.0;
    std::int64_t t_max = 1;
    std::int64_t t = 1;          // step the next respond will serve
    double eps0_charged = 0.0;
};

// Charges horizon_epsilon(eps, rho, t_max) up front as one ledger entry,
// then draws the baseline release at the current database. Throws on
// rho outside [0,1], t_max < 1, or nonpositive eps.
EvolvingSession open_session(const Database& db, const Query& q, double eps, double rho,
                             std::int64_t t_max, PrivacyAccountant& accountant,
                             LaplaceSampler& sampler);

// Response for the session's next step against db_t:
// baseline_noisy + N_t(q) - N_1(q). No charge, no new noise. Advances the
// step; throws ValidationError once the horizon is exhausted.
NoisyCount respond_t(EvolvingSession& session, const Database& db_t);

}  // namespace sigmacount
