#include "sigmacount/evolving.hpp"

#include <cmath>

#include "sigmacount/errors.hpp"

namespace sigmacount {

namespace {

void validate_horizon_args(double eps, double rho, std::int64_t T) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw ValidationError("horizon: eps must be finite and positive");
    }
    if (!(rho >= 0.0 && rho <= 1.0)) {
        throw ValidationError("horizon: rho must lie in [0, 1]");
    }
    if (T < 1) throw ValidationError("horizon: T must be at least 1");
}

}  // namespace

double horizon_epsilon(double eps, double rho, std::int64_t T) {
    validate_horizon_args(eps, rho, T);
    if (rho == 0.0 || T == 1) return eps;
    const double te = static_cast<double>(T) * eps;
    if (rho == 1.0) return te;
    // log((1-rho) e^eps + rho e^(T eps)) with the large term factored out,
    // so the exponential never overflows. The argument of the log is below
    // one in exact arithmetic; the clamp only strips a one-ulp rounding
    // excess that would otherwise put the result above T*eps.
    const double inner = rho + (1.0 - rho) * std::exp(eps - te);
    return te + std::log(std::min(inner, 1.0));
}

double horizon_epsilon_approx(double eps, double rho, std::int64_t T) {
    validate_horizon_args(eps, rho, T);
    return eps * (1.0 + rho * static_cast<double>(T - 1));
}

EvolvingSession open_session(const Database& db, const Query& q, double eps, double rho,
                             std::int64_t t_max, PrivacyAccountant& accountant,
                             LaplaceSampler& sampler) {
    const double eps0 = horizon_epsilon(eps, rho, t_max);
    accountant.charge("evolving:T=" + std::to_string(t_max) + ":" + q.key(), eps0);

    EvolvingSession s;
    s.q = q;
    s.eps = eps;
    s.rho = rho;
    s.t_max = t_max;
    s.eps0_charged = eps0;
    s.baseline_exact = exact_count(db, q);
    s.baseline_noisy = static_cast<double>(s.baseline_exact) + sampler.sample(1.0 / eps);
    return s;
}

NoisyCount respond_t(EvolvingSession& session, const Database& db_t) {
    if (session.t > session.t_max) {
        throw ValidationError("evolving: horizon of " + std::to_string(session.t_max) +
                              " steps is exhausted");
    }
    // One draw serves the whole horizon; only the exact drift is added.
    const std::int64_t n_t = exact_count(db_t, session.q);
    NoisyCount out;
    out.value = session.baseline_noisy +
                static_cast<double>(n_t - session.baseline_exact);
    out.epsilon_charged = 0.0;
    out.truncated = false;
    ++session.t;
    return out;
}

}  // namespace sigmacount
