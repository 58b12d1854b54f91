#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sigmacount/evolving.hpp"
#include "sigmacount/grouping.hpp"
#include "sigmacount/mechanism.hpp"
#include "sigmacount/sigma.hpp"

namespace sigmacount {

struct EngineConfig {
    double epsilon_budget = 1.0;
    double epsilon_per_query = 0.01;  // fallback charge for uncovered queries
    std::uint64_t seed = 0;
    bool round_output = false;
    int threshold_u = 2;
    std::uint64_t cell_cap = kDefaultCellCap;
};

struct EngineStats {
    std::int64_t covered = 0;
    std::int64_t uncovered = 0;
    std::int64_t rejected = 0;

    double observed_uncovered_fraction() const {
        const std::int64_t answered = covered + uncovered;
        return answered == 0 ? 0.0 : static_cast<double>(uncovered) / answered;
    }
};

enum class ResponsePath { Sigma, Benchmark, Refused };

struct HandleResult {
    NoisyCount count;        // zeroed when refused
    ResponsePath path = ResponsePath::Refused;
    double remaining_budget = 0.0;
};

struct RefreshResult {
    int new_algebras = 0;
    std::int64_t new_atoms = 0;
    double charged = 0.0;
    bool budget_refused = false;  // plan existed but the charge was refused
};

// Online router. Covered queries are answered from materialized algebras
// at zero marginal charge and repeat byte-identically; uncovered queries
// fall back to per-query release at epsilon_per_query with fresh noise on
// every repeat; once the budget cannot cover a fallback the request is
// refused with no state change.
class Engine {
  public:
    Engine(Database db, EngineConfig cfg);

    // Order matters: algebras are consulted first-match in insertion order.
    void add_algebra(SigmaAlgebraPtr sa);

    HandleResult handle(const Query& q);

    // Re-plans clusters from the not-yet-covered part of the history at
    // the given threshold and materializes the new algebras atomically.
    // Existing coverage is never re-charged; nothing is ever retired.
    RefreshResult refresh(int threshold_u);

    std::int64_t open_session(const Query& q, double eps, double rho, std::int64_t t_max);
    NoisyCount session_respond(std::int64_t session_id);

    void apply_delta(const RowDelta& delta);

    const Database& db() const { return db_; }
    const EngineConfig& config() const { return cfg_; }
    const EngineStats& stats() const { return stats_; }
    PrivacyAccountant& accountant() { return acct_; }
    const PrivacyAccountant& accountant() const { return acct_; }
    const std::vector<SigmaAlgebraPtr>& algebras() const { return algebras_; }
    const std::deque<Query>& history() const { return history_; }
    const std::map<std::int64_t, EvolvingSession>& sessions() const { return sessions_; }

    // Equal-budget advantage condition for online routing with an
    // uncovered-traffic fraction p:
    //   Q > (sum_k omega_k) * sqrt(max_k omega_k) / (1 - p).
    // p may be the observed fraction from stats or a planner's forecast.
    static bool online_advantage_condition(std::uint64_t q_count,
                                           const std::vector<std::int64_t>& omega_sizes,
                                           double p);

  private:
    void remember(const Query& q);

    Database db_;
    EngineConfig cfg_;
    PrivacyAccountant acct_;
    std::vector<SigmaAlgebraPtr> algebras_;
    LaplaceSampler fallback_;
    LaplaceSampler materialize_;
    std::uint64_t materialize_epoch_ = 0;
    std::deque<Query> history_;          // answered queries only, FIFO
    static constexpr std::size_t kHistoryCap = 1'000'000;
    EngineStats stats_;
    CoverScratch scratch_;
    std::map<std::int64_t, EvolvingSession> sessions_;
    std::int64_t next_session_ = 1;
};

// One newline-delimited JSON request in, one JSON line out.
//   {"id":..,"query":{..}}            -> {"id","value","charged","path","remaining_budget"}
//   {"op":"refresh","u":N}            -> {"op","new_algebras","new_atoms","charged"}
//   {"op":"stats"}                    -> counters, budget, observed p
//   {"op":"open_session","query":{..},"eps":..,"rho":..,"T":..}
//                                     -> {"op","session","epsilon0"}
//   {"op":"respond","session":N}      -> {"session","t","value"}
//   {"op":"delta","kind":"insert"|"delete","row":[..],"time_step":N}
// Malformed requests produce {"error": "..."} and the loop continues.
std::string serve_one(Engine& engine, const std::string& request_line);

// Reads requests until EOF. Returns the number of requests served.
std::int64_t serve_stdio(Engine& engine, std::istream& in, std::ostream& out);

}  // namespace sigmacount
