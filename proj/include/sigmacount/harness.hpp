#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sigmacount/metrics.hpp"
#include "sigmacount/query.hpp"
#include "sigmacount/schema.hpp"

namespace sigmacount {
namespace harness {

// Simulation workload: per query and per column an independent draw of
// constrain-to-1 / constrain-to-0 / leave-unconstrained.
struct WorkloadSpec {
    std::int64_t n_queries = 0;
    int p_cols = 0;
    double p_one = 0.05;
    double p_zero = 0.05;
    double p_both = 0.90;
    std::uint64_t seed = 0;

    void validate() const;
    double p_active() const { return p_one + p_zero; }
};

// n x p binary table with i.i.d. fair-coin entries; columns c1..cp over
// domain {"0","1"}.
Database gen_sim_db(std::int64_t n, int p_cols, std::uint64_t seed);

// Query i is a pure function of (spec.seed, i), so a longer workload from
// the same seed extends a shorter one entry for entry.
std::vector<Query> gen_queries(const WorkloadSpec& spec, const Schema& schema);
Query gen_query_at(const WorkloadSpec& spec, const Schema& schema, std::int64_t index);

// Nested pairs (q1, q2) with q1 a subset of q2: q2 is drawn from the
// workload, then exactly one uniformly chosen unconstrained column of q2
// is tightened to a random single value. When q2 constrains every column
// there is nothing to tighten and q1 = q2. Every emitted pair passes
// is_subset(q1, q2).
std::vector<std::pair<Query, Query>> gen_nested_pairs(const WorkloadSpec& spec,
                                                      const Schema& schema);

struct MonotonicityConfig {
    std::vector<int> widths = {11, 21};
    std::vector<double> budgets = {100.0, 10.0, 1.0};
    std::int64_t rows = 100000;
    std::int64_t pairs = 10000;
    std::uint64_t seed = 42;
    bool include_sigma = true;   // the per-atom arm is pricier; gate it
    std::uint64_t cell_cap = 1ull << 22;
    std::optional<std::string> real_csv;  // optional pre-encoded binary table
};

// For each (dataset, width, budget): answers every pair twice, once per
// query at eps = budget / (2 * pairs), and once through the algebra the
// pair itself induces, at the same per-release epsilon, so both arms
// spend the same budget per released value. Reports both realized
// violation rates.
metrics::Report run_monotonicity_study(const MonotonicityConfig& cfg);

struct UtilityConfig {
    std::vector<int> widths = {11, 21};
    std::vector<int> thresholds = {1, 2, 3};
    std::vector<std::int64_t> query_counts = {100000, 1000000};
    std::int64_t rows = 100000;
    double budget = 1.0;
    std::uint64_t seed = 42;
    std::optional<std::string> real_csv;
};

// For each (width, u, Q): plans clusters at threshold u over a Q-query
// workload, allocates eps_atom by the equal-budget rule with the
// workload's analytic residual mass, and reports
//   relative_utility          benchmark MSE / grouped-online MSE, both as
//                             exact conditional MSEs of the deployed plan
//                             over the generating distribution, and
//   relative_utility_realized the same ratio from one realized run.
// The conditional form is deterministic given (data, plan), which is what
// makes the monotone orderings across u and Q checkable as exact
// comparisons rather than coin flips on estimator noise.
metrics::Report run_utility_study(const UtilityConfig& cfg);

// Census income extract: selects and buckets a fixed variable list from
// the raw 15-field comma-separated export (no header), then one-hot
// encodes. n_vars = 9 yields 21 binary columns, n_vars = 5 yields 11.
Database load_census_binary(const std::string& path, int n_vars);

}  // namespace harness
}  // namespace sigmacount
