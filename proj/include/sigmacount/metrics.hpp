#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sigmacount/query.hpp"

namespace sigmacount {
namespace metrics {

// Utility of per-query release at epsilon: 2 / Var(Lap(1/eps)) = eps^2.
double theoretical_utility_benchmark(double eps);

// Lower bound on the utility of answering through an algebra of
// omega_size atoms perturbed at eps_atom each: eps_atom^2 / omega_size.
double theoretical_utility_sigma_bound(double eps_atom, std::int64_t omega_size);

// MSE(a) / MSE(b) against the same truths. Throws ValidationError when
// the vectors disagree in length or MSE(b) is zero.
double empirical_relative_utility(const std::vector<double>& responses_a,
                                  const std::vector<double>& responses_b,
                                  const std::vector<double>& truths);

double mean_squared_error(const std::vector<double>& responses,
                          const std::vector<double>& truths);

// Fraction of nested pairs answered in the wrong order. Each pair is
// (response to the smaller query, response to the larger query); a
// violation is strictly larger-for-smaller. Pairs must be verified nested
// by the caller via is_subset; this checks again and throws if not.
double violation_rate(const std::vector<std::pair<Query, Query>>& pairs,
                      const std::vector<std::pair<double, double>>& responses);

// Closed-form mean squared error of max(N + Lap(scale), 0) around N:
// 2 scale^2 - exp(-N/scale) * scale * (N + scale), for N >= 0.
double truncated_laplace_mse(double exact, double scale);

// One study cell flattened for reporting.
struct ReportRow {
    std::vector<std::pair<std::string, std::string>> fields;  // ordered
};

struct Report {
    std::vector<std::string> columns;
    std::vector<ReportRow> rows;

    std::string to_csv() const;
    std::string to_json() const;
};

}  // namespace metrics
}  // namespace sigmacount
