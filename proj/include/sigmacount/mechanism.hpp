#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "sigmacount/query.hpp"
#include "sigmacount/random.hpp"
#include "sigmacount/schema.hpp"

namespace sigmacount {

// A single released value and what it cost.
struct NoisyCount {
    double value = 0.0;
    double epsilon_charged = 0.0;
    bool truncated = false;  // value came from nonnegativity-clamped parts
};

struct LedgerEntry {
    std::string label;
    double epsilon;
};

// Strict pre-charge accountant. A charge is recorded before any noise is
// drawn; a refused charge records nothing; nothing is ever refunded.
// Composition is additive. The acceptance comparison carries a relative
// slack of 1e-9 so that a budget meant as an exact multiple of the
// per-query epsilon is not cut one short by double rounding.
class PrivacyAccountant {
  public:
    explicit PrivacyAccountant(double epsilon_budget);

    // False (and no record) when the charge would exceed the budget.
    bool try_charge(const std::string& label, double epsilon);
    // Same, but throws BudgetExhaustedError instead of returning false.
    void charge(const std::string& label, double epsilon);

    double budget() const { return budget_; }
    double spent() const;
    double remaining() const;
    std::vector<LedgerEntry> ledger() const;

    static double sequential_composition(const std::vector<double>& epsilons);

  private:
    double budget_;
    double spent_ = 0.0;
    std::vector<LedgerEntry> ledger_;
    mutable std::mutex mutex_;
};

// Per-query Laplace release: value = exact count + Lap(1/epsilon).
// Untruncated; the value may be negative. Charges epsilon up front and
// propagates BudgetExhaustedError untouched when the accountant refuses.
NoisyCount benchmark_respond(const Database& db, const Query& q, double epsilon,
                             PrivacyAccountant& accountant, LaplaceSampler& sampler);

// Engine-facing configuration shared by the CLI and serve mode.
struct MechanismConfig {
    double epsilon_budget = 1.0;
    double epsilon_per_query = 0.01;
    std::uint64_t seed = 0;
    bool round_output = false;  // output-layer rounding only, never internal
};

}  // namespace sigmacount
