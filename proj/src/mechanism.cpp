#include "sigmacount/mechanism.hpp"

#include <algorithm>
#include <cmath>

#include "sigmacount/errors.hpp"
#include "sigmacount/kernels.hpp"
#include "sigmacount/query.hpp"

namespace sigmacount {

PrivacyAccountant::PrivacyAccountant(double epsilon_budget) : budget_(epsilon_budget) {
    if (!(epsilon_budget >= 0.0) || !std::isfinite(epsilon_budget)) {
        throw ValidationError("accountant: budget must be finite and non-negative");
    }
}

bool PrivacyAccountant::try_charge(const std::string& label, double epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
        throw ValidationError("accountant: charge must be finite and positive");
    }
    std::lock_guard<std::mutex> lock(mutex_);
    // Slack absorbs accumulated rounding of the running sum: a hundred
    // charges of nominal budget/100 must exhaust the budget exactly, and in
    // binary the partial sums can overshoot by a few ulps.
    const double slack = 1e-9 * std::max(1.0, budget_);
    if (spent_ + epsilon > budget_ + slack) return false;
    spent_ += epsilon;
    ledger_.push_back(LedgerEntry{label, epsilon});
    return true;
}

void PrivacyAccountant::charge(const std::string& label, double epsilon) {
    if (!try_charge(label, epsilon)) {
        throw BudgetExhaustedError("accountant: charging " + std::to_string(epsilon) +
                                   " for '" + label + "' would exceed the budget (spent " +
                                   std::to_string(spent()) + " of " +
                                   std::to_string(budget_) + ")");
    }
}

double PrivacyAccountant::spent() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return spent_;
}

double PrivacyAccountant::remaining() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return std::max(0.0, budget_ - spent_);
}

std::vector<LedgerEntry> PrivacyAccountant::ledger() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return ledger_;
}

double PrivacyAccountant::sequential_composition(const std::vector<double>& epsilons) {
    double total = 0.0;
    for (double e : epsilons) total += e;
    return total;
}

NoisyCount benchmark_respond(const Database& db, const Query& q, double epsilon,
                             PrivacyAccountant& accountant, LaplaceSampler& sampler) {
    accountant.charge("benchmark:" + q.key(), epsilon);
    const std::int64_t exact = kernels::count_rows(db, kernels::compile(db.schema(), q));
    NoisyCount out;
    out.value = static_cast<double>(exact) + sampler.sample(1.0 / epsilon);
    out.epsilon_charged = epsilon;
    out.truncated = false;
    return out;
}

}  // namespace sigmacount
