#include "sigmacount/metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "sigmacount/errors.hpp"

namespace sigmacount {
namespace metrics {

double theoretical_utility_benchmark(double eps) {
    if (!(eps > 0.0)) throw ValidationError("utility: eps must be positive");
    return eps * eps;
}

double theoretical_utility_sigma_bound(double eps_atom, std::int64_t omega_size) {
    if (!(eps_atom > 0.0)) throw ValidationError("utility: eps must be positive");
    if (omega_size <= 0) throw ValidationError("utility: omega must be positive");
    return eps_atom * eps_atom / static_cast<double>(omega_size);
}

double mean_squared_error(const std::vector<double>& responses,
                          const std::vector<double>& truths) {
    if (responses.size() != truths.size()) {
        throw ValidationError("mse: responses and truths disagree in length");
    }
    if (responses.empty()) throw ValidationError("mse: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const double d = responses[i] - truths[i];
        total += d * d;
    }
    return total / static_cast<double>(responses.size());
}

double empirical_relative_utility(const std::vector<double>& responses_a,
                                  const std::vector<double>& responses_b,
                                  const std::vector<double>& truths) {
    const double mse_a = mean_squared_error(responses_a, truths);
    const double mse_b = mean_squared_error(responses_b, truths);
    if (mse_b == 0.0) {
        throw ValidationError("relative utility: denominator MSE is zero");
    }
    return mse_a / mse_b;
}

double violation_rate(const std::vector<std::pair<Query, Query>>& pairs,
                      const std::vector<std::pair<double, double>>& responses) {
    if (pairs.size() != responses.size()) {
        throw ValidationError("violation rate: pairs and responses disagree in length");
    }
    if (pairs.empty()) throw ValidationError("violation rate: empty input");
    std::int64_t violations = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!is_subset(pairs[i].first, pairs[i].second)) {
            throw ValidationError("violation rate: pair " + std::to_string(i) +
                                  " is not nested");
        }
        if (responses[i].first > responses[i].second) ++violations;
    }
    return static_cast<double>(violations) / static_cast<double>(pairs.size());
}

double truncated_laplace_mse(double exact, double scale) {
    if (exact < 0.0) throw ValidationError("truncated mse: exact count must be >= 0");
    if (!(scale > 0.0)) throw ValidationError("truncated mse: scale must be positive");
    return 2.0 * scale * scale -
           std::exp(-exact / scale) * scale * (exact + scale);
}

namespace {

// CSV field quoting is deliberately absent; report values are numbers and
// plain identifiers.
const std::string* field_of(const ReportRow& row, const std::string& name) {
    for (const auto& f : row.fields) {
        if (f.first == name) return &f.second;
    }
    return nullptr;
}

}  // namespace

std::string Report::to_csv() const {
    std::ostringstream out;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (c) out << ',';
        out << columns[c];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (c) out << ',';
            if (const std::string* v = field_of(row, columns[c])) out << *v;
        }
        out << '\n';
    }
    return out.str();
}

std::string Report::to_json() const {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (const auto& c : columns) {
            const std::string* v = field_of(row, c);
            if (!v) continue;
            // values arrive stringified; numeric ones go back out as numbers
            char* end = nullptr;
            const double d = std::strtod(v->c_str(), &end);
            if (!v->empty() && end == v->c_str() + v->size() && std::isfinite(d)) {
                obj[c] = d;
            } else {
                obj[c] = *v;
            }
        }
        arr.push_back(std::move(obj));
    }
    return arr.dump(2);
}

}  // namespace metrics
}  // namespace sigmacount
