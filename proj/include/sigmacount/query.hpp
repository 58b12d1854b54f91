#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sigmacount/schema.hpp"

namespace sigmacount {

// Conjunctive counting query: per-column allowed label sets, AND-joined.
// Canonical form is maintained as an invariant of every constructor path:
//   * constraints sorted by schema column index,
//   * label codes sorted ascending, no duplicates,
//   * constraints equal to the full domain are dropped entirely.
// Under that invariant, "constrained" and "active" coincide.
class Query {
  public:
    Query() = default;  // unconstrained: every row matches

    // Pairs of (column index, allowed codes); canonicalized on entry.
    // Repeated columns intersect; an empty intersection throws.
    static Query make(const Schema& schema,
                      std::vector<std::pair<int, std::vector<std::uint16_t>>> constraints);

    const std::vector<std::pair<int, std::vector<std::uint16_t>>>& constraints() const {
        return constraints_;
    }
    bool unconstrained() const { return constraints_.empty(); }

    // Columns with a proper-subset constraint, ascending.
    std::vector<int> active_set() const;
    // Bit i set exactly when column i is active.
    std::vector<bool> embedding(const Schema& schema) const;

    // Allowed codes of a column, nullptr when unconstrained.
    const std::vector<std::uint16_t>* allowed(int col) const;
    bool row_matches(const std::uint16_t* row) const;

    bool operator==(const Query& other) const { return constraints_ == other.constraints_; }
    bool operator<(const Query& other) const { return constraints_ < other.constraints_; }

    // Stable text key for hashing and dedup; not meant for display.
    std::string key() const;

  private:
    std::vector<std::pair<int, std::vector<std::uint16_t>>> constraints_;
};

// Text form: `col IN {v1,v2} AND col2 IN {v3}`. A bare `*` or an empty
// string is the unconstrained query. Omitted columns are unconstrained.
// Errors name the offending token.
Query parse_query(const std::string& text, const Schema& schema);
std::string render_query(const Query& q, const Schema& schema);

// JSON form: {"col": ["label", ...], ...}.
Query query_from_json(const std::string& json_text, const Schema& schema);
std::string query_to_json(const Query& q, const Schema& schema);

// True when every row matching q1 also matches q2 (per-column set
// inclusion, absent means the full domain). Reflexive.
bool is_subset(const Query& q1, const Query& q2);

// Number of rows matching q. Exact, no noise, no budget involved.
std::int64_t exact_count(const Database& db, const Query& q);

}  // namespace sigmacount
