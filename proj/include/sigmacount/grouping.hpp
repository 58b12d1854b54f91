#pragma once

#include <cstdint>
#include <vector>

#include "sigmacount/sigma.hpp"

namespace sigmacount {

// Partition of a workload into per-active-set clusters. Queries whose
// active set has more than threshold_u variables go to the residual and
// are answered per query instead.
struct ClusterPlan {
    struct Cluster {
        std::vector<int> active;      // ascending column indices; may be empty
        std::vector<Query> members;   // canonical, deduplicated, sorted
    };
    std::vector<Cluster> clusters;    // ordered by (|active|, active)
    std::vector<Query> residual;      // canonical, deduplicated, sorted
    int threshold_u = 0;
};

// One cluster per distinct active-variable set of size <= threshold_u.
// Deterministic: same input multiset, same plan.
ClusterPlan plan(const std::vector<Query>& queries, const Schema& schema, int threshold_u);

// Induces every cluster's algebra, then charges the whole group as one
// atomic ledger entry of (sum_k omega_k) * eps_atom before any noise is
// drawn. On refusal nothing is charged and nothing is perturbed. Each
// cluster perturbs from its own forked sampler stream, so results do not
// depend on materialization order.
std::vector<SigmaAlgebra> materialize(const ClusterPlan& p, const Database& db,
                                      double eps_atom, PrivacyAccountant& accountant,
                                      LaplaceSampler& sampler,
                                      std::uint64_t cell_cap = kDefaultCellCap);

// Equal-budget advantage condition for a grouped plan:
// Q > (sum_k omega_k) * sqrt(max_k omega_k). Integer-exact at the boundary.
bool grouped_advantage_condition(std::uint64_t q_count,
                                 const std::vector<std::int64_t>& omega_sizes);

}  // namespace sigmacount
