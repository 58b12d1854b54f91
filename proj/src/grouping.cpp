#include "sigmacount/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sigmacount/errors.hpp"

namespace sigmacount {

ClusterPlan plan(const std::vector<Query>& queries, const Schema& schema,
                 int threshold_u) {
    if (threshold_u < 0) {
        throw ValidationError("plan: threshold must be non-negative");
    }
    ClusterPlan out;
    out.threshold_u = threshold_u;

    std::map<std::vector<int>, std::vector<Query>> by_active;
    std::vector<Query> residual;
    for (const Query& q : queries) {
        std::vector<int> active = q.active_set();
        if (static_cast<int>(active.size()) > threshold_u) {
            residual.push_back(q);
        } else {
            by_active[std::move(active)].push_back(q);
        }
    }

    for (auto& [active, members] : by_active) {
        std::sort(members.begin(), members.end());
        members.erase(std::unique(members.begin(), members.end()), members.end());
        ClusterPlan::Cluster c;
        c.active = active;
        c.members = std::move(members);
        out.clusters.push_back(std::move(c));
    }
    // Map order is lexicographic on the active set; re-sort so smaller
    // active sets come first and ties break lexicographically.
    std::stable_sort(out.clusters.begin(), out.clusters.end(),
                     [](const ClusterPlan::Cluster& a, const ClusterPlan::Cluster& b) {
                         if (a.active.size() != b.active.size()) {
                             return a.active.size() < b.active.size();
                         }
                         return a.active < b.active;
                     });

    std::sort(residual.begin(), residual.end());
    residual.erase(std::unique(residual.begin(), residual.end()), residual.end());
    out.residual = std::move(residual);

    for (const auto& c : out.clusters) {
        for (const Query& q : c.members) {
            for (const auto& [col, codes] : q.constraints()) {
                if (col >= schema.p() ||
                    static_cast<int>(codes.back()) >= schema.columns[col].domain_size()) {
                    throw ValidationError("plan: query does not fit the schema");
                }
            }
        }
    }
    return out;
}

std::vector<SigmaAlgebra> materialize(const ClusterPlan& p, const Database& db,
                                      double eps_atom, PrivacyAccountant& accountant,
                                      LaplaceSampler& sampler, std::uint64_t cell_cap) {
    std::vector<SigmaAlgebra> algebras;
    algebras.reserve(p.clusters.size());
    std::int64_t total_atoms = 0;
    for (const auto& cluster : p.clusters) {
        SigmaAlgebra sa = induce(cluster.members, db.schema_ptr(), cell_cap);
        total_atoms += sa.omega_size();
        algebras.push_back(std::move(sa));
    }
    if (algebras.empty()) return algebras;

    // One atomic charge for the whole group. Refusal throws before any
    // noise exists, so a failed materialization leaves no released state.
    accountant.charge("grouped:clusters=" + std::to_string(algebras.size()) +
                          ",omega=" + std::to_string(total_atoms),
                      eps_atom * static_cast<double>(total_atoms));

    for (std::size_t k = 0; k < algebras.size(); ++k) {
        LaplaceSampler child = sampler.fork(static_cast<std::uint64_t>(k));
        algebras[k] = perturb_atoms_prepaid(std::move(algebras[k]), db, eps_atom, child);
    }
    return algebras;
}

bool grouped_advantage_condition(std::uint64_t q_count,
                                 const std::vector<std::int64_t>& omega_sizes) {
    if (omega_sizes.empty()) return q_count > 0;
    std::uint64_t total = 0;
    std::uint64_t biggest = 0;
    for (std::int64_t w : omega_sizes) {
        if (w < 0) throw ValidationError("advantage: negative atom count");
        total += static_cast<std::uint64_t>(w);
        biggest = std::max(biggest, static_cast<std::uint64_t>(w));
    }
    // Q > total * sqrt(biggest)  <=>  Q^2 > total^2 * biggest, exactly.
    const unsigned __int128 lhs = static_cast<unsigned __int128>(q_count) * q_count;
    const unsigned __int128 rhs =
        static_cast<unsigned __int128>(total) * total * biggest;
    return lhs > rhs;
}

}  // namespace sigmacount
