#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sigmacount/mechanism.hpp"
#include "sigmacount/query.hpp"
#include "sigmacount/random.hpp"
#include "sigmacount/schema.hpp"

namespace sigmacount {

// Noisy atom counts are snapped to this grid when they are stored, so that
// every response is an exact integer sum of quanta. Exact sums make the
// monotonicity and additivity guarantees hold in floating point, not just
// in real arithmetic. The snap is post-processing of already-noised
// values, so it costs nothing in privacy and at most 2^-30 in accuracy.
constexpr double kNoisyQuantum = 0x1.0p-30;

constexpr std::uint64_t kDefaultCellCap = 1ull << 20;

// The finest partition distinguishable by a query family, over the product
// of per-column label blocks. An atom is an equivalence class of product
// cells under the membership signature: two cells belong to the same atom
// exactly when every inducing query contains both or neither.
class SigmaAlgebra {
  public:
    struct Atom {
        std::int64_t cell_count = 0;   // product cells in this class
        std::int64_t exact = -1;       // cached true count; -1 before perturb
        std::int64_t noisy_q = 0;      // noisy count in units of kNoisyQuantum
    };

    SchemaPtr schema;
    // Per column: the refined label blocks, each a sorted list of codes.
    std::vector<std::vector<std::vector<std::uint16_t>>> blocks;
    // Per column: code -> block index.
    std::vector<std::vector<std::uint16_t>> block_of_code;
    // Mixed-radix multiplier per column over block indices.
    std::vector<std::uint64_t> radix;
    std::uint64_t n_cells = 0;          // candidate product cells
    std::vector<std::int32_t> cell_to_atom;  // -1 for cells outside the union
    std::vector<Atom> atoms;
    std::vector<Query> inducing;        // canonical, deduplicated, sorted

    double eps_atom = 0.0;
    bool perturbed = false;
    std::uint64_t noise_seed = 0;       // provenance of the perturbation draws
    std::uint64_t noise_position = 0;

    std::int64_t omega_size() const { return static_cast<std::int64_t>(atoms.size()); }
    double noisy_value(std::int64_t atom) const {
        return static_cast<double>(atoms[atom].noisy_q) * kNoisyQuantum;
    }

    // Atom id of the row's cell, or -1 when the row falls outside the union.
    std::int64_t atom_of_row(const std::uint16_t* row) const;

    // Member cells of an atom, as per-column block index vectors. Derived
    // from cell_to_atom on demand; intended for tests and small algebras.
    std::vector<std::vector<std::uint16_t>> atom_cells(std::int64_t atom) const;
};

using SigmaAlgebraPtr = std::shared_ptr<const SigmaAlgebra>;

// Atom indices covering a query, ascending.
struct Cover {
    std::vector<std::int64_t> atom_ids;
};

// Reusable workspace for cover(); one per thread when calling concurrently.
struct CoverScratch {
    std::vector<std::int32_t> stamp;
    std::int32_t tick = 0;
};

// Builds the algebra induced by a query family. Queries are canonicalized
// and deduplicated first. Throws CellCapError when the candidate product
// cell count would exceed cell_cap, and ValidationError on an empty family.
SigmaAlgebra induce(const std::vector<Query>& queries, SchemaPtr schema,
                    std::uint64_t cell_cap = kDefaultCellCap);

// Charges omega * eps_atom as one ledger entry, then draws one Laplace
// perturbation per atom and clamps at zero:  max(N(atom) + Lap(1/eps), 0).
// Atoms with zero rows are still charged and still perturbed. Consumes
// omega positions from the sampler.
SigmaAlgebra perturb_atoms(SigmaAlgebra sa, const Database& db, double eps_atom,
                           PrivacyAccountant& accountant, LaplaceSampler& sampler);

// Same arithmetic, no charge. For callers that already reserved the
// budget for a whole group of algebras in one atomic charge.
SigmaAlgebra perturb_atoms_prepaid(SigmaAlgebra sa, const Database& db, double eps_atom,
                                   LaplaceSampler& sampler);

// Same arithmetic again, with the exact per-atom counts supplied by the
// caller (indexed by atom id) instead of recounted from a table.
SigmaAlgebra perturb_atoms_prepaid_counts(SigmaAlgebra sa,
                                          const std::vector<std::int64_t>& exact,
                                          double eps_atom, LaplaceSampler& sampler);

// The atoms whose union is exactly q. Throws NotCoveredError when q is not
// a union of atoms (a block straddles a constraint, a cell of q lies
// outside the union, or an atom sticks out of q).
Cover cover(const SigmaAlgebra& sa, const Query& q, CoverScratch& scratch);
Cover cover(const SigmaAlgebra& sa, const Query& q);

// Sum of the covering atoms' noisy counts. Free: no charge, no new noise.
// Summation is exact over quanta, so responses to nested covered queries
// can never invert and disjoint covered unions add exactly.
NoisyCount respond(const SigmaAlgebra& sa, const Query& q, CoverScratch& scratch);
NoisyCount respond(const SigmaAlgebra& sa, const Query& q);
NoisyCount respond_cover(const SigmaAlgebra& sa, const Cover& c);

// Whether answering Q identical-charge queries through one algebra of
// omega_size atoms beats per-query release under an equal total budget:
// true exactly when Q > omega_size^(3/2). Integer-exact.
bool advantage_condition(std::uint64_t q_count, std::uint64_t omega_size);

// Largest uniform per-atom epsilon that keeps the total algebra charge
// equal to the budget of Q per-query releases at eps each:
// eps * Q / omega_size.
double eps_atom_for_budget(std::uint64_t q_count, std::uint64_t omega_size, double eps);

// JSON round-trip. Exact counts are deliberately not serialized: a stored
// algebra is a released artifact and carries only the noisy counts, the
// structure, and the provenance needed to respond without re-charging.
std::string sigma_to_json(const SigmaAlgebra& sa);
SigmaAlgebra sigma_from_json(const std::string& json_text, SchemaPtr schema);

}  // namespace sigmacount
