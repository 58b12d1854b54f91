#include "sigmacount/sigma.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include <json.hpp>

#include "sigmacount/errors.hpp"
#include "sigmacount/kernels.hpp"

namespace sigmacount {

namespace {

// Visits every cell of the product of per-column allowed block lists,
// exactly once, as a mixed-radix odometer over precomputed strides.
template <typename F>
void for_each_cube_cell(const std::vector<std::vector<std::uint16_t>>& allowed,
                        const std::vector<std::uint64_t>& stride, F&& visit) {
    const int m = static_cast<int>(allowed.size());
    std::vector<std::size_t> digit(m, 0);
    std::uint64_t key = 0;
    for (int c = 0; c < m; ++c) key += allowed[c][0] * stride[c];
    while (true) {
        visit(key);
        int c = m - 1;
        while (c >= 0) {
            key -= allowed[c][digit[c]] * stride[c];
            if (++digit[c] < allowed[c].size()) {
                key += allowed[c][digit[c]] * stride[c];
                break;
            }
            digit[c] = 0;
            key += allowed[c][0] * stride[c];
            --c;
        }
        if (c < 0) break;
    }
}

// Allowed block lists of a query against refined per-column blocks. The
// inducing family never straddles its own blocks; an outside query might,
// and then the query is not a union of atoms.
std::vector<std::vector<std::uint16_t>> cube_of_query(const SigmaAlgebra& sa,
                                                      const Query& q,
                                                      bool throw_on_straddle) {
    const int p = sa.schema->p();
    std::vector<std::vector<std::uint16_t>> cube(p);
    std::vector<char> in_set;
    for (int c = 0; c < p; ++c) {
        const std::uint16_t nb = static_cast<std::uint16_t>(sa.blocks[c].size());
        const std::vector<std::uint16_t>* codes = q.allowed(c);
        if (!codes) {
            cube[c].resize(nb);
            for (std::uint16_t b = 0; b < nb; ++b) cube[c][b] = b;
            continue;
        }
        in_set.assign(sa.schema->columns[c].domain_size(), 0);
        for (std::uint16_t code : *codes) in_set[code] = 1;
        for (std::uint16_t b = 0; b < nb; ++b) {
            const auto& blk = sa.blocks[c][b];
            const char want = in_set[blk[0]];
            if (throw_on_straddle) {
                for (std::uint16_t code : blk) {
                    if (in_set[code] != want) {
                        throw NotCoveredError(
                            "cover: query splits a label block on column '" +
                            sa.schema->columns[c].name + "'");
                    }
                }
            }
            if (want) cube[c].push_back(b);
        }
    }
    return cube;
}

}  // namespace

std::int64_t SigmaAlgebra::atom_of_row(const std::uint16_t* row) const {
    std::uint64_t key = 0;
    const int p = schema->p();
    for (int c = 0; c < p; ++c) {
        key += static_cast<std::uint64_t>(block_of_code[c][row[c]]) * radix[c];
    }
    return cell_to_atom[key];
}

std::vector<std::vector<std::uint16_t>> SigmaAlgebra::atom_cells(std::int64_t atom) const {
    std::vector<std::vector<std::uint16_t>> out;
    const int p = schema->p();
    for (std::uint64_t key = 0; key < n_cells; ++key) {
        if (cell_to_atom[key] != atom) continue;
        std::vector<std::uint16_t> cell(p);
        std::uint64_t rem = key;
        for (int c = 0; c < p; ++c) {
            cell[c] = static_cast<std::uint16_t>(rem / radix[c]);
            rem %= radix[c];
        }
        out.push_back(std::move(cell));
    }
    return out;
}

SigmaAlgebra induce(const std::vector<Query>& queries, SchemaPtr schema,
                    std::uint64_t cell_cap) {
    if (!schema) throw ValidationError("induce: null schema");
    schema->validate();
    if (queries.empty()) throw ValidationError("induce: empty query family");
    const int p = schema->p();

    SigmaAlgebra sa;
    sa.schema = schema;
    sa.inducing = queries;
    std::sort(sa.inducing.begin(), sa.inducing.end());
    sa.inducing.erase(std::unique(sa.inducing.begin(), sa.inducing.end()),
                      sa.inducing.end());
    for (const Query& q : sa.inducing) {
        for (const auto& [col, codes] : q.constraints()) {
            if (col >= p || static_cast<int>(codes.back()) >=
                                schema->columns[col].domain_size()) {
                throw ValidationError("induce: query does not fit the schema");
            }
        }
    }

    // Per-column label blocks: refine the one-block partition by every
    // allowed set that mentions the column. Ids are assigned in order of
    // first code, so blocks stay sorted by their smallest member.
    sa.block_of_code.resize(p);
    sa.blocks.resize(p);
    std::vector<std::uint16_t> nblocks(p);
    {
        std::vector<char> in_set;
        std::vector<int> remap;
        for (int c = 0; c < p; ++c) {
            const int domain = schema->columns[c].domain_size();
            sa.block_of_code[c].assign(domain, 0);
            int nb = 1;
            for (const Query& q : sa.inducing) {
                const std::vector<std::uint16_t>* codes = q.allowed(c);
                if (!codes) continue;
                in_set.assign(domain, 0);
                for (std::uint16_t code : *codes) in_set[code] = 1;
                remap.assign(static_cast<std::size_t>(nb) * 2, -1);
                int next = 0;
                for (int code = 0; code < domain; ++code) {
                    const int k = sa.block_of_code[c][code] * 2 + in_set[code];
                    if (remap[k] < 0) remap[k] = next++;
                    sa.block_of_code[c][code] = static_cast<std::uint16_t>(remap[k]);
                }
                nb = next;
                if (nb == domain) break;  // already fully split
            }
            nblocks[c] = static_cast<std::uint16_t>(nb);
            sa.blocks[c].assign(nb, {});
            for (int code = 0; code < domain; ++code) {
                sa.blocks[c][sa.block_of_code[c][code]].push_back(
                    static_cast<std::uint16_t>(code));
            }
        }
    }

    // Candidate cell space, row-major strides, leftmost column most
    // significant. Overflow-checked against the cap before each multiply.
    sa.radix.assign(p, 1);
    std::uint64_t n_cells = 1;
    for (int c = p - 1; c >= 0; --c) {
        sa.radix[c] = n_cells;
        if (n_cells > cell_cap / nblocks[c]) {
            throw CellCapError("induce: candidate cell count exceeds the cap of " +
                               std::to_string(cell_cap));
        }
        n_cells *= nblocks[c];
    }
    sa.n_cells = n_cells;

    // Cell partition refinement, one query at a time. Two passes per
    // query: the first counts how much of each class the query cube
    // covers, the second relabels. A class keeps its id when the cube
    // swallows it whole, so the id space stays linear in n_cells plus the
    // family size instead of growing with every rename.
    std::vector<std::int32_t> class_of(n_cells, -1);
    std::vector<std::int64_t> size;    // per class: member cells
    std::vector<std::int64_t> seen;    // per class: member cells inside the cube
    std::vector<std::int32_t> epoch;   // per class: last query that touched it
    std::vector<std::int32_t> split_to;
    std::vector<std::int32_t> touched;
    std::vector<std::vector<std::uint16_t>> cube;

    std::int32_t qi = 0;
    for (const Query& q : sa.inducing) {
        ++qi;
        cube = cube_of_query(sa, q, false);

        touched.clear();
        std::int64_t outside_seen = 0;
        for_each_cube_cell(cube, sa.radix, [&](std::uint64_t key) {
            const std::int32_t cls = class_of[key];
            if (cls < 0) {
                ++outside_seen;
                return;
            }
            if (epoch[cls] != qi) {
                epoch[cls] = qi;
                seen[cls] = 0;
                touched.push_back(cls);
            }
            ++seen[cls];
        });

        std::int32_t outside_target = -1;
        if (outside_seen > 0) {
            outside_target = static_cast<std::int32_t>(size.size());
            size.push_back(outside_seen);
            seen.push_back(0);
            epoch.push_back(0);
            split_to.push_back(-1);
        }
        for (std::int32_t cls : touched) {
            if (seen[cls] == size[cls]) {
                split_to[cls] = cls;
            } else {
                const std::int32_t nid = static_cast<std::int32_t>(size.size());
                split_to[cls] = nid;
                size.push_back(seen[cls]);
                size[cls] -= seen[cls];
                seen.push_back(0);
                epoch.push_back(0);
                split_to.push_back(-1);
            }
        }

        for_each_cube_cell(cube, sa.radix, [&](std::uint64_t key) {
            const std::int32_t cls = class_of[key];
            class_of[key] = (cls < 0) ? outside_target : split_to[cls];
        });
    }

    // Canonical atom ids: order of the smallest member cell key.
    std::vector<std::int32_t> atom_id(size.size(), -1);
    sa.cell_to_atom.assign(n_cells, -1);
    for (std::uint64_t key = 0; key < n_cells; ++key) {
        const std::int32_t cls = class_of[key];
        if (cls < 0) continue;
        if (atom_id[cls] < 0) {
            atom_id[cls] = static_cast<std::int32_t>(sa.atoms.size());
            sa.atoms.emplace_back();
        }
        sa.cell_to_atom[key] = atom_id[cls];
        ++sa.atoms[atom_id[cls]].cell_count;
    }
    return sa;
}

SigmaAlgebra perturb_atoms_prepaid_counts(SigmaAlgebra sa,
                                          const std::vector<std::int64_t>& exact,
                                          double eps_atom, LaplaceSampler& sampler) {
    if (!(eps_atom > 0.0) || !std::isfinite(eps_atom)) {
        throw ValidationError("perturb: eps_atom must be finite and positive");
    }
    const std::int64_t omega = sa.omega_size();
    if (omega == 0) throw ValidationError("perturb: algebra has no atoms");
    if (static_cast<std::int64_t>(exact.size()) != omega) {
        throw ValidationError("perturb: exact count list does not match the atom count");
    }

    const double scale = 1.0 / eps_atom;
    const std::uint64_t first = sampler.reserve(static_cast<std::uint64_t>(omega));
    for (std::int64_t a = 0; a < omega; ++a) {
        if (exact[a] < 0) throw ValidationError("perturb: negative exact count");
        sa.atoms[a].exact = exact[a];
        const double noisy =
            std::max(static_cast<double>(exact[a]) +
                         sampler.sample_at(first + static_cast<std::uint64_t>(a), scale),
                     0.0);
        sa.atoms[a].noisy_q = std::llround(noisy / kNoisyQuantum);
    }
    sa.eps_atom = eps_atom;
    sa.perturbed = true;
    sa.noise_seed = sampler.seed();
    sa.noise_position = first;
    return sa;
}

SigmaAlgebra perturb_atoms_prepaid(SigmaAlgebra sa, const Database& db, double eps_atom,
                                   LaplaceSampler& sampler) {
    if (!(db.schema() == *sa.schema)) {
        throw ValidationError("perturb: database schema does not match the algebra");
    }
    // Columns with a single block contribute nothing to the cell key, so
    // the projection drops them from the per-row loop.
    kernels::Projection proj;
    proj.n_cells = sa.n_cells;
    for (int c = 0; c < sa.schema->p(); ++c) {
        if (sa.blocks[c].size() < 2) continue;
        proj.cols.push_back(c);
        proj.block_of_code.push_back(sa.block_of_code[c]);
        proj.radix.push_back(sa.radix[c]);
    }
    const std::vector<std::int64_t> hist = kernels::cell_histogram(db, proj);

    std::vector<std::int64_t> exact(sa.atoms.size(), 0);
    for (std::uint64_t key = 0; key < sa.n_cells; ++key) {
        const std::int32_t a = sa.cell_to_atom[key];
        if (a >= 0) exact[a] += hist[key];
    }
    return perturb_atoms_prepaid_counts(std::move(sa), exact, eps_atom, sampler);
}

SigmaAlgebra perturb_atoms(SigmaAlgebra sa, const Database& db, double eps_atom,
                           PrivacyAccountant& accountant, LaplaceSampler& sampler) {
    if (!(eps_atom > 0.0) || !std::isfinite(eps_atom)) {
        throw ValidationError("perturb: eps_atom must be finite and positive");
    }
    const std::int64_t omega = sa.omega_size();
    if (omega == 0) throw ValidationError("perturb: algebra has no atoms");
    accountant.charge("sigma:omega=" + std::to_string(omega),
                      eps_atom * static_cast<double>(omega));
    return perturb_atoms_prepaid(std::move(sa), db, eps_atom, sampler);
}

Cover cover(const SigmaAlgebra& sa, const Query& q, CoverScratch& scratch) {
    const auto cube = cube_of_query(sa, q, true);

    if (scratch.stamp.size() < sa.atoms.size()) {
        scratch.stamp.assign(sa.atoms.size(), 0);
        scratch.tick = 0;
    }
    if (scratch.tick == std::numeric_limits<std::int32_t>::max()) {
        std::fill(scratch.stamp.begin(), scratch.stamp.end(), 0);
        scratch.tick = 0;
    }
    const std::int32_t tick = ++scratch.tick;

    Cover out;
    std::int64_t cube_cells = 0;
    for_each_cube_cell(cube, sa.radix, [&](std::uint64_t key) {
        ++cube_cells;
        const std::int32_t a = sa.cell_to_atom[key];
        if (a < 0) {
            throw NotCoveredError(
                "cover: a cell of the query lies outside the union of the "
                "inducing family");
        }
        if (scratch.stamp[a] != tick) {
            scratch.stamp[a] = tick;
            out.atom_ids.push_back(a);
        }
    });

    std::int64_t covered_cells = 0;
    for (std::int64_t a : out.atom_ids) covered_cells += sa.atoms[a].cell_count;
    if (covered_cells != cube_cells) {
        throw NotCoveredError("cover: an atom extends beyond the query");
    }
    std::sort(out.atom_ids.begin(), out.atom_ids.end());
    return out;
}

Cover cover(const SigmaAlgebra& sa, const Query& q) {
    CoverScratch scratch;
    return cover(sa, q, scratch);
}

NoisyCount respond_cover(const SigmaAlgebra& sa, const Cover& c) {
    if (!sa.perturbed) {
        throw ValidationError("respond: algebra has not been perturbed yet");
    }
    // Integer quanta cannot lose associativity, so a sub-union's response
    // can never exceed a super-union's.
    __int128 total = 0;
    for (std::int64_t a : c.atom_ids) total += sa.atoms[a].noisy_q;
    NoisyCount out;
    out.value = static_cast<double>(total) * kNoisyQuantum;
    out.epsilon_charged = 0.0;
    out.truncated = true;
    return out;
}

NoisyCount respond(const SigmaAlgebra& sa, const Query& q, CoverScratch& scratch) {
    return respond_cover(sa, cover(sa, q, scratch));
}

NoisyCount respond(const SigmaAlgebra& sa, const Query& q) {
    CoverScratch scratch;
    return respond(sa, q, scratch);
}

bool advantage_condition(std::uint64_t q_count, std::uint64_t omega_size) {
    // Q > omega^(3/2)  <=>  Q^2 > omega^3; both sides fit 128 bits for
    // every omega below 2^42, far beyond any inducible cell cap.
    const unsigned __int128 lhs = static_cast<unsigned __int128>(q_count) * q_count;
    const unsigned __int128 rhs =
        static_cast<unsigned __int128>(omega_size) * omega_size * omega_size;
    return lhs > rhs;
}

double eps_atom_for_budget(std::uint64_t q_count, std::uint64_t omega_size, double eps) {
    if (q_count == 0 || omega_size == 0) {
        throw ValidationError("eps_atom_for_budget: counts must be positive");
    }
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw ValidationError("eps_atom_for_budget: eps must be finite and positive");
    }
    return eps * static_cast<double>(q_count) / static_cast<double>(omega_size);
}

std::string sigma_to_json(const SigmaAlgebra& sa) {
    nlohmann::ordered_json j;
    j["schema"] = nlohmann::ordered_json::parse(schema_to_json(*sa.schema));
    nlohmann::ordered_json fam = nlohmann::ordered_json::array();
    for (const Query& q : sa.inducing) {
        fam.push_back(nlohmann::ordered_json::parse(query_to_json(q, *sa.schema)));
    }
    j["inducing"] = std::move(fam);
    j["cells"] = sa.n_cells;
    j["omega"] = sa.omega_size();
    j["eps_atom"] = sa.eps_atom;
    j["perturbed"] = sa.perturbed;
    j["noise_seed"] = sa.noise_seed;
    j["noise_position"] = sa.noise_position;
    nlohmann::ordered_json counts = nlohmann::ordered_json::array();
    for (const auto& atom : sa.atoms) counts.push_back(atom.noisy_q);
    j["noisy_q"] = std::move(counts);
    return j.dump();
}

SigmaAlgebra sigma_from_json(const std::string& json_text, SchemaPtr schema) {
    // ordered_json so the embedded schema keeps its column order when
    // re-dumped below; a plain parse would alphabetize it.
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("algebra json: ") + e.what());
    }
    for (const char* field :
         {"schema", "inducing", "cells", "omega", "eps_atom", "perturbed", "noise_seed",
          "noise_position", "noisy_q"}) {
        if (!j.contains(field)) {
            throw ParseError(std::string("algebra json: missing field '") + field + "'");
        }
    }
    SchemaPtr stored = schema_from_json(j["schema"].dump());
    if (!schema) {
        schema = stored;
    } else if (!(*schema == *stored)) {
        throw ValidationError("algebra json: stored schema does not match the given one");
    }

    std::vector<Query> family;
    for (const auto& qj : j["inducing"]) {
        family.push_back(query_from_json(qj.dump(), *schema));
    }

    // The partition is not stored; it is a deterministic function of the
    // family and is rebuilt. The stored cell and atom counts then act as
    // integrity checks on the artifact.
    const std::uint64_t cells = j["cells"].get<std::uint64_t>();
    SigmaAlgebra sa = induce(family, schema, std::max(kDefaultCellCap, cells));
    if (sa.n_cells != cells ||
        sa.omega_size() != j["omega"].get<std::int64_t>()) {
        throw ValidationError("algebra json: structure does not match the stored counts");
    }

    sa.eps_atom = j["eps_atom"].get<double>();
    sa.perturbed = j["perturbed"].get<bool>();
    sa.noise_seed = j["noise_seed"].get<std::uint64_t>();
    sa.noise_position = j["noise_position"].get<std::uint64_t>();
    const auto& counts = j["noisy_q"];
    if (static_cast<std::int64_t>(counts.size()) != sa.omega_size()) {
        throw ValidationError("algebra json: noisy count list has the wrong length");
    }
    for (std::size_t a = 0; a < counts.size(); ++a) {
        sa.atoms[a].noisy_q = counts[a].get<std::int64_t>();
    }
    return sa;
}

}  // namespace sigmacount
