#include "sigmacount/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sigmacount/errors.hpp"

namespace sigmacount {
namespace kernels {

namespace {

// Threshold below which forking a team costs more than the scan.
constexpr std::int64_t kParallelCutoff = 1 << 14;

bool want_parallel(std::int64_t n) {
#ifdef _OPENMP
    return n >= kParallelCutoff && omp_get_max_threads() > 1;
#else
    (void)n;
    return false;
#endif
}

}  // namespace

CompiledQuery compile(const Schema& schema, const Query& q) {
    CompiledQuery cq;
    for (const auto& [col, codes] : q.constraints()) {
        if (col >= schema.p()) {
            throw ValidationError("kernel: constraint column " + std::to_string(col) +
                                  " is out of range for the given schema");
        }
        CompiledQuery::ColumnMask m;
        m.col = col;
        m.allowed.assign(schema.columns[col].domain_size(), 0);
        for (std::uint16_t code : codes) m.allowed[code] = 1;
        cq.masks.push_back(std::move(m));
    }
    return cq;
}

std::int64_t count_rows_serial(const Database& db, const CompiledQuery& cq) {
    const std::uint16_t* cells = db.cells().data();
    const int p = db.p();
    const std::int64_t n = db.n();
    std::int64_t count = 0;
    for (std::int64_t r = 0; r < n; ++r) {
        if (cq.matches(cells + static_cast<std::size_t>(r) * p)) ++count;
    }
    return count;
}

std::int64_t count_rows_parallel(const Database& db, const CompiledQuery& cq) {
    const std::uint16_t* cells = db.cells().data();
    const int p = db.p();
    const std::int64_t n = db.n();
    std::int64_t count = 0;
#ifdef _OPENMP
#pragma omp parallel for reduction(+ : count) schedule(static)
#endif
    for (std::int64_t r = 0; r < n; ++r) {
        if (cq.matches(cells + static_cast<std::size_t>(r) * p)) ++count;
    }
    return count;
}

std::int64_t count_rows(const Database& db, const CompiledQuery& cq) {
    return want_parallel(db.n()) ? count_rows_parallel(db, cq) : count_rows_serial(db, cq);
}

std::vector<std::int64_t> count_batch(const Database& db,
                                      const std::vector<Query>& queries) {
    std::vector<CompiledQuery> compiled;
    compiled.reserve(queries.size());
    for (const auto& q : queries) compiled.push_back(compile(db.schema(), q));

    std::vector<std::int64_t> out(queries.size(), 0);
    const std::int64_t nq = static_cast<std::int64_t>(queries.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8)
#endif
    for (std::int64_t i = 0; i < nq; ++i) {
        out[i] = count_rows_serial(db, compiled[i]);
    }
    return out;
}

namespace {

inline std::uint64_t cell_of_row(const Projection& proj, const std::uint16_t* row) {
    std::uint64_t cell = 0;
    for (std::size_t k = 0; k < proj.cols.size(); ++k) {
        cell += static_cast<std::uint64_t>(proj.block_of_code[k][row[proj.cols[k]]]) *
                proj.radix[k];
    }
    return cell;
}

void validate_projection(const Database& db, const Projection& proj) {
    if (proj.n_cells == 0) throw ValidationError("projection: zero cells");
    if (proj.cols.size() != proj.block_of_code.size() ||
        proj.cols.size() != proj.radix.size()) {
        throw ValidationError("projection: per-column vectors disagree in length");
    }
    for (std::size_t k = 0; k < proj.cols.size(); ++k) {
        if (proj.cols[k] < 0 || proj.cols[k] >= db.p()) {
            throw ValidationError("projection: column " + std::to_string(proj.cols[k]) +
                                  " is out of range");
        }
        if (proj.block_of_code[k].size() !=
            static_cast<std::size_t>(db.schema().columns[proj.cols[k]].domain_size())) {
            throw ValidationError("projection: code table of column " +
                                  std::to_string(proj.cols[k]) +
                                  " does not match the domain size");
        }
    }
}

}  // namespace

std::vector<std::int64_t> cell_histogram_serial(const Database& db,
                                                const Projection& proj) {
    validate_projection(db, proj);
    std::vector<std::int64_t> hist(proj.n_cells, 0);
    const std::int64_t n = db.n();
    for (std::int64_t r = 0; r < n; ++r) {
        ++hist[cell_of_row(proj, db.row_ptr(r))];
    }
    return hist;
}

std::vector<std::int64_t> cell_histogram_parallel(const Database& db,
                                                  const Projection& proj) {
    validate_projection(db, proj);
    std::vector<std::int64_t> hist(proj.n_cells, 0);
    const std::int64_t n = db.n();
#ifdef _OPENMP
#pragma omp parallel
    {
        std::vector<std::int64_t> local(proj.n_cells, 0);
#pragma omp for schedule(static) nowait
        for (std::int64_t r = 0; r < n; ++r) {
            ++local[cell_of_row(proj, db.row_ptr(r))];
        }
#pragma omp critical
        {
            for (std::uint64_t c = 0; c < proj.n_cells; ++c) hist[c] += local[c];
        }
    }
#else
    for (std::int64_t r = 0; r < n; ++r) {
        ++hist[cell_of_row(proj, db.row_ptr(r))];
    }
#endif
    return hist;
}

std::vector<std::int64_t> cell_histogram(const Database& db, const Projection& proj) {
    return want_parallel(db.n()) ? cell_histogram_parallel(db, proj)
                                 : cell_histogram_serial(db, proj);
}

}  // namespace kernels
}  // namespace sigmacount
