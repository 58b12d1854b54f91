#pragma once

#include <cstdint>
#include <vector>

#include "sigmacount/query.hpp"
#include "sigmacount/schema.hpp"

namespace sigmacount {
namespace kernels {

// Compiled row predicate: per constrained column, a lookup table over the
// label codes of that column. Row matches when every table says yes.
struct CompiledQuery {
    struct ColumnMask {
        int col;
        std::vector<std::uint8_t> allowed;  // indexed by code
    };
    std::vector<ColumnMask> masks;

    bool matches(const std::uint16_t* row) const {
        for (const auto& m : masks) {
            if (!m.allowed[row[m.col]]) return false;
        }
        return true;
    }
};

CompiledQuery compile(const Schema& schema, const Query& q);

// Serial reference implementation. Kept verbatim so the parallel kernel
// has something exact to be checked against.
std::int64_t count_rows_serial(const Database& db, const CompiledQuery& cq);

// OpenMP row-sharded count. Integer reduction, so the result is identical
// to the serial one regardless of thread count.
std::int64_t count_rows_parallel(const Database& db, const CompiledQuery& cq);

// Dispatches to the parallel kernel for large inputs.
std::int64_t count_rows(const Database& db, const CompiledQuery& cq);

// Counts for many queries over one table; parallel across queries.
std::vector<std::int64_t> count_batch(const Database& db, const std::vector<Query>& queries);

// Histogram of rows over the cells of a projection. cell index =
// sum_i block_of_code[i][row[cols[i]]] * radix[i], where radix[i] is the
// per-column stride. Serial reference and OpenMP variant.
struct Projection {
    std::vector<int> cols;
    std::vector<std::vector<std::uint16_t>> block_of_code;  // per col, by code
    std::vector<std::uint64_t> radix;                       // per col
    std::uint64_t n_cells = 1;
};

std::vector<std::int64_t> cell_histogram_serial(const Database& db, const Projection& proj);
std::vector<std::int64_t> cell_histogram_parallel(const Database& db, const Projection& proj);
std::vector<std::int64_t> cell_histogram(const Database& db, const Projection& proj);

}  // namespace kernels
}  // namespace sigmacount
