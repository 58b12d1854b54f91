// Timing comparison of the row-scan kernels: serial reference vs the
// OpenMP dispatch, for single-query counting, batched counting, and the
// projection histogram. Not a correctness test; equality is still checked
// so a wrong parallel result cannot hide behind a fast one.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sigmacount/harness.hpp"
#include "sigmacount/kernels.hpp"
#include "sigmacount/query.hpp"

using namespace sigmacount;

namespace {

double seconds(std::chrono::steady_clock::time_point a,
               std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, seconds(t0, t1));
    }
    return best;
}

}  // namespace

int main() {
    const std::int64_t rows = 2'000'000;
    const int width = 21;
    const Database db = harness::gen_sim_db(rows, width, 7);

    harness::WorkloadSpec spec;
    spec.n_queries = 256;
    spec.p_cols = width;
    spec.seed = 11;
    const std::vector<Query> queries = harness::gen_queries(spec, db.schema());

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (compiled without OpenMP)\n");
#endif
    std::printf("table: %lld rows x %d cols\n\n", static_cast<long long>(rows), width);

    // single query, widest match surface (unconstrained scans every row)
    const kernels::CompiledQuery cq = kernels::compile(db.schema(), queries[0]);
    volatile std::int64_t sink = 0;
    const double t_count_s =
        time_best_of(3, [&] { sink = kernels::count_rows_serial(db, cq); });
    const std::int64_t serial_count = sink;
    const double t_count_p =
        time_best_of(3, [&] { sink = kernels::count_rows_parallel(db, cq); });
    if (sink != serial_count) {
        std::printf("MISMATCH: count_rows serial=%lld parallel=%lld\n",
                    static_cast<long long>(serial_count), static_cast<long long>(sink));
        return 1;
    }
    std::printf("count_rows       serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n",
                t_count_s * 1e3, t_count_p * 1e3, t_count_s / t_count_p);

    // batch of 256 queries (parallel over queries)
    std::vector<std::int64_t> batch_serial;
    const double t_batch_s = time_best_of(1, [&] {
        batch_serial.clear();
        for (const Query& q : queries) {
            batch_serial.push_back(
                kernels::count_rows_serial(db, kernels::compile(db.schema(), q)));
        }
    });
    std::vector<std::int64_t> batch_parallel;
    const double t_batch_p =
        time_best_of(1, [&] { batch_parallel = kernels::count_batch(db, queries); });
    if (batch_serial != batch_parallel) {
        std::printf("MISMATCH: count_batch disagrees with the serial loop\n");
        return 1;
    }
    std::printf("count_batch(256) serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n",
                t_batch_s * 1e3, t_batch_p * 1e3, t_batch_s / t_batch_p);

    // histogram over an 8-column projection (256 cells)
    kernels::Projection proj;
    for (int c = 0; c < 8; ++c) proj.cols.push_back(c);
    proj.block_of_code.assign(8, {0, 1});
    proj.radix.assign(8, 0);
    proj.n_cells = 1;
    for (int c = 7; c >= 0; --c) {
        proj.radix[c] = proj.n_cells;
        proj.n_cells *= 2;
    }
    std::vector<std::int64_t> hist_serial, hist_parallel;
    const double t_hist_s =
        time_best_of(3, [&] { hist_serial = kernels::cell_histogram_serial(db, proj); });
    const double t_hist_p =
        time_best_of(3, [&] { hist_parallel = kernels::cell_histogram_parallel(db, proj); });
    if (hist_serial != hist_parallel) {
        std::printf("MISMATCH: cell_histogram serial vs parallel\n");
        return 1;
    }
    std::printf("cell_histogram   serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n",
                t_hist_s * 1e3, t_hist_p * 1e3, t_hist_s / t_hist_p);

    return 0;
}
