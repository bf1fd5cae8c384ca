/**
 * @file bench.hpp
 * @brief Benchmark harness behind `cvqp bench`.
 *
 * Each (m, seed) cell generates one instance, solves (or projects) it and
 * yields one CSV row with the fixed header
 *
 *   family,m,n,seed,status,iters,total_s,fact_s,proj_s,objective,r_norm,s_norm
 *
 * For the projection family, iters counts decrease steps, objective is
 * (1/2)||v - z||^2 and r_norm is |f_k(z) - d|.
 */
#pragma once

#include "cvqp/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cvqp {

enum class Family { Projection, Portfolio, Quantile };

const char* to_string(Family f);
std::optional<Family> parse_family(const std::string& name);

struct BenchmarkRecord {
    Family family = Family::Projection;
    Index m = 0;
    Index n = 0;
    std::uint64_t seed = 0;
    std::string status;
    long iters = 0;
    double total_s = 0;
    double fact_s = 0;
    double proj_s = 0;
    double objective = 0;
    double r_norm = 0;
    double s_norm = 0;
};

struct BenchOptions {
    Family family = Family::Projection;
    std::vector<Index> m_list;
    Index n = 100;
    int seeds = 1;        ///< seeds 0 .. seeds-1
    double eta = 0.5;
    double beta = 0.95;
    std::optional<double> kappa;  ///< portfolio CVaR limit; unset: equal-weight CVaR
    double tau = 0.9;
    SolverSettings settings;
    std::string out_path;                 ///< empty: no CSV
    std::optional<std::string> dump_dir;  ///< write each instance as JSON
    int parallel = 1;
};

extern const char* const kCsvHeader;

std::string to_csv_row(const BenchmarkRecord& rec);

/// Runs a single cell; never throws, failures land in `status`.
BenchmarkRecord run_cell(const BenchOptions& opts, Index m, std::uint64_t seed);

/**
 * Runs every (m, seed) cell, appends rows to opts.out_path (header written
 * only when the file is new or empty) and prints per-m mean times to `log`.
 * Rows come back in (m, seed) order regardless of parallelism.
 * Throws std::runtime_error when the output file cannot be opened and
 * Error(BadSettings) on an empty m-list.
 */
std::vector<BenchmarkRecord> run_bench(const BenchOptions& opts, std::ostream& log);

/// Worker count for `requested`, capped by the CVQP_THREADS environment variable.
int effective_threads(int requested);

}  // namespace cvqp
