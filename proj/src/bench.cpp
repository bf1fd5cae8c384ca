#include "cvqp/bench.hpp"

#include "cvqp/generators.hpp"
#include "cvqp/io.hpp"
#include "cvqp/projection.hpp"
#include "cvqp/solver.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <thread>

namespace cvqp {

const char* const kCsvHeader = "family,m,n,seed,status,iters,total_s,fact_s,proj_s,objective,r_norm,s_norm";

const char* to_string(Family f) {
    switch (f) {
        case Family::Projection: return "projection";
        case Family::Portfolio: return "portfolio";
        case Family::Quantile: return "quantile";
    }
    return "unknown";
}

std::optional<Family> parse_family(const std::string& name) {
    if (name == "projection") return Family::Projection;
    if (name == "portfolio") return Family::Portfolio;
    if (name == "quantile") return Family::Quantile;
    return std::nullopt;
}

std::string to_csv_row(const BenchmarkRecord& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%ld,%ld,%llu,%s,%ld,%.6e,%.6e,%.6e,%.17g,%.17g,%.17g",
                  to_string(r.family), static_cast<long>(r.m), static_cast<long>(r.n),
                  static_cast<unsigned long long>(r.seed), r.status.c_str(), r.iters, r.total_s,
                  r.fact_s, r.proj_s, r.objective, r.r_norm, r.s_norm);
    return buf;
}

namespace {

using Clock = std::chrono::steady_clock;

std::string dump_name(const BenchOptions& o, Index m, Index n, std::uint64_t seed) {
    return (std::filesystem::path(*o.dump_dir) /
            (std::string(to_string(o.family)) + "_m" + std::to_string(m) + "_n" + std::to_string(n) +
             "_s" + std::to_string(seed) + ".json"))
        .string();
}

BenchmarkRecord projection_cell(const BenchOptions& o, Index m, std::uint64_t seed) {
    BenchmarkRecord rec;
    const ProjectionInstance inst = gen_projection({m, o.beta, o.eta, seed});
    if (o.dump_dir) {
        std::ofstream out(dump_name(o, m, 0, seed));
        nlohmann::json doc;
        doc["v"] = std::vector<double>(inst.v.data(), inst.v.data() + inst.v.size());
        doc["k"] = inst.spec.k;
        doc["d"] = inst.spec.d;
        out << doc.dump() << '\n';
    }
    ProjectionInfo info;
    const auto t0 = Clock::now();
    const VectorXd z = project_sum_k_largest(inst.v, inst.spec, &info);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    rec.status = "Optimal";
    rec.iters = static_cast<long>(info.steps);
    rec.total_s = secs;
    rec.proj_s = secs;
    rec.objective = 0.5 * (inst.v - z).squaredNorm();
    rec.r_norm = std::abs(sum_k_largest(z, inst.spec.k) - inst.spec.d);
    return rec;
}

BenchmarkRecord solver_cell(const BenchOptions& o, Index m, std::uint64_t seed) {
    CvqpProblem pr;
    if (o.family == Family::Portfolio) {
        PortfolioConfig cfg;
        cfg.n_assets = o.n;
        cfg.m_scenarios = m;
        cfg.beta = o.beta;
        if (o.kappa)
            cfg.kappa = *o.kappa;
        else
            cfg.kappa_rule = KappaRule::EqualWeight;
        cfg.seed = seed;
        pr = gen_portfolio(cfg);
    } else {
        QuantileConfig cfg;
        cfg.n_features = o.n;
        cfg.m_samples = m;
        cfg.tau = o.tau;
        cfg.seed = seed;
        pr = gen_quantile(cfg);
    }
    if (o.dump_dir) save_problem(pr, dump_name(o, m, o.n, seed));

    const SolverResult res = solve(pr, o.settings);
    BenchmarkRecord rec;
    rec.status = to_string(res.status);
    rec.iters = res.iterations;
    rec.total_s = res.timings.total;
    rec.fact_s = res.timings.factorization;
    rec.proj_s = res.timings.projection;
    rec.objective = res.objective;
    rec.r_norm = res.final_residuals.r_norm;
    rec.s_norm = res.final_residuals.s_norm;
    return rec;
}

}  // namespace

BenchmarkRecord run_cell(const BenchOptions& o, Index m, std::uint64_t seed) {
    BenchmarkRecord rec;
    try {
        rec = o.family == Family::Projection ? projection_cell(o, m, seed) : solver_cell(o, m, seed);
    } catch (const std::exception& e) {
        rec.status = "Error";
        std::fprintf(stderr, "cell m=%ld seed=%llu failed: %s\n", static_cast<long>(m),
                     static_cast<unsigned long long>(seed), e.what());
    }
    rec.family = o.family;
    rec.m = m;
    rec.n = o.family == Family::Projection ? 0 : o.n;
    rec.seed = seed;
    return rec;
}

int effective_threads(int requested) {
    int n = std::max(1, requested);
    if (const char* env = std::getenv("CVQP_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return n;
}

std::vector<BenchmarkRecord> run_bench(const BenchOptions& o, std::ostream& log) {
    if (o.m_list.empty()) throw Error(ErrorCode::BadSettings, "bench: empty m-list");
    if (o.seeds < 1) throw Error(ErrorCode::BadSettings, "bench: need at least one seed");
    if (o.family != Family::Projection) o.settings.validate();

    std::ofstream csv;
    if (!o.out_path.empty()) {
        const bool fresh = !std::filesystem::exists(o.out_path) || std::filesystem::file_size(o.out_path) == 0;
        csv.open(o.out_path, std::ios::app);
        if (!csv) throw std::runtime_error("cannot open " + o.out_path + " for writing");
        if (fresh) csv << kCsvHeader << '\n' << std::flush;
    }
    if (o.dump_dir) std::filesystem::create_directories(*o.dump_dir);

    struct Cell {
        Index m;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (Index m : o.m_list)
        for (int s = 0; s < o.seeds; ++s) cells.push_back({m, static_cast<std::uint64_t>(s)});

    std::vector<BenchmarkRecord> records(cells.size());
    const int workers = std::min<int>(effective_threads(o.parallel), static_cast<int>(cells.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            records[i] = run_cell(o, cells[i].m, cells[i].seed);
            if (csv.is_open()) csv << to_csv_row(records[i]) << '\n' << std::flush;
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++)
                    records[i] = run_cell(o, cells[i].m, cells[i].seed);
            });
        for (auto& t : pool) t.join();
        if (csv.is_open())
            for (const auto& r : records) csv << to_csv_row(r) << '\n';
    }

    std::map<Index, std::pair<double, int>> per_m;
    for (const auto& r : records) {
        auto& acc = per_m[r.m];
        acc.first += r.total_s;
        acc.second += 1;
    }
    for (Index m : o.m_list) {
        const auto it = per_m.find(m);
        if (it == per_m.end()) continue;
        char line[128];
        std::snprintf(line, sizeof line, "%s m=%ld mean_total_s=%.6e over %d seeds", to_string(o.family),
                      static_cast<long>(m), it->second.first / it->second.second, it->second.second);
        log << line << '\n';
        per_m.erase(it);
    }
    return records;
}

}  // namespace cvqp
