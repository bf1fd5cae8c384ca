// cvqp: solve CVaR-constrained QPs from JSON files and run synthetic benchmarks.
//
//   cvqp solve problem.json [--eps-abs 1e-6 ...]
//   cvqp bench portfolio --m 1e3,1e4 --n 100 --seeds 3 --out portfolio.csv
//
// Exit codes: 0 solved, 2 iteration/time limit, 1 input or usage error.

#include "cvqp/bench.hpp"
#include "cvqp/io.hpp"
#include "cvqp/solver.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <iostream>
#include <string>
#include <vector>

namespace {

void add_solver_flags(CLI::App& cmd, cvqp::SolverSettings& s, double& time_limit, bool& fixed_rho) {
    cmd.add_option("--eps-abs", s.eps_abs, "absolute tolerance")->capture_default_str();
    cmd.add_option("--eps-rel", s.eps_rel, "relative tolerance")->capture_default_str();
    cmd.add_option("--rho0", s.rho0, "initial penalty")->capture_default_str();
    cmd.add_option("--alpha", s.alpha, "over-relaxation in (0, 2)")->capture_default_str();
    cmd.add_option("--max-iter", s.max_iter, "iteration cap")->capture_default_str();
    cmd.add_option("--time-limit", time_limit, "wall-clock cap in seconds (default: none)");
    cmd.add_flag("--no-adaptive-rho", fixed_rho, "keep rho fixed");
}

void finish_settings(cvqp::SolverSettings& s, double time_limit, bool fixed_rho) {
    if (time_limit > 0) s.time_limit = time_limit;
    s.adaptive_rho = !fixed_rho;
}

int run_solve(const std::string& path, const cvqp::SolverSettings& settings) {
    cvqp::CvqpProblem problem;
    try {
        problem = cvqp::load_problem(path);
        cvqp::validate(problem);
        settings.validate();
    } catch (const cvqp::Error& e) {
        std::cerr << "cvqp solve: " << cvqp::to_string(e.code()) << ": " << e.what() << '\n';
        return 1;
    }

    const cvqp::SolverResult result = cvqp::solve(problem, settings);
    std::cout << cvqp::result_to_json(result).dump() << '\n';
    switch (result.status) {
        case cvqp::Status::Optimal: return 0;
        case cvqp::Status::MaxIterations:
        case cvqp::Status::TimeLimit: return 2;
        case cvqp::Status::InfeasibleInput:
            std::cerr << "cvqp solve: " << result.message << '\n';
            return 1;
    }
    return 1;
}

std::vector<cvqp::Index> parse_sizes(const std::vector<std::string>& items) {
    std::vector<cvqp::Index> out;
    for (const auto& item : items) {
        std::size_t pos = 0;
        const double v = std::stod(item, &pos);
        if (pos != item.size() || !(v >= 1) || v != std::floor(v))
            throw CLI::ValidationError("--m", "'" + item + "' is not a positive integer");
        out.push_back(static_cast<cvqp::Index>(v));
    }
    return out;
}

double parse_real(const std::string& flag, const std::string& text) {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size() || !std::isfinite(v)) throw CLI::ValidationError(flag, "'" + text + "' is not a number");
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CVaR-constrained quadratic program solver"};
    app.require_subcommand(1);

    cvqp::SolverSettings solve_settings;
    double solve_time_limit = 0;
    bool solve_fixed_rho = false;
    std::string problem_path;
    auto* solve_cmd = app.add_subcommand("solve", "solve a problem stored as JSON");
    solve_cmd->add_option("file", problem_path, "problem file")->required();
    add_solver_flags(*solve_cmd, solve_settings, solve_time_limit, solve_fixed_rho);

    cvqp::BenchOptions bench;
    double bench_time_limit = 0;
    bool bench_fixed_rho = false;
    std::string family_name;
    std::vector<std::string> m_items;
    std::string dump_dir;
    auto* bench_cmd = app.add_subcommand("bench", "run a synthetic benchmark family");
    bench_cmd->add_option("family", family_name, "projection | portfolio | quantile")
        ->required()
        ->check(CLI::IsMember({"projection", "portfolio", "quantile"}));
    bench_cmd->add_option("--m", m_items, "scenario counts, e.g. 1e4,1e5")->delimiter(',')->required();
    bench_cmd->add_option("--n", bench.n, "assets / features")->capture_default_str();
    bench_cmd->add_option("--seeds", bench.seeds, "number of seeds (0..k-1)")->capture_default_str();
    bench_cmd->add_option("--eta", bench.eta, "projection difficulty")->capture_default_str();
    bench_cmd->add_option("--beta", bench.beta, "CVaR level")->capture_default_str();
    std::string kappa_text = "auto";
    bench_cmd->add_option("--kappa", kappa_text, "portfolio CVaR limit, or 'auto' for the equal-weight CVaR")
        ->capture_default_str();
    bench_cmd->add_option("--tau", bench.tau, "quantile level")->capture_default_str();
    bench_cmd->add_option("--out", bench.out_path, "CSV output (appended)")->required();
    bench_cmd->add_option("--dump", dump_dir, "directory for instance JSON files");
    bench_cmd->add_option("--parallel", bench.parallel, "concurrent cells (capped by CVQP_THREADS)")
        ->capture_default_str();
    add_solver_flags(*bench_cmd, bench.settings, bench_time_limit, bench_fixed_rho);

    try {
        app.parse(argc, argv);
        if (bench_cmd->parsed()) {
            bench.m_list = parse_sizes(m_items);
            if (kappa_text != "auto") bench.kappa = parse_real("--kappa", kappa_text);
        }
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const std::logic_error&) {
        std::cerr << "bench: --m and --kappa expect numbers\n";
        return 1;
    }

    if (solve_cmd->parsed()) {
        finish_settings(solve_settings, solve_time_limit, solve_fixed_rho);
        return run_solve(problem_path, solve_settings);
    }

    finish_settings(bench.settings, bench_time_limit, bench_fixed_rho);
    bench.family = *cvqp::parse_family(family_name);
    if (!dump_dir.empty()) bench.dump_dir = dump_dir;
    try {
        const auto records = cvqp::run_bench(bench, std::cout);
        for (const auto& r : records)
            if (r.status != "Optimal") return 2;
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "cvqp bench: " << e.what() << '\n';
        return 1;
    }
}
