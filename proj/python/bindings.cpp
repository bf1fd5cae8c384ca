#include "cvqp/core.hpp"
#include "cvqp/generators.hpp"
#include "cvqp/projection.hpp"
#include "cvqp/solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace cvqp;

namespace {

CvqpProblem make_problem(const MatrixXd& P, const VectorXd& q, const MatrixXd& A,
                         const MatrixXd& B, const VectorXd& l, const VectorXd& u,
                         double beta, double kappa) {
    CvqpProblem pr;
    pr.P = ObjectiveMatrix::dense(P);
    pr.q = q;
    pr.A = A;
    pr.B = B;
    pr.l = l;
    pr.u = u;
    pr.beta = beta;
    pr.kappa = kappa;
    return pr;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "CVaR-constrained quadratic programs: projection, ADMM solver and generators";

    py::register_exception<Error>(m, "CvqpError", PyExc_ValueError);

    py::enum_<Status>(m, "Status")
        .value("Optimal", Status::Optimal)
        .value("MaxIterations", Status::MaxIterations)
        .value("TimeLimit", Status::TimeLimit)
        .value("InfeasibleInput", Status::InfeasibleInput);

    py::class_<CvarSpec>(m, "CvarSpec")
        .def(py::init([](Index k, double d) { return CvarSpec{k, d}; }), py::arg("k"), py::arg("d"))
        .def_readwrite("k", &CvarSpec::k)
        .def_readwrite("d", &CvarSpec::d);

    py::class_<CvqpProblem>(m, "Problem")
        .def(py::init(&make_problem), py::arg("P"), py::arg("q"), py::arg("A"), py::arg("B"),
             py::arg("l"), py::arg("u"), py::arg("beta"), py::arg("kappa"))
        .def_property_readonly("P", [](const CvqpProblem& p) { return p.P.to_dense(); })
        .def_readonly("q", &CvqpProblem::q)
        .def_readonly("A", &CvqpProblem::A)
        .def_readonly("B", &CvqpProblem::B)
        .def_readonly("l", &CvqpProblem::l)
        .def_readonly("u", &CvqpProblem::u)
        .def_readonly("beta", &CvqpProblem::beta)
        .def_readonly("kappa", &CvqpProblem::kappa)
        .def_property_readonly("n", &CvqpProblem::n)
        .def_property_readonly("m", &CvqpProblem::m)
        .def("objective", &CvqpProblem::objective, py::arg("x"));

    py::class_<SolverSettings>(m, "Settings")
        .def(py::init<>())
        .def_readwrite("rho0", &SolverSettings::rho0)
        .def_readwrite("alpha", &SolverSettings::alpha)
        .def_readwrite("eps_abs", &SolverSettings::eps_abs)
        .def_readwrite("eps_rel", &SolverSettings::eps_rel)
        .def_readwrite("mu", &SolverSettings::mu)
        .def_readwrite("rho_scale", &SolverSettings::rho_scale)
        .def_readwrite("rho_update_interval", &SolverSettings::rho_update_interval)
        .def_readwrite("max_iter", &SolverSettings::max_iter)
        .def_readwrite("time_limit", &SolverSettings::time_limit)
        .def_readwrite("adaptive_rho", &SolverSettings::adaptive_rho);

    py::class_<SolverResult>(m, "Result")
        .def_readonly("x", &SolverResult::x)
        .def_readonly("status", &SolverResult::status)
        .def_readonly("objective", &SolverResult::objective)
        .def_readonly("iterations", &SolverResult::iterations)
        .def_readonly("refactorizations", &SolverResult::refactorizations)
        .def_readonly("message", &SolverResult::message)
        .def_property_readonly("solve_time", [](const SolverResult& r) { return r.timings.total; });

    m.def("tail_count", &tail_count, py::arg("m"), py::arg("beta"));
    m.def("sum_k_largest", [](const VectorXd& z, Index k) { return sum_k_largest(z, k); },
          py::arg("z"), py::arg("k"));
    m.def("cvar", [](const VectorXd& z, double beta) { return cvar(z, beta); }, py::arg("z"),
          py::arg("beta"));
    m.def("project_sum_k_largest",
          [](const VectorXd& v, Index k, double d) { return project_sum_k_largest(v, CvarSpec{k, d}); },
          py::arg("v"), py::arg("k"), py::arg("d"));
    m.def("project_cvar",
          [](const VectorXd& v, double beta, double kappa) { return project_cvar(v, beta, kappa); },
          py::arg("v"), py::arg("beta"), py::arg("kappa"));
    m.def("solve", &solve, py::arg("problem"), py::arg("settings") = SolverSettings{},
          py::call_guard<py::gil_scoped_release>());

    m.def(
        "gen_portfolio",
        [](Index n, Index m_scen, std::uint64_t seed, std::optional<double> kappa) {
            PortfolioConfig cfg;
            cfg.n_assets = n;
            cfg.m_scenarios = m_scen;
            cfg.seed = seed;
            if (kappa) cfg.kappa = *kappa;
            else cfg.kappa_rule = KappaRule::EqualWeight;
            return gen_portfolio(cfg);
        },
        py::arg("n"), py::arg("m"), py::arg("seed") = 0, py::arg("kappa") = py::none());
    m.def(
        "gen_quantile",
        [](Index n, Index m_samp, double tau, std::uint64_t seed) {
            QuantileConfig cfg;
            cfg.n_features = n;
            cfg.m_samples = m_samp;
            cfg.tau = tau;
            cfg.seed = seed;
            return gen_quantile(cfg);
        },
        py::arg("n"), py::arg("m"), py::arg("tau") = 0.9, py::arg("seed") = 0);
    m.def(
        "gen_projection",
        [](Index m_len, double beta, double eta, std::uint64_t seed) {
            ProjectionConfig cfg;
            cfg.m = m_len;
            cfg.beta = beta;
            cfg.eta = eta;
            cfg.seed = seed;
            const ProjectionInstance inst = gen_projection(cfg);
            return py::make_tuple(inst.v, inst.spec.k, inst.spec.d);
        },
        py::arg("m"), py::arg("beta") = 0.95, py::arg("eta") = 0.5, py::arg("seed") = 0);
}
