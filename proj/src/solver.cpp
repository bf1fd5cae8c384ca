#include "cvqp/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace cvqp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr int kHistoryInterval = 25;
constexpr double kFeasibilityScale = 10.0;

// CVaR and side-constraint violation of the current x, from the cached products.
bool within_feasibility(const Workspace& ws, double tol) {
    const CvqpProblem& pr = *ws.problem;
    for (Index i = 0; i < pr.p(); ++i)
        if (ws.Bx[i] < pr.l[i] - tol || ws.Bx[i] > pr.u[i] + tol) return false;
    if (ws.spec.d == std::numeric_limits<double>::infinity()) return true;
    const double k = static_cast<double>(ws.spec.k);
    return (sum_k_largest(ws.Ax, ws.spec.k) - ws.spec.d) / k <= tol;
}

}  // namespace

const char* to_string(Status status) {
    switch (status) {
        case Status::Optimal: return "Optimal";
        case Status::MaxIterations: return "MaxIterations";
        case Status::TimeLimit: return "TimeLimit";
        case Status::InfeasibleInput: return "InfeasibleInput";
    }
    return "Unknown";
}

// ---------------------------------------------------------------------------
// Factorization

MatrixXd gram_matrix(const MatrixXd& A, const MatrixXd& B) {
    const Index n = A.cols();
    MatrixXd C = MatrixXd::Zero(n, n);
    C.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
    if (B.rows() > 0) C.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
    C.triangularView<Eigen::StrictlyUpper>() = C.transpose();
    return C;
}

Factorization::Factorization(const ObjectiveMatrix& P, const MatrixXd& gram, double rho) {
    MatrixXd M = rho * gram;
    P.add_to(M);
    llt_.compute(M);
    bool ok = llt_.info() == Eigen::Success;
    if (ok && M.rows() > 0) {
        // Cholesky succeeds on singular PSD matrices up to rounding; reject
        // pivots that are pure noise relative to the scale of M.
        const double scale = M.diagonal().cwiseAbs().maxCoeff();
        const double pivot = llt_.matrixLLT().diagonal().cwiseAbs2().minCoeff();
        ok = scale > 0.0 && pivot > 1e-13 * scale;
    }
    if (!ok)
        throw Error(ErrorCode::NotPositiveDefinite,
                    "M = P + rho (A^T A + B^T B) is not positive definite; "
                    "P, A and B must not share a common nullspace");
}

Factorization factorize(const ObjectiveMatrix& P, const MatrixXd& A, const MatrixXd& B, double rho) {
    return Factorization(P, gram_matrix(A, B), rho);
}

// ---------------------------------------------------------------------------
// Workspace

Workspace::Workspace(const CvqpProblem& pr, double rho0)
    : problem(&pr),
      spec(validate(pr)),
      rho(rho0),
      x(VectorXd::Zero(pr.n())),
      z(VectorXd::Zero(pr.m())),
      zt(VectorXd::Zero(pr.p())),
      u(VectorXd::Zero(pr.m())),
      ut(VectorXd::Zero(pr.p())),
      Ax(VectorXd::Zero(pr.m())),
      Bx(VectorXd::Zero(pr.p())),
      z_half(VectorXd::Zero(pr.m())),
      zt_half(VectorXd::Zero(pr.p())),
      At_z(VectorXd::Zero(pr.n())),
      At_u(VectorXd::Zero(pr.n())),
      projector(pr.m(), spec) {
    const auto t0 = Clock::now();
    gram = gram_matrix(pr.A, pr.B);
    factor = Factorization(pr.P, gram, rho);
    factorization_seconds += seconds_since(t0);
}

void Workspace::refresh_products() {
    At_z.noalias() = problem->A.transpose() * z;
    At_u.noalias() = problem->A.transpose() * u;
    if (problem->p() > 0) {
        At_z.noalias() += problem->B.transpose() * zt;
        At_u.noalias() += problem->B.transpose() * ut;
    }
}

void Workspace::set_rho(double new_rho) {
    const auto t0 = Clock::now();
    factor = Factorization(problem->P, gram, new_rho);
    rho = new_rho;
    factorization_seconds += seconds_since(t0);
}

// ---------------------------------------------------------------------------
// ADMM steps

VectorXd clip(const Eigen::Ref<const VectorXd>& v, const Eigen::Ref<const VectorXd>& l,
              const Eigen::Ref<const VectorXd>& u) {
    return v.cwiseMax(l).cwiseMin(u);
}

const VectorXd& x_update(Workspace& ws) {
    VectorXd rhs = ws.rho * (ws.At_z - ws.At_u) - ws.problem->q;
    ws.x = ws.factor.solve(rhs);
    return ws.x;
}

Residuals iterate(Workspace& ws, const SolverSettings& settings) {
    const CvqpProblem& pr = *ws.problem;
    const double alpha = settings.alpha;

    x_update(ws);
    ws.Ax.noalias() = pr.A * ws.x;
    if (pr.p() > 0) ws.Bx.noalias() = pr.B * ws.x;

    ws.z_half = alpha * ws.Ax + (1.0 - alpha) * ws.z;
    ws.zt_half = alpha * ws.Bx + (1.0 - alpha) * ws.zt;

    VectorXd target = ws.z_half + ws.u;
    const auto t0 = Clock::now();
    ws.projector.project(target, ws.z, &ws.last_projection);
    ws.projection_seconds += seconds_since(t0);
    ws.zt = clip(ws.zt_half + ws.ut, pr.l, pr.u);

    ws.u += ws.z_half - ws.z;
    ws.ut += ws.zt_half - ws.zt;

    const VectorXd At_z_prev = ws.At_z;
    ws.refresh_products();

    Residuals res;
    const double r_sq = (ws.Ax - ws.z).squaredNorm() + (ws.Bx - ws.zt).squaredNorm();
    res.r_norm = std::sqrt(r_sq);
    res.s_norm = ws.rho * (ws.At_z - At_z_prev).norm();

    const double ax_norm = std::sqrt(ws.Ax.squaredNorm() + ws.Bx.squaredNorm());
    const double z_norm = std::sqrt(ws.z.squaredNorm() + ws.zt.squaredNorm());
    const double mp = static_cast<double>(pr.m() + pr.p());
    const double n = static_cast<double>(pr.n());
    res.eps_pri = std::sqrt(mp) * settings.eps_abs + settings.eps_rel * std::max(ax_norm, z_norm);
    res.eps_dual = std::sqrt(n) * settings.eps_abs + settings.eps_rel * ws.rho * ws.At_u.norm();
    return res;
}

bool update_rho(Workspace& ws, const Residuals& res, const SolverSettings& settings) {
    double new_rho = ws.rho;
    if (res.r_norm > settings.mu * res.s_norm)
        new_rho = std::min(ws.rho * settings.rho_scale, settings.rho_max);
    else if (res.s_norm > settings.mu * res.r_norm)
        new_rho = std::max(ws.rho / settings.rho_scale, settings.rho_min);
    if (new_rho == ws.rho) return false;

    // u = y / rho, so the unscaled duals stay fixed across the change.
    const double ratio = ws.rho / new_rho;
    ws.u *= ratio;
    ws.ut *= ratio;
    ws.At_u *= ratio;
    ws.set_rho(new_rho);
    return true;
}

SolverResult solve(const CvqpProblem& problem, const SolverSettings& settings) {
    const auto t_start = Clock::now();
    settings.validate();
    validate(problem);

    SolverResult result;
    std::optional<Workspace> ws_storage;
    try {
        ws_storage.emplace(problem, settings.rho0);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NotPositiveDefinite) throw;
        result.status = Status::InfeasibleInput;
        result.message = e.what();
        result.x = VectorXd::Zero(problem.n());
        result.objective = problem.objective(result.x);
        result.timings.total = seconds_since(t_start);
        return result;
    }
    Workspace& ws = *ws_storage;

    Residuals res;
    int iter = 0;
    result.status = Status::MaxIterations;
    while (iter < settings.max_iter) {
        ++iter;
        try {
            res = iterate(ws, settings);
        } catch (const Error& e) {
            // Only reachable when the iterates blow up to non-finite values.
            result.status = Status::InfeasibleInput;
            result.message = e.what();
            break;
        }

        const bool done = res.converged() && within_feasibility(ws, kFeasibilityScale * settings.eps_abs);
        if (iter % kHistoryInterval == 0 || done)
            result.history.push_back({iter, res, ws.rho});
        if (done) {
            result.status = Status::Optimal;
            break;
        }
        if (settings.time_limit && seconds_since(t_start) > *settings.time_limit) {
            result.status = Status::TimeLimit;
            break;
        }
        if (settings.adaptive_rho && iter % settings.rho_update_interval == 0) {
            try {
                if (update_rho(ws, res, settings)) ++result.refactorizations;
            } catch (const Error& e) {
                result.status = Status::InfeasibleInput;
                result.message = e.what();
                break;
            }
        }
    }
    if (result.history.empty() || result.history.back().iteration != iter)
        result.history.push_back({iter, res, ws.rho});

    result.x = ws.x;
    result.objective = problem.objective(ws.x);
    result.iterations = iter;
    result.final_residuals = res;
    result.timings.factorization = ws.factorization_seconds;
    result.timings.projection = ws.projection_seconds;
    result.timings.total = seconds_since(t_start);
    return result;
}

Feasibility feasibility(const CvqpProblem& problem, const Eigen::Ref<const VectorXd>& x) {
    Feasibility f;
    if (problem.m() > 0) {
        const VectorXd Ax = problem.A * x;
        f.cvar_excess = std::max(0.0, cvar(Ax, problem.beta) - problem.kappa);
    }
    if (problem.p() > 0) {
        const VectorXd Bx = problem.B * x;
        const VectorXd below = (problem.l - Bx).cwiseMax(0.0);
        const VectorXd above = (Bx - problem.u).cwiseMax(0.0);
        f.bound_excess = std::max(below.maxCoeff(), above.maxCoeff());
    }
    return f;
}

}  // namespace cvqp
