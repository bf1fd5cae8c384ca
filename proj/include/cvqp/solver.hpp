/**
 * @file solver.hpp
 * @brief Over-relaxed ADMM for CVaR-constrained quadratic programs.
 *
 * Splitting A x = z, B x = zt gives, with scaled duals u and ut,
 *
 *   x      = argmin (1/2) x^T M x + p^T x,   M = P + rho (A^T A + B^T B)
 *   zh     = alpha A x + (1 - alpha) z,       zth likewise with B
 *   z      = proj_cvar(zh + u)
 *   zt     = clip(zth + ut, l, u)
 *   u     += zh - z,                          ut += zth - zt
 *
 * M is factorized once and refactorized only when rho changes.
 */
#pragma once

#include "cvqp/core.hpp"
#include "cvqp/projection.hpp"

#include <Eigen/Cholesky>

#include <string>
#include <vector>

namespace cvqp {

enum class Status { Optimal, MaxIterations, TimeLimit, InfeasibleInput };

const char* to_string(Status status);

struct Residuals {
    double r_norm = 0;    ///< ||(A x - z, B x - zt)||
    double s_norm = 0;    ///< rho ||A^T (z - z_prev) + B^T (zt - zt_prev)||
    double eps_pri = 0;
    double eps_dual = 0;

    bool converged() const { return r_norm <= eps_pri && s_norm <= eps_dual; }
};

struct IterationRecord {
    int iteration = 0;
    Residuals residuals;
    double rho = 0;
};

struct Timings {
    double factorization = 0;  ///< seconds, including refactorizations
    double projection = 0;     ///< seconds spent in the CVaR projection
    double total = 0;
};

struct SolverResult {
    VectorXd x;
    Status status = Status::MaxIterations;
    double objective = 0;
    int iterations = 0;
    int refactorizations = 0;
    Residuals final_residuals;
    std::vector<IterationRecord> history;  ///< every 25th sweep plus the last
    Timings timings;
    std::string message;  ///< diagnostic for InfeasibleInput
};

/// Dense Cholesky of M = P + rho C, reusable across right-hand sides.
class Factorization {
public:
    Factorization() = default;

    /// Throws Error(NotPositiveDefinite) when M is not numerically positive definite.
    Factorization(const ObjectiveMatrix& P, const MatrixXd& gram, double rho);

    VectorXd solve(const Eigen::Ref<const VectorXd>& rhs) const { return llt_.solve(rhs); }
    Index size() const { return llt_.rows(); }

private:
    Eigen::LLT<MatrixXd> llt_;
};

/// A^T A + B^T B.
MatrixXd gram_matrix(const MatrixXd& A, const MatrixXd& B);

/// Factorization of P + rho (A^T A + B^T B).
Factorization factorize(const ObjectiveMatrix& P, const MatrixXd& A, const MatrixXd& B, double rho);

/**
 * @brief Iterates and caches for one solve.
 *
 * Keeps A^T z + B^T zt and A^T u + B^T ut so that a sweep costs one product
 * with A and two with A^T.
 */
struct Workspace {
    Workspace(const CvqpProblem& problem, double rho);

    const CvqpProblem* problem;
    CvarSpec spec;
    MatrixXd gram;
    Factorization factor;
    double rho;
    double factorization_seconds = 0;

    VectorXd x, z, zt, u, ut;
    VectorXd Ax, Bx, z_half, zt_half;
    VectorXd At_z;  ///< A^T z + B^T zt
    VectorXd At_u;  ///< A^T u + B^T ut

    SumKLargestProjector projector;
    ProjectionInfo last_projection;
    double projection_seconds = 0;

    /// Recomputes the cached transposed products from the iterates.
    void refresh_products();
    /// Refactorizes M at a new penalty without touching the iterates.
    void set_rho(double new_rho);
};

/// Entrywise clip of v to [l, u] (infinite bounds allowed).
VectorXd clip(const Eigen::Ref<const VectorXd>& v, const Eigen::Ref<const VectorXd>& l,
              const Eigen::Ref<const VectorXd>& u);

/// x = -M^{-1} p with p = q - rho A^T (z - u) - rho B^T (zt - ut). Stores and returns x.
const VectorXd& x_update(Workspace& ws);

/// One full ADMM sweep; returns residuals at the new iterates.
Residuals iterate(Workspace& ws, const SolverSettings& settings);

/**
 * Residual-balancing penalty update. Scales rho by rho_scale when one
 * residual exceeds mu times the other, rescales the scaled duals and
 * refactorizes. Returns true when M was refactorized.
 */
bool update_rho(Workspace& ws, const Residuals& res, const SolverSettings& settings);

/**
 * Runs ADMM from zero until the residual test passes and x itself is within
 * 10 eps_abs of the CVaR limit and of [l, u], or until max_iter / time_limit.
 */
SolverResult solve(const CvqpProblem& problem, const SolverSettings& settings = {});

/// Largest violations of the CVaR and side constraints at x (0 when satisfied).
struct Feasibility {
    double cvar_excess = 0;   ///< max(0, cvar(Ax) - kappa)
    double bound_excess = 0;  ///< max over rows of distance of (Bx)_i outside [l_i, u_i]
};

Feasibility feasibility(const CvqpProblem& problem, const Eigen::Ref<const VectorXd>& x);

}  // namespace cvqp
