/**
 * @file core.hpp
 * @brief Problem data, settings and CVaR helpers shared by the solver stack.
 *
 * A CVaR-constrained quadratic program (CVQP) is
 *
 *   minimize    (1/2) x^T P x + q^T x
 *   subject to  cvar_beta(A x) <= kappa
 *               l <= B x <= u
 *
 * with x in R^n, A in R^{m x n} (one row per loss scenario) and B in R^{p x n}.
 * The sample CVaR of z in R^m equals f_k(z) / k, where f_k sums the k largest
 * entries and k = ceil((1 - beta) m).
 */
#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace cvqp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ErrorCode {
    DimensionMismatch,
    BadBounds,
    BadBeta,
    AsymmetricP,
    KOutOfRange,
    NotFinite,
    BadSettings,
    ParseError,
    NotPositiveDefinite,
};

const char* to_string(ErrorCode code);

/// Exception carrying the violated invariant.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/**
 * @brief Objective Hessian P, held densely or as a diagonal.
 *
 * The diagonal form lets the solver assemble P + rho C without densifying P.
 */
class ObjectiveMatrix {
public:
    ObjectiveMatrix() = default;

    static ObjectiveMatrix dense(MatrixXd p);
    static ObjectiveMatrix diagonal(VectorXd d);
    static ObjectiveMatrix zero(Index n) { return diagonal(VectorXd::Zero(n)); }

    Index size() const { return is_diagonal_ ? diag_.size() : dense_.rows(); }
    bool is_diagonal() const { return is_diagonal_; }

    const MatrixXd& dense_matrix() const { return dense_; }
    const VectorXd& diagonal_entries() const { return diag_; }

    VectorXd apply(const Eigen::Ref<const VectorXd>& x) const;
    double quadratic_form(const Eigen::Ref<const VectorXd>& x) const;
    MatrixXd to_dense() const;
    /// out += scale * P
    void add_to(MatrixXd& out, double scale = 1.0) const;

private:
    bool is_diagonal_ = true;
    MatrixXd dense_;
    VectorXd diag_;
};

struct CvqpProblem {
    ObjectiveMatrix P;
    VectorXd q;
    MatrixXd A;  ///< m x n scenario loss map
    MatrixXd B;  ///< p x n side constraints
    VectorXd l;  ///< may hold -inf
    VectorXd u;  ///< may hold +inf
    double beta = 0.95;
    double kappa = 0.0;

    Index n() const { return q.size(); }
    Index m() const { return A.rows(); }
    Index p() const { return B.rows(); }

    double objective(const Eigen::Ref<const VectorXd>& x) const {
        return 0.5 * P.quadratic_form(x) + q.dot(x);
    }
};

/// Sum-of-k-largest form of the CVaR constraint: f_k(z) <= d with d = kappa k.
struct CvarSpec {
    Index k = 1;
    double d = 0.0;
};

/**
 * Number of tail scenarios, ceil((1 - beta) m).
 *
 * Products that land within a few ulps of an integer are snapped to it, so
 * beta = 0.95, m = 100 gives 5 rather than the 6 that naive rounding of
 * 5.000000000000004 would produce.
 */
Index tail_count(Index m, double beta);

/// Checks every problem invariant and returns the CVaR spec, or throws Error.
CvarSpec validate(const CvqpProblem& problem);

/// Sum of the k largest entries of z, in O(m) expected time.
double sum_k_largest(const Eigen::Ref<const VectorXd>& z, Index k);

/// Sample CVaR at level beta: f_k(z) / k with k = tail_count(m, beta).
double cvar(const Eigen::Ref<const VectorXd>& z, double beta);

/**
 * Epigraph lift of
 *
 *   minimize (1/2) x^T P x + q^T x + cvar_beta(A x)   s.t.  l <= B x <= u
 *
 * into CVQP form over (x, t): the CVaR row map becomes [A | -1] with kappa = 0
 * and t enters the objective with unit cost.
 */
CvqpProblem lift_cvar_objective(const ObjectiveMatrix& P, const VectorXd& q,
                                const MatrixXd& A, const MatrixXd& B,
                                const VectorXd& l, const VectorXd& u,
                                double beta);

/// ADMM hyperparameters. Defaults follow the reference experiments.
struct SolverSettings {
    double rho0 = 1e-2;
    double alpha = 1.7;
    double eps_abs = 1e-4;
    double eps_rel = 1e-3;
    double mu = 10.0;
    double rho_scale = 2.0;
    int rho_update_interval = 50;
    int max_iter = 100000;
    std::optional<double> time_limit;  ///< seconds
    bool adaptive_rho = true;
    double rho_min = 1e-6;
    double rho_max = 1e6;

    /// Throws Error(BadSettings) on the first out-of-range field.
    void validate() const;
};

}  // namespace cvqp
