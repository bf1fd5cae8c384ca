/**
 * @file generators.hpp
 * @brief Seeded synthetic instances: projection, portfolio and quantile regression.
 *
 * Every builder is a pure function of its config; the same seed gives
 * bitwise-identical data.
 */
#pragma once

#include "cvqp/core.hpp"

#include <cstdint>

namespace cvqp {

struct ProjectionConfig {
    Index m = 10000;
    double beta = 0.95;
    double eta = 0.5;  ///< d = eta f_k(v); larger is easier
    std::uint64_t seed = 0;

    void validate() const;
};

struct ProjectionInstance {
    VectorXd v;
    CvarSpec spec;
};

/// v ~ U[0,1]^m, k = ceil((1 - beta) m), d = eta f_k(v).
ProjectionInstance gen_projection(const ProjectionConfig& cfg);

/// How gen_portfolio sets the CVaR limit.
enum class KappaRule {
    Fixed,        ///< use PortfolioConfig::kappa as given
    EqualWeight,  ///< CVaR of the equal-weight portfolio on the sampled scenarios
};

struct PortfolioConfig {
    Index n_assets = 10;
    Index m_scenarios = 1000;
    double omega = 0.8;  ///< probability of the normal regime
    double nu = 0.2;     ///< mean return magnitude
    double sigma = 2.0;  ///< stress volatility scale
    double gamma = 1.0;  ///< risk aversion
    double beta = 0.95;
    double kappa = 0.3;
    /// kappa = 0.3 is only attainable once n reaches the high hundreds (the
    /// stressed regime alone puts CVaR near nu); EqualWeight is always feasible.
    KappaRule kappa_rule = KappaRule::Fixed;
    std::uint64_t seed = 0;

    void validate() const;
};

/**
 * Returns scenarios R_i ~ omega N(nu 1, I) + (1 - omega) N(-nu 1, sigma^2 I)
 * mapped to CVQP form: P = gamma Sigma, q = -mu, A = -R, B = [1^T; I],
 * l = (1, 0, ..., 0), u = (1, inf, ..., inf). Sigma uses the 1/m normalization.
 *
 * Draw order per scenario: one uniform for the regime, then n normals.
 */
CvqpProblem gen_portfolio(const PortfolioConfig& cfg);

struct QuantileConfig {
    Index n_features = 5;
    Index m_samples = 1000;
    double tau = 0.9;
    double noise_scale = 0.1;
    int t_dof = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct QuantileData {
    MatrixXd U;      ///< m x n features
    VectorXd y;      ///< responses
    VectorXd coef;   ///< ground-truth coefficients
};

/**
 * U_ij ~ N(0, 1), coef_j ~ N(0, 1 / (1 + j)) for j = 1..n, and
 * y = U coef + noise_scale * t(dof). Draw order: U row-major, then coef,
 * then the m noise terms.
 */
QuantileData gen_quantile_data(const QuantileConfig& cfg);

/**
 * CVQP over (x, t, s) for tau-quantile regression with the intercept folded
 * into the CVaR infimum: P = 0, q = (mean row of U, 1, 0), A = [-U | -1 | y],
 * B = e_{n+2}^T with l = u = 1, beta = tau, kappa = 0.
 */
CvqpProblem quantile_problem(const QuantileData& data, double tau);

CvqpProblem gen_quantile(const QuantileConfig& cfg);

/// (1/m) sum_i rho_tau(y_i - u_i^T x - x0), rho_tau(r) = tau r_+ + (1 - tau) r_-.
double pinball_loss(const QuantileData& data, const Eigen::Ref<const VectorXd>& x, double x0,
                    double tau);

/**
 * Intercept minimizing the pinball loss for fixed x: the k-th largest
 * residual y - U x with k = ceil((1 - tau) m), which satisfies the
 * subgradient condition of the tilted l1 loss for any m.
 */
double recover_intercept(const QuantileData& data, const Eigen::Ref<const VectorXd>& x, double tau);

}  // namespace cvqp
