#include "cvqp/generators.hpp"

#include "cvqp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace cvqp {

namespace {

[[noreturn]] void bad_config(const char* what) { throw Error(ErrorCode::BadSettings, what); }

}  // namespace

void ProjectionConfig::validate() const {
    if (m < 1) bad_config("projection: m must be positive");
    if (!(beta > 0.0 && beta < 1.0)) bad_config("projection: beta must lie in (0, 1)");
    if (!(eta > 0.0 && eta < 1.0)) bad_config("projection: eta must lie in (0, 1)");
}

ProjectionInstance gen_projection(const ProjectionConfig& cfg) {
    cfg.validate();
    SplitMix64 rng(cfg.seed);
    ProjectionInstance out;
    out.v.resize(cfg.m);
    for (Index i = 0; i < cfg.m; ++i) out.v[i] = rng.uniform();
    out.spec.k = tail_count(cfg.m, cfg.beta);
    out.spec.d = cfg.eta * sum_k_largest(out.v, out.spec.k);
    return out;
}

void PortfolioConfig::validate() const {
    if (n_assets < 1 || m_scenarios < 1) bad_config("portfolio: sizes must be positive");
    if (!(omega >= 0.0 && omega <= 1.0)) bad_config("portfolio: omega must lie in [0, 1]");
    if (!(sigma > 0.0)) bad_config("portfolio: sigma must be positive");
    if (!(gamma > 0.0)) bad_config("portfolio: gamma must be positive");
    if (!(beta > 0.0 && beta < 1.0)) bad_config("portfolio: beta must lie in (0, 1)");
}

CvqpProblem gen_portfolio(const PortfolioConfig& cfg) {
    cfg.validate();
    const Index n = cfg.n_assets;
    const Index m = cfg.m_scenarios;
    SplitMix64 rng(cfg.seed);

    MatrixXd R(m, n);
    for (Index i = 0; i < m; ++i) {
        const bool normal_regime = rng.uniform() < cfg.omega;
        const double mean = normal_regime ? cfg.nu : -cfg.nu;
        const double scale = normal_regime ? 1.0 : cfg.sigma;
        for (Index j = 0; j < n; ++j) R(i, j) = mean + scale * rng.normal();
    }

    const VectorXd mu = R.colwise().mean().transpose();
    const MatrixXd centered = R.rowwise() - mu.transpose();
    MatrixXd sigma = MatrixXd::Zero(n, n);
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / static_cast<double>(m));
    sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();

    CvqpProblem pr;
    pr.P = ObjectiveMatrix::dense(cfg.gamma * sigma);
    pr.q = -mu;
    pr.A = -R;
    pr.B.resize(n + 1, n);
    pr.B.row(0).setOnes();
    pr.B.bottomRows(n).setIdentity();
    pr.l = VectorXd::Zero(n + 1);
    pr.l[0] = 1.0;
    pr.u = VectorXd::Constant(n + 1, std::numeric_limits<double>::infinity());
    pr.u[0] = 1.0;
    pr.beta = cfg.beta;
    pr.kappa = cfg.kappa;
    if (cfg.kappa_rule == KappaRule::EqualWeight)
        pr.kappa = cvar(pr.A * VectorXd::Constant(n, 1.0 / static_cast<double>(n)), cfg.beta);
    return pr;
}

void QuantileConfig::validate() const {
    if (n_features < 1 || m_samples < 1) bad_config("quantile: sizes must be positive");
    if (!(tau > 0.0 && tau < 1.0)) bad_config("quantile: tau must lie in (0, 1)");
    if (!(noise_scale >= 0.0)) bad_config("quantile: noise_scale must be nonnegative");
    if (t_dof < 1) bad_config("quantile: t_dof must be positive");
}

QuantileData gen_quantile_data(const QuantileConfig& cfg) {
    cfg.validate();
    const Index n = cfg.n_features;
    const Index m = cfg.m_samples;
    SplitMix64 rng(cfg.seed);

    QuantileData d;
    d.U.resize(m, n);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) d.U(i, j) = rng.normal();
    d.coef.resize(n);
    for (Index j = 0; j < n; ++j) d.coef[j] = rng.normal() / std::sqrt(2.0 + static_cast<double>(j));
    d.y = d.U * d.coef;
    for (Index i = 0; i < m; ++i) d.y[i] += cfg.noise_scale * rng.student_t(cfg.t_dof);
    return d;
}

CvqpProblem quantile_problem(const QuantileData& data, double tau) {
    const Index m = data.U.rows();
    const Index n = data.U.cols();
    CvqpProblem pr;
    pr.P = ObjectiveMatrix::zero(n + 2);
    pr.q = VectorXd::Zero(n + 2);
    pr.q.head(n) = data.U.colwise().mean().transpose();
    pr.q[n] = 1.0;
    pr.A.resize(m, n + 2);
    pr.A << -data.U, VectorXd::Constant(m, -1.0), data.y;
    pr.B = MatrixXd::Zero(1, n + 2);
    pr.B(0, n + 1) = 1.0;
    pr.l = VectorXd::Ones(1);
    pr.u = VectorXd::Ones(1);
    pr.beta = tau;
    pr.kappa = 0.0;
    return pr;
}

CvqpProblem gen_quantile(const QuantileConfig& cfg) {
    return quantile_problem(gen_quantile_data(cfg), cfg.tau);
}

double pinball_loss(const QuantileData& data, const Eigen::Ref<const VectorXd>& x, double x0,
                    double tau) {
    const VectorXd r = (data.y - data.U * x).array() - x0;
    double total = 0.0;
    for (Index i = 0; i < r.size(); ++i) total += r[i] >= 0.0 ? tau * r[i] : (tau - 1.0) * r[i];
    return total / static_cast<double>(r.size());
}

double recover_intercept(const QuantileData& data, const Eigen::Ref<const VectorXd>& x, double tau) {
    const VectorXd r = data.y - data.U * x;
    const Index k = tail_count(r.size(), tau);
    std::vector<double> buf(r.data(), r.data() + r.size());
    std::nth_element(buf.begin(), buf.begin() + (k - 1), buf.end(), std::greater<>());
    return buf[static_cast<std::size_t>(k - 1)];
}

}  // namespace cvqp
