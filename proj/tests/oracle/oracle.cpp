#include "oracle.hpp"

#include "cvqp/rng.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cvqp::oracle {

namespace {

using Triplet = Eigen::Triplet<double>;
constexpr double kInf = std::numeric_limits<double>::infinity();

void push_dense(std::vector<Triplet>& t, const MatrixXd& M, Index row0, Index col0) {
    for (Index j = 0; j < M.cols(); ++j)
        for (Index i = 0; i < M.rows(); ++i)
            if (M(i, j) != 0.0) t.emplace_back(row0 + i, col0 + j, M(i, j));
}

double inf_norm(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Largest step in [0, 1] keeping x + a dx >= 0.
double max_step(const VectorXd& x, const VectorXd& dx) {
    double a = 1.0;
    for (Index i = 0; i < x.size(); ++i)
        if (dx[i] < 0.0) a = std::min(a, -x[i] / dx[i]);
    return a;
}

// Augmented KKT matrix (lower triangle)
//   [ H + dI   G^T      E^T ]
//   [ G       -W^{-1}   0   ]
//   [ E        0       -dI  ]
// whose slack-block diagonal is rewritten each iteration.
class KktSystem {
public:
    static constexpr double kReg = 1e-9;

    explicit KktSystem(const ExpandedQp& qp)
        : qp_(qp), nw_(qp.variables()), ni_(qp.G.rows()), ne_(qp.E.rows()) {
        const Index N = nw_ + ni_ + ne_;
        std::vector<Triplet> t;
        t.reserve(static_cast<std::size_t>(qp.H.nonZeros() + qp.G.nonZeros() + qp.E.nonZeros() + N));
        for (int c = 0; c < qp.H.outerSize(); ++c)
            for (SpMat::InnerIterator it(qp.H, c); it; ++it)
                if (it.row() > it.col()) t.emplace_back(it.row(), it.col(), it.value());
        for (Index i = 0; i < nw_; ++i) t.emplace_back(i, i, qp.H.coeff(i, i) + kReg);
        for (int c = 0; c < qp.G.outerSize(); ++c)
            for (SpMat::InnerIterator it(qp.G, c); it; ++it) t.emplace_back(nw_ + it.row(), it.col(), it.value());
        for (Index i = 0; i < ni_; ++i) t.emplace_back(nw_ + i, nw_ + i, -1.0);
        for (int c = 0; c < qp.E.outerSize(); ++c)
            for (SpMat::InnerIterator it(qp.E, c); it; ++it)
                t.emplace_back(nw_ + ni_ + it.row(), it.col(), it.value());
        for (Index i = 0; i < ne_; ++i) t.emplace_back(nw_ + ni_ + i, nw_ + ni_ + i, -kReg);

        K_.resize(N, N);
        K_.setFromTriplets(t.begin(), t.end());
        K_.makeCompressed();
        slack_diag_.resize(static_cast<std::size_t>(ni_));
        for (Index i = 0; i < ni_; ++i) slack_diag_[static_cast<std::size_t>(i)] = &K_.coeffRef(nw_ + i, nw_ + i);
        ldlt_.analyzePattern(K_);
    }

    // Degenerate late iterates (slack weights spanning many decades) can hit
    // a zero pivot; retry with a larger shift, which refinement then removes.
    bool factor(const VectorXd& w_inv) {
        for (Index i = 0; i < ni_; ++i) *slack_diag_[static_cast<std::size_t>(i)] = -w_inv[i];
        for (double reg = kReg; reg <= 1e-5; reg *= 100.0) {
            set_shift(reg);
            ldlt_.factorize(K_);
            if (ldlt_.info() == Eigen::Success) return true;
        }
        set_shift(kReg);
        return false;
    }

    // Solves the unregularized system by iterative refinement on the regularized factor.
    VectorXd solve(const VectorXd& rhs) const {
        VectorXd x = ldlt_.solve(rhs);
        for (int pass = 0; pass < 20; ++pass) {
            VectorXd r = rhs - apply_unregularized(x);
            if (inf_norm(r) <= 1e-15 * (1.0 + inf_norm(rhs))) break;
            x += ldlt_.solve(r);
        }
        return x;
    }

private:
    void set_shift(double reg) {
        for (Index i = 0; i < nw_; ++i) K_.coeffRef(i, i) += reg - reg_;
        for (Index i = nw_ + ni_; i < nw_ + ni_ + ne_; ++i) K_.coeffRef(i, i) -= reg - reg_;
        reg_ = reg;
    }

    VectorXd apply_unregularized(const VectorXd& x) const {
        VectorXd y = K_.selfadjointView<Eigen::Lower>() * x;
        y.head(nw_) -= reg_ * x.head(nw_);
        y.tail(ne_) += reg_ * x.tail(ne_);
        return y;
    }

    const ExpandedQp& qp_;
    Index nw_, ni_, ne_;
    SpMat K_;
    std::vector<double*> slack_diag_;
    double reg_ = kReg;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

// Equality-constrained re-solve on the active set guessed from the
// interior-point iterate (rows with lambda > slack). The IPM stops at a gap
// of about tol, which only pins w to sqrt(tol); the polished point is exact
// up to the linear solve. Kept only if primal feasible and dual nonnegative.
void polish(const ExpandedQp& qp, QpSolution& sol, const VectorXd& slack) {
    constexpr double kReg = 1e-10;
    const Index nw = qp.variables();
    const Index ne = qp.E.rows();
    std::vector<Index> active;
    for (Index i = 0; i < qp.G.rows(); ++i)
        if (sol.lambda[i] > slack[i]) active.push_back(i);
    const Index na = static_cast<Index>(active.size());
    const Index N = nw + na + ne;

    std::vector<Index> row_of(static_cast<std::size_t>(qp.G.rows()), -1);
    for (Index a = 0; a < na; ++a) row_of[static_cast<std::size_t>(active[static_cast<std::size_t>(a)])] = a;

    std::vector<Triplet> t;
    for (int c = 0; c < qp.H.outerSize(); ++c)
        for (SpMat::InnerIterator it(qp.H, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (int c = 0; c < qp.G.outerSize(); ++c)
        for (SpMat::InnerIterator it(qp.G, c); it; ++it) {
            const Index a = row_of[static_cast<std::size_t>(it.row())];
            if (a < 0) continue;
            t.emplace_back(nw + a, it.col(), it.value());
            t.emplace_back(it.col(), nw + a, it.value());
        }
    for (int c = 0; c < qp.E.outerSize(); ++c)
        for (SpMat::InnerIterator it(qp.E, c); it; ++it) {
            t.emplace_back(nw + na + it.row(), it.col(), it.value());
            t.emplace_back(it.col(), nw + na + it.row(), it.value());
        }
    SpMat K(N, N);
    K.setFromTriplets(t.begin(), t.end());
    SpMat Kreg = K;
    for (Index i = 0; i < N; ++i) Kreg.coeffRef(i, i) += i < nw ? kReg : -kReg;

    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(Kreg);
    if (ldlt.info() != Eigen::Success) return;
    VectorXd rhs(N);
    rhs.head(nw) = -qp.g;
    for (Index a = 0; a < na; ++a) rhs[nw + a] = qp.h[active[static_cast<std::size_t>(a)]];
    rhs.tail(ne) = qp.b;
    VectorXd x = ldlt.solve(rhs);
    for (int pass = 0; pass < 50; ++pass) {
        const VectorXd r = rhs - K * x;
        if (inf_norm(r) <= 1e-15 * (1.0 + inf_norm(rhs))) break;
        x += ldlt.solve(r);
    }
    if (!x.allFinite()) return;

    const VectorXd w = x.head(nw);
    const double scale = 1.0 + inf_norm(qp.h) + inf_norm(qp.b);
    const VectorXd viol = qp.G * w - qp.h;
    if (viol.size() && viol.maxCoeff() > 1e-12 * scale) return;
    if (ne && inf_norm(qp.E * w - qp.b) > 1e-12 * scale) return;
    VectorXd lam = VectorXd::Zero(qp.G.rows());
    for (Index a = 0; a < na; ++a) lam[active[static_cast<std::size_t>(a)]] = x[nw + a];
    if (lam.size() && lam.minCoeff() < -1e-12 * (1.0 + inf_norm(sol.lambda))) return;
    const VectorXd r_d = qp.H * w + qp.g + qp.G.transpose() * lam + qp.E.transpose() * x.tail(ne);
    if (inf_norm(r_d) > 1e-12 * (1.0 + inf_norm(qp.g))) return;

    sol.w = w;
    sol.lambda = lam.cwiseMax(0.0);
    sol.nu = x.tail(ne);
    sol.polished = true;
}

}  // namespace

ExpandedQp expand_cvqp(const CvqpProblem& pr, const CvarSpec& spec) {
    const Index n = pr.n();
    const Index m = pr.m();
    const bool cvar_rows = spec.d != kInf;
    const Index nw = cvar_rows ? n + m + 1 : n;
    const Index y0 = n, alpha = n + m;

    ExpandedQp qp;
    qp.n_x = n;
    qp.n_cvar_rows = cvar_rows ? 2 * m + 1 : 0;

    std::vector<Triplet> t;
    push_dense(t, pr.P.to_dense(), 0, 0);
    qp.H.resize(nw, nw);
    qp.H.setFromTriplets(t.begin(), t.end());
    qp.g = VectorXd::Zero(nw);
    qp.g.head(n) = pr.q;

    std::vector<double> h;
    t.clear();
    Index row = 0;
    if (cvar_rows) {
        for (Index i = 0; i < m; ++i, ++row) {
            for (Index j = 0; j < n; ++j)
                if (pr.A(i, j) != 0.0) t.emplace_back(row, j, pr.A(i, j));
            t.emplace_back(row, alpha, -1.0);
            t.emplace_back(row, y0 + i, -1.0);
            h.push_back(0.0);
        }
        for (Index i = 0; i < m; ++i, ++row) {
            t.emplace_back(row, y0 + i, -1.0);
            h.push_back(0.0);
        }
        t.emplace_back(row, alpha, static_cast<double>(spec.k));
        for (Index i = 0; i < m; ++i) t.emplace_back(row, y0 + i, 1.0);
        h.push_back(spec.d);
        ++row;
    }

    std::vector<Triplet> te;
    std::vector<double> b;
    Index erow = 0;
    for (Index i = 0; i < pr.p(); ++i) {
        if (pr.l[i] == pr.u[i]) {
            for (Index j = 0; j < n; ++j)
                if (pr.B(i, j) != 0.0) te.emplace_back(erow, j, pr.B(i, j));
            b.push_back(pr.l[i]);
            ++erow;
            continue;
        }
        if (pr.u[i] != kInf) {
            for (Index j = 0; j < n; ++j)
                if (pr.B(i, j) != 0.0) t.emplace_back(row, j, pr.B(i, j));
            h.push_back(pr.u[i]);
            ++row;
        }
        if (pr.l[i] != -kInf) {
            for (Index j = 0; j < n; ++j)
                if (pr.B(i, j) != 0.0) t.emplace_back(row, j, -pr.B(i, j));
            h.push_back(-pr.l[i]);
            ++row;
        }
    }
    qp.G.resize(row, nw);
    qp.G.setFromTriplets(t.begin(), t.end());
    qp.h = Eigen::Map<VectorXd>(h.data(), static_cast<Index>(h.size()));
    qp.E.resize(erow, nw);
    qp.E.setFromTriplets(te.begin(), te.end());
    qp.b = Eigen::Map<VectorXd>(b.data(), static_cast<Index>(b.size()));
    return qp;
}

ExpandedQp expand_cvqp(const CvqpProblem& problem) { return expand_cvqp(problem, validate(problem)); }

QpSolution solve_qp(const ExpandedQp& qp, const IpmSettings& settings) {
    const Index nw = qp.variables();
    const Index ni = qp.G.rows();
    const Index ne = qp.E.rows();
    KktSystem kkt(qp);

    auto stack = [&](const VectorXd& a, const VectorXd& b, const VectorXd& c) {
        VectorXd out(nw + ni + ne);
        out << a, b, c;
        return out;
    };

    // Initial point: least-squares-like solve with W = I, then shift slacks positive.
    QpSolution sol;
    kkt.factor(VectorXd::Ones(ni));
    {
        const VectorXd x0 = kkt.solve(stack(-qp.g, qp.h, qp.b));
        sol.w = x0.head(nw);
        sol.nu = x0.tail(ne);
    }
    VectorXd s = qp.h - qp.G * sol.w;
    const double shift = ni > 0 ? -s.minCoeff() : 0.0;
    if (shift >= 0.0) s.array() += 1.0 + shift;
    VectorXd lam = VectorXd::Ones(ni);

    const double h_scale = 1.0 + inf_norm(qp.h);
    const double b_scale = 1.0 + inf_norm(qp.b);
    const double g_scale = 1.0 + inf_norm(qp.g);

    for (int iter = 0; iter < settings.max_iter; ++iter) {
        const VectorXd r_d = qp.H * sol.w + qp.g + qp.G.transpose() * lam + qp.E.transpose() * sol.nu;
        const VectorXd r_p = qp.G * sol.w + s - qp.h;
        const VectorXd r_e = qp.E * sol.w - qp.b;
        const double gap = ni > 0 ? s.dot(lam) : 0.0;
        const double mu = ni > 0 ? gap / static_cast<double>(ni) : 0.0;
        const double obj = 0.5 * sol.w.dot(qp.H * sol.w) + qp.g.dot(sol.w);

        sol.iterations = iter;
        if (inf_norm(r_p) <= settings.tol * h_scale && inf_norm(r_e) <= settings.tol * b_scale &&
            inf_norm(r_d) <= settings.tol * g_scale && gap <= settings.tol * (1.0 + std::abs(obj))) {
            sol.converged = true;
            break;
        }

        const VectorXd w_inv = s.cwiseQuotient(lam);
        if (!kkt.factor(w_inv)) break;

        auto direction = [&](const VectorXd& r_c, VectorXd& dw, VectorXd& dl, VectorXd& dn, VectorXd& ds) {
            const VectorXd rhs = stack(-r_d, -r_p + r_c.cwiseQuotient(lam), -r_e);
            const VectorXd d = kkt.solve(rhs);
            dw = d.head(nw);
            dl = d.segment(nw, ni);
            dn = d.tail(ne);
            ds = -(r_c + s.cwiseProduct(dl)).cwiseQuotient(lam);
        };

        VectorXd dw, dl, dn, ds;
        const VectorXd r_aff = s.cwiseProduct(lam);
        direction(r_aff, dw, dl, dn, ds);
        const double a_aff = std::min(max_step(s, ds), max_step(lam, dl));
        const double mu_aff =
            ni > 0 ? (s + a_aff * ds).dot(lam + a_aff * dl) / static_cast<double>(ni) : 0.0;
        const double sigma = mu > 0 ? std::pow(mu_aff / mu, 3) : 0.0;

        const VectorXd r_cc = r_aff + ds.cwiseProduct(dl) - VectorXd::Constant(ni, sigma * mu);
        direction(r_cc, dw, dl, dn, ds);
        const double a = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(lam, dl)));

        sol.w += a * dw;
        sol.nu += a * dn;
        s += a * ds;
        lam += a * dl;
    }
    sol.lambda = lam;
    if (sol.converged) polish(qp, sol, s);
    sol.objective = 0.5 * sol.w.dot(qp.H * sol.w) + qp.g.dot(sol.w);
    return sol;
}

CvqpSolution solve_cvqp(const CvqpProblem& problem, const IpmSettings& settings) {
    const ExpandedQp qp = expand_cvqp(problem);
    const QpSolution sol = solve_qp(qp, settings);
    CvqpSolution out;
    out.x = sol.w.head(qp.n_x);
    out.objective = problem.objective(out.x);
    out.converged = sol.converged;
    return out;
}

VectorXd project(const VectorXd& v, const CvarSpec& spec, const IpmSettings& settings) {
    const Index m = v.size();
    CvqpProblem pr;
    pr.P = ObjectiveMatrix::diagonal(VectorXd::Ones(m));
    pr.q = -v;
    pr.A = MatrixXd::Identity(m, m);
    pr.B.resize(0, m);
    const QpSolution sol = solve_qp(expand_cvqp(pr, spec), settings);
    return sol.w.head(m);
}

QuantileFit solve_quantile_direct(const QuantileData& data, double tau, const IpmSettings& settings) {
    const Index m = data.U.rows();
    const Index n = data.U.cols();
    const Index nw = n + 1 + 2 * m;
    const Index rp = n + 1, rm = n + 1 + m;

    ExpandedQp qp;
    qp.n_x = n + 1;
    qp.H.resize(nw, nw);
    qp.g = VectorXd::Zero(nw);
    qp.g.segment(rp, m).setConstant(tau / static_cast<double>(m));
    qp.g.segment(rm, m).setConstant((1.0 - tau) / static_cast<double>(m));

    std::vector<Triplet> t;
    for (Index i = 0; i < 2 * m; ++i) t.emplace_back(i, rp + i, -1.0);
    qp.G.resize(2 * m, nw);
    qp.G.setFromTriplets(t.begin(), t.end());
    qp.h = VectorXd::Zero(2 * m);

    t.clear();
    push_dense(t, data.U, 0, 0);
    for (Index i = 0; i < m; ++i) {
        t.emplace_back(i, n, 1.0);
        t.emplace_back(i, rp + i, 1.0);
        t.emplace_back(i, rm + i, -1.0);
    }
    qp.E.resize(m, nw);
    qp.E.setFromTriplets(t.begin(), t.end());
    qp.b = data.y;

    const QpSolution sol = solve_qp(qp, settings);
    QuantileFit fit;
    fit.x = sol.w.head(n);
    fit.intercept = sol.w[n];
    fit.loss = pinball_loss(data, fit.x, fit.intercept, tau);
    fit.converged = sol.converged;
    return fit;
}

KktReport check_projection_kkt(const VectorXd& v, const VectorXd& z, const CvarSpec& spec, int samples,
                               std::uint64_t seed) {
    KktReport rep;
    const Index m = v.size();
    const Index k = spec.k;
    const double tol = 1e-8 * std::max(1.0, std::abs(spec.d));
    auto note = [&](double margin, const char* what) {
        rep.worst_margin = std::max(rep.worst_margin, margin);
        if (margin > 0.0 && rep.pass) {
            rep.pass = false;
            rep.failure = what;
        }
    };

    const double fk = sum_k_largest(z, k);
    note(fk - spec.d - tol, "feasibility: f_k(z) exceeds d");

    const VectorXd delta = v - z;
    std::vector<double> zs(z.data(), z.data() + m);
    std::nth_element(zs.begin(), zs.begin() + (k - 1), zs.end(), std::greater<>());
    const double kth = zs[static_cast<std::size_t>(k - 1)];
    const double entry_tol = 1e-9 * std::max(1.0, inf_norm(v));
    for (Index i = 0; i < m; ++i) {
        note(-delta[i] - entry_tol, "decrease has a negative entry");
        if (delta[i] > entry_tol) note(kth - z[i] - entry_tol, "decrease outside the top-k block");
    }
    if (inf_norm(delta) > entry_tol) note(std::abs(fk - spec.d) - tol, "complementary slackness");

    // Random feasible points near z: perturb, then shift down onto the set.
    SplitMix64 rng(seed);
    const double scale = 1e-2 * std::max(1.0, inf_norm(z));
    const double dn = delta.norm();
    for (int s = 0; s < samples; ++s) {
        VectorXd w(m);
        for (Index i = 0; i < m; ++i) w[i] = z[i] + scale * rng.normal();
        const double excess = sum_k_largest(w, k) - spec.d;
        if (excess > 0.0) w.array() -= excess / static_cast<double>(k);
        const double ip = delta.dot(w - z);
        note(ip - 1e-8 * dn * (w - z).norm(), "variational inequality");
    }
    return rep;
}

}  // namespace cvqp::oracle
