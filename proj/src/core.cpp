#include "cvqp/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

namespace cvqp {

namespace {

constexpr double kSymmetryTol = 1e-10;

[[noreturn]] void fail(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

std::string dims(const char* name, Index got, Index want) {
    std::ostringstream os;
    os << name << " has " << got << " entries, expected " << want;
    return os.str();
}

bool all_finite(const Eigen::Ref<const MatrixXd>& m) { return m.allFinite(); }

}  // namespace

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::BadBounds: return "BadBounds";
        case ErrorCode::BadBeta: return "BadBeta";
        case ErrorCode::AsymmetricP: return "AsymmetricP";
        case ErrorCode::KOutOfRange: return "KOutOfRange";
        case ErrorCode::NotFinite: return "NotFinite";
        case ErrorCode::BadSettings: return "BadSettings";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    }
    return "Unknown";
}

// ---------------------------------------------------------------------------
// ObjectiveMatrix

ObjectiveMatrix ObjectiveMatrix::dense(MatrixXd p) {
    ObjectiveMatrix out;
    out.is_diagonal_ = false;
    out.dense_ = std::move(p);
    return out;
}

ObjectiveMatrix ObjectiveMatrix::diagonal(VectorXd d) {
    ObjectiveMatrix out;
    out.is_diagonal_ = true;
    out.diag_ = std::move(d);
    return out;
}

VectorXd ObjectiveMatrix::apply(const Eigen::Ref<const VectorXd>& x) const {
    if (is_diagonal_) return diag_.cwiseProduct(x);
    return dense_ * x;
}

double ObjectiveMatrix::quadratic_form(const Eigen::Ref<const VectorXd>& x) const {
    if (is_diagonal_) return (diag_.array() * x.array().square()).sum();
    return x.dot(dense_ * x);
}

MatrixXd ObjectiveMatrix::to_dense() const {
    if (is_diagonal_) return diag_.asDiagonal();
    return dense_;
}

void ObjectiveMatrix::add_to(MatrixXd& out, double scale) const {
    if (is_diagonal_)
        out.diagonal() += scale * diag_;
    else
        out += scale * dense_;
}

// ---------------------------------------------------------------------------
// CVaR helpers

Index tail_count(Index m, double beta) {
    const double x = (1.0 - beta) * static_cast<double>(m);
    const double r = std::nearbyint(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, x)) return static_cast<Index>(r);
    return static_cast<Index>(std::ceil(x));
}

CvarSpec validate(const CvqpProblem& pr) {
    const Index n = pr.n();
    if (pr.P.size() != n) fail(ErrorCode::DimensionMismatch, dims("P", pr.P.size(), n));
    if (!pr.P.is_diagonal() && pr.P.dense_matrix().cols() != n)
        fail(ErrorCode::DimensionMismatch, "P is not square");
    if (pr.A.cols() != n) fail(ErrorCode::DimensionMismatch, dims("A columns", pr.A.cols(), n));
    if (pr.B.cols() != n && pr.B.rows() > 0)
        fail(ErrorCode::DimensionMismatch, dims("B columns", pr.B.cols(), n));
    if (pr.l.size() != pr.p()) fail(ErrorCode::DimensionMismatch, dims("l", pr.l.size(), pr.p()));
    if (pr.u.size() != pr.p()) fail(ErrorCode::DimensionMismatch, dims("u", pr.u.size(), pr.p()));

    if (pr.P.is_diagonal()) {
        if (!all_finite(pr.P.diagonal_entries())) fail(ErrorCode::NotFinite, "P has non-finite entries");
    } else {
        const MatrixXd& P = pr.P.dense_matrix();
        if (!all_finite(P)) fail(ErrorCode::NotFinite, "P has non-finite entries");
        const double asym = (P - P.transpose()).cwiseAbs().maxCoeff();
        if (n > 0 && asym > kSymmetryTol) {
            std::ostringstream os;
            os << "P is not symmetric (max |P - P^T| = " << asym << ")";
            fail(ErrorCode::AsymmetricP, os.str());
        }
    }
    if (!all_finite(pr.q) || !all_finite(pr.A) || !all_finite(pr.B))
        fail(ErrorCode::NotFinite, "q, A or B has non-finite entries");

    for (Index i = 0; i < pr.p(); ++i) {
        const double lo = pr.l[i], hi = pr.u[i];
        if (std::isnan(lo) || std::isnan(hi)) fail(ErrorCode::NotFinite, "NaN bound");
        if (lo > hi) {
            std::ostringstream os;
            os << "l[" << i << "] = " << lo << " exceeds u[" << i << "] = " << hi;
            fail(ErrorCode::BadBounds, os.str());
        }
    }

    if (!(pr.beta > 0.0 && pr.beta < 1.0)) {
        std::ostringstream os;
        os << "beta = " << pr.beta << " must lie in (0, 1)";
        fail(ErrorCode::BadBeta, os.str());
    }
    if (std::isnan(pr.kappa) || pr.kappa == -std::numeric_limits<double>::infinity())
        fail(ErrorCode::NotFinite, "kappa must be a real number or +inf");

    const Index k = tail_count(pr.m(), pr.beta);
    if (k < 1 || k > pr.m()) {
        std::ostringstream os;
        os << "k = " << k << " outside [1, m = " << pr.m() << "]";
        fail(ErrorCode::KOutOfRange, os.str());
    }
    return CvarSpec{k, pr.kappa * static_cast<double>(k)};
}

double sum_k_largest(const Eigen::Ref<const VectorXd>& z, Index k) {
    const Index m = z.size();
    if (k < 1 || k > m) fail(ErrorCode::KOutOfRange, "sum_k_largest: k outside [1, m]");
    if (k == m) return z.sum();
    std::vector<double> buf(z.data(), z.data() + m);
    std::nth_element(buf.begin(), buf.begin() + (k - 1), buf.end(), std::greater<>());
    double s = 0.0;
    for (Index i = 0; i < k; ++i) s += buf[static_cast<std::size_t>(i)];
    return s;
}

double cvar(const Eigen::Ref<const VectorXd>& z, double beta) {
    if (!(beta > 0.0 && beta < 1.0)) fail(ErrorCode::BadBeta, "beta must lie in (0, 1)");
    const Index k = tail_count(z.size(), beta);
    return sum_k_largest(z, k) / static_cast<double>(k);
}

CvqpProblem lift_cvar_objective(const ObjectiveMatrix& P, const VectorXd& q,
                                const MatrixXd& A, const MatrixXd& B,
                                const VectorXd& l, const VectorXd& u,
                                double beta) {
    const Index n = q.size();
    if (P.size() != n || A.cols() != n || (B.rows() > 0 && B.cols() != n) ||
        l.size() != B.rows() || u.size() != B.rows())
        fail(ErrorCode::DimensionMismatch, "lift_cvar_objective: inconsistent dimensions");

    CvqpProblem out;
    if (P.is_diagonal()) {
        VectorXd d = VectorXd::Zero(n + 1);
        d.head(n) = P.diagonal_entries();
        out.P = ObjectiveMatrix::diagonal(std::move(d));
    } else {
        MatrixXd Pl = MatrixXd::Zero(n + 1, n + 1);
        Pl.topLeftCorner(n, n) = P.dense_matrix();
        out.P = ObjectiveMatrix::dense(std::move(Pl));
    }
    out.q.resize(n + 1);
    out.q << q, 1.0;
    out.A.resize(A.rows(), n + 1);
    out.A << A, VectorXd::Constant(A.rows(), -1.0);
    out.B = MatrixXd::Zero(B.rows(), n + 1);
    out.B.leftCols(n) = B;
    out.l = l;
    out.u = u;
    out.beta = beta;
    out.kappa = 0.0;
    return out;
}

void SolverSettings::validate() const {
    auto bad = [](const char* what) { fail(ErrorCode::BadSettings, what); };
    if (!(rho0 > 0.0)) bad("rho0 must be positive");
    if (!(alpha > 0.0 && alpha < 2.0)) bad("alpha must lie in (0, 2)");
    if (!(eps_abs > 0.0)) bad("eps_abs must be positive");
    if (!(eps_rel > 0.0)) bad("eps_rel must be positive");
    if (!(mu > 1.0)) bad("mu must exceed 1");
    if (!(rho_scale > 1.0)) bad("rho_scale must exceed 1");
    if (rho_update_interval < 1) bad("rho_update_interval must be positive");
    if (max_iter < 1) bad("max_iter must be positive");
    if (time_limit && !(*time_limit > 0.0)) bad("time_limit must be positive");
    if (!(rho_min > 0.0 && rho_min <= rho_max)) bad("need 0 < rho_min <= rho_max");
}

}  // namespace cvqp
