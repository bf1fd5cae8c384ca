#include "cvqp/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cvqp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

using Entry = std::pair<double, Index>;

bool descending(const Entry& a, const Entry& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
}

void check_inputs(const Eigen::Ref<const VectorXd>& v, const CvarSpec& spec) {
    if (spec.k < 1 || spec.k > v.size())
        throw Error(ErrorCode::KOutOfRange, "projection: k outside [1, m]");
    if (std::isnan(spec.d) || spec.d == -kInf)
        throw Error(ErrorCode::NotFinite, "projection: d must be a real number or +inf");
    if (!v.allFinite())
        throw Error(ErrorCode::NotFinite, "projection: input has NaN or infinite entries");
}

// Rate at which untied entries fall relative to the tied block.
double untied_rate(const ProjectionState& s, Index k) {
    return static_cast<double>(s.n_t) / static_cast<double>(k - s.n_u);
}

// Rate at which S falls per unit step.
double sum_rate(const ProjectionState& s, Index k) {
    if (s.n_t == 0) return static_cast<double>(k);
    return static_cast<double>(s.n_u) * untied_rate(s, k) + static_cast<double>(k - s.n_u);
}

// Runs the decrease loop on a descending vector, then trims rounding drift in
// S with one extra move along the final direction.
ProjectionState run_decrease_loop(std::span<const double> sorted, const CvarSpec& spec) {
    ProjectionState st = ProjectionState::initial(sorted, spec.k);
    const Index guard = st.m() + 2;
    while (!decrease_step(st, spec)) {
        if (st.j > guard) throw std::logic_error("projection: decrease loop failed to terminate");
    }

    const Index k = spec.k;
    double top = 0.0;
    if (st.n_t == 0) {
        for (Index i = 0; i < k; ++i) top += sorted[i] - st.eta;
    } else {
        for (Index i = 0; i < st.n_u; ++i) top += sorted[i] - st.eta;
        top += static_cast<double>(k - st.n_u) * st.a_t;
    }
    const double step = (top - spec.d) / sum_rate(st, k);
    if (st.n_t == 0) {
        st.eta += step;
    } else {
        st.eta += step * untied_rate(st, k);
        st.a_t -= step;
    }
    return st;
}

// Sorted-order projection value at position i of the terminal state.
double terminal_value(const ProjectionState& st, Index k, Index i) {
    const std::span<const double> v = st.sorted;
    if (st.n_t == 0) return i < k ? v[i] - st.eta : v[i];
    if (i < st.n_u) return v[i] - st.eta;
    if (i < st.n_u + st.n_t) return st.a_t;
    return v[i];
}

// Feasibility slack for the early return: a bound on the rounding error of
// the k-term sum, so a point this routine produced is recognized as feasible.
double feasibility_slack(std::span<const double> sorted, Index k) {
    double abs_sum = 0.0;
    for (Index i = 0; i < k; ++i) abs_sum += std::abs(sorted[i]);
    return 2.0 * static_cast<double>(k) * kEps * abs_sum;
}

}  // namespace

std::vector<Index> sort_permutation(const Eigen::Ref<const VectorXd>& v) {
    if (v.hasNaN()) throw Error(ErrorCode::NotFinite, "sort_permutation: NaN in input");
    std::vector<Index> perm(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) perm[static_cast<std::size_t>(i)] = i;
    std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) { return v[a] > v[b]; });
    return perm;
}

ProjectionState ProjectionState::initial(std::span<const double> sorted, Index k) {
    ProjectionState st;
    st.sorted = sorted;
    st.n_u = k;
    st.n_t = 0;
    st.eta = 0.0;
    st.S = 0.0;
    for (Index i = 0; i < k; ++i) st.S += sorted[i];
    st.a_t = -kInf;
    st.a_u = sorted[k - 1];
    st.a_e = k < st.m() ? sorted[k] : -kInf;
    return st;
}

VectorXd ProjectionState::working_vector() const {
    VectorXd w(m());
    for (Index i = 0; i < m(); ++i) {
        if (i < n_u)
            w[i] = sorted[i] - eta;
        else if (i < n_u + n_t)
            w[i] = a_t;
        else
            w[i] = sorted[i];
    }
    return w;
}

StepSizes step_sizes(const ProjectionState& st, const CvarSpec& spec) {
    const Index k = spec.k;
    StepSizes s{kInf, kInf, kInf};
    if (st.n_t == 0) {
        // First step: the top k fall together and only the k / k+1 tie can occur.
        if (st.n_u < st.m()) s.s2 = std::max(0.0, st.a_u - st.a_e);
    } else {
        const double r = untied_rate(st, k);
        if (st.n_u > 0) s.s1 = std::max(0.0, (st.a_t - st.a_u) / (1.0 - r));
        if (st.n_u + st.n_t < st.m()) s.s2 = std::max(0.0, st.a_t - st.a_e);
    }
    s.s3 = (st.S - spec.d) / sum_rate(st, k);
    return s;
}

bool decrease_step(ProjectionState& st, const CvarSpec& spec) {
    const Index k = spec.k;
    const Index m = st.m();
    const StepSizes s = step_sizes(st, spec);
    ++st.j;

    if (s.s3 <= std::min(s.s1, s.s2)) {
        if (st.n_t == 0) {
            st.eta += s.s3;
        } else {
            st.eta += s.s3 * untied_rate(st, k);
            st.a_t -= s.s3;
        }
        if (st.n_u > 0) st.a_u = st.sorted[st.n_u - 1] - st.eta;
        st.S = spec.d;
        return true;
    }

    if (st.n_t == 0) {
        // Entries k and k+1 tie; the tied block becomes positions k..k+1.
        const double s0 = s.s2;
        st.eta += s0;
        st.S -= s0 * static_cast<double>(k);
        st.a_t = st.sorted[k];
        st.n_u = k - 1;
        st.n_t = 2;
    } else {
        const double s0 = std::min(s.s1, s.s2);
        st.eta += s0 * untied_rate(st, k);
        st.S -= s0 * sum_rate(st, k);
        st.a_t -= s0;
        if (s.s1 <= s.s2) {
            --st.n_u;
            ++st.n_t;
        } else {
            st.a_t = st.a_e;
            ++st.n_t;
        }
    }
    if (st.n_u > 0) st.a_u = st.sorted[st.n_u - 1] - st.eta;
    if (st.n_u + st.n_t < m) st.a_e = st.sorted[st.n_u + st.n_t];
    return false;
}

SumKLargestProjector::SumKLargestProjector(Index m, CvarSpec spec)
    : spec_(spec),
      order_(static_cast<std::size_t>(m)),
      sorted_(static_cast<std::size_t>(m)) {
    if (spec.k < 1 || spec.k > m) throw Error(ErrorCode::KOutOfRange, "projection: k outside [1, m]");
}

void SumKLargestProjector::project(const Eigen::Ref<const VectorXd>& v, Eigen::Ref<VectorXd> out,
                                   ProjectionInfo* info) {
    const Index m = static_cast<Index>(order_.size());
    if (v.size() != m || out.size() != m)
        throw Error(ErrorCode::DimensionMismatch, "projection: vector length does not match projector");
    check_inputs(v, spec_);
    const Index k = spec_.k;

    for (Index i = 0; i < m; ++i) order_[static_cast<std::size_t>(i)] = {v[i], i};
    std::sort(order_.begin(), order_.end(), descending);
    for (Index i = 0; i < m; ++i) sorted_[static_cast<std::size_t>(i)] = order_[static_cast<std::size_t>(i)].first;
    const std::span<const double> sorted(sorted_);

    double top = 0.0;
    for (Index i = 0; i < k; ++i) top += sorted[i];
    if (top <= spec_.d + feasibility_slack(sorted, k)) {
        if (out.data() != v.data()) out = v;
        if (info) *info = ProjectionInfo{0, true, 0, 0};
        return;
    }

    const ProjectionState st = run_decrease_loop(sorted, spec_);
    for (Index i = 0; i < m; ++i) out[order_[static_cast<std::size_t>(i)].second] = terminal_value(st, k, i);
    if (info) *info = ProjectionInfo{st.j, false, st.n_u, st.n_t};
}

VectorXd project_sum_k_largest(const Eigen::Ref<const VectorXd>& v, const CvarSpec& spec,
                               ProjectionInfo* info) {
    check_inputs(v, spec);
    SumKLargestProjector proj(v.size(), spec);
    VectorXd out(v.size());
    proj.project(v, out, info);
    return out;
}

VectorXd project_cvar(const Eigen::Ref<const VectorXd>& v, double beta, double kappa,
                      ProjectionInfo* info) {
    if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCode::BadBeta, "beta must lie in (0, 1)");
    const Index k = tail_count(v.size(), beta);
    return project_sum_k_largest(v, CvarSpec{k, kappa * static_cast<double>(k)}, info);
}

}  // namespace cvqp
