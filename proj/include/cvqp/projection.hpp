/**
 * @file projection.hpp
 * @brief Exact Euclidean projection onto {z : f_k(z) <= d}.
 *
 * The input is sorted in descending order, the sorted vector is pushed down
 * along averaged k-hot directions until the sum of its k largest entries hits
 * d, and the result is unsorted. Between sort and unsort the loop runs on an
 * eight-number state and takes at most m + 1 steps, so the whole projection
 * costs O(m log m).
 *
 * During the loop the working vector splits into three blocks:
 *
 *   [ untied: v'_i - eta, i < n_u | tied: a_t (n_t copies) | unaltered v'_i ]
 *
 * and the tied block always straddles positions k and k + 1.
 */
#pragma once

#include "cvqp/core.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cvqp {

/// Descending sort order of v, stable on ties. Throws on NaN.
std::vector<Index> sort_permutation(const Eigen::Ref<const VectorXd>& v);

/**
 * @brief Constant-size state of the decrease loop.
 *
 * Counts are 0-based lengths; `sorted` views the descending input and must
 * outlive the state.
 */
struct ProjectionState {
    std::span<const double> sorted;
    Index j = 0;      ///< steps taken
    Index n_u = 0;    ///< untied entries
    Index n_t = 0;    ///< tied entries
    double eta = 0;   ///< decrease applied to every untied entry
    double S = 0;     ///< sum of the k largest working entries
    double a_t = 0;   ///< common value of the tied block (-inf before the first tie)
    double a_u = 0;   ///< value of the last untied entry
    double a_e = 0;   ///< value of the first unaltered entry

    /// Fresh state for a descending vector: n_u = k, no tied block.
    static ProjectionState initial(std::span<const double> sorted, Index k);

    Index m() const { return static_cast<Index>(sorted.size()); }

    /// Materializes the working vector (sorted order), O(m).
    VectorXd working_vector() const;
};

/// Step sizes for one decrease step; +inf marks an event that cannot occur.
struct StepSizes {
    double s1;  ///< last untied entry meets the tied block
    double s2;  ///< tied block meets the first unaltered entry
    double s3;  ///< sum of the k largest reaches d
};

StepSizes step_sizes(const ProjectionState& state, const CvarSpec& spec);

/**
 * One decrease step. Requires S > d. Returns true when the step closed the
 * gap to d (s3 no larger than the other two sizes), in which case S == d.
 */
bool decrease_step(ProjectionState& state, const CvarSpec& spec);

/// Per-call counters, mainly for tests and benchmarks.
struct ProjectionInfo {
    Index steps = 0;        ///< decrease steps executed
    bool was_feasible = false;
    Index n_untied = 0;     ///< final block sizes in sorted order
    Index n_tied = 0;
};

/**
 * Euclidean projection of v onto {z : f_k(z) <= d}.
 *
 * A feasible v is returned unchanged. Throws Error on NaN or infinite
 * entries or k outside [1, m].
 */
VectorXd project_sum_k_largest(const Eigen::Ref<const VectorXd>& v, const CvarSpec& spec,
                               ProjectionInfo* info = nullptr);

/// Projection onto {z : cvar_beta(z) <= kappa}.
VectorXd project_cvar(const Eigen::Ref<const VectorXd>& v, double beta, double kappa,
                      ProjectionInfo* info = nullptr);

/**
 * Reusable projector for repeated calls at fixed m (the ADMM z-update).
 * Holds sort scratch so the hot loop does not allocate.
 */
class SumKLargestProjector {
public:
    SumKLargestProjector(Index m, CvarSpec spec);

    /// out = projection of v; v and out may alias.
    void project(const Eigen::Ref<const VectorXd>& v, Eigen::Ref<VectorXd> out,
                 ProjectionInfo* info = nullptr);

    const CvarSpec& spec() const { return spec_; }

private:
    CvarSpec spec_;
    std::vector<std::pair<double, Index>> order_;
    std::vector<double> sorted_;
};

}  // namespace cvqp
