#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pcflow/point_cloud.hpp"

namespace pcflow {

/// Dense R x C matrix of nonnegative transport costs, row-major.
struct CostMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
    double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

/// values[i][j] = |a_i - b_j|^2
CostMatrix cost_matrix(const PointCloud& a, const PointCloud& b);

/// perm[i] is the column matched to row i; total_cost = sum_i cost(i, perm[i]).
struct Assignment {
    std::vector<std::size_t> perm;
    double total_cost = 0.0;
};

/// Minimum-cost perfect matching (shortest augmenting paths with
/// potentials, O(n^3)). Ties resolve in scan order: the lowest column index
/// wins every comparison. Throws ArgumentError for non-square input.
Assignment hungarian(const CostMatrix& cost);

/// Same solver on the squared-Euclidean cost between two equal-size clouds,
/// with cost rows generated on the fly (O(n) memory instead of O(n^2)).
Assignment hungarian_points(const PointCloud& rows, const PointCloud& cols);

/// Sum of cost(i, perm[i]) in row order.
double assignment_cost(const CostMatrix& cost, const std::vector<std::size_t>& perm);
double assignment_cost(const PointCloud& rows, const PointCloud& cols, const std::vector<std::size_t>& perm);

// ---------------------------------------------------------------------------
// Entropic OT

struct SinkhornConfig {
    double epsilon_start = 0.5;
    double epsilon_end = 0.01;
    std::size_t max_iters = 1000;
    double tol = 1e-6;
    /// When set, both epsilons are multiplied by the squared diameter of the
    /// joint bounding box of the two clouds.
    bool relative_to_diameter = true;

    void validate() const;
};

/// Squared diagonal of the bounding box of a and b together.
double squared_diameter(const PointCloud& a, const PointCloud& b);

/// Annealing schedule: epsilon halves from start until it reaches end
/// (geometric, last entry exactly `end`).
std::vector<double> epsilon_schedule(double start, double end);

struct SinkhornResult {
    double value = 0.0;         ///< S_eps(a, b)
    std::vector<double> grad_a;  ///< n x 3, d value / d a
    bool converged = true;      ///< false: some solve hit max_iters (warning only)
    std::size_t iterations = 0; ///< total Sinkhorn iterations across the three solves
    double epsilon = 0.0;       ///< absolute epsilon the value was evaluated at
};

/// Cached dual potentials for repeated evaluations against one fixed `b`
/// with the same absolute epsilon (the gradient-flow loop). Warm potentials
/// skip the annealing phase; OT(b, b) is solved once.
struct SinkhornWarmState {
    std::vector<double> f_ab, g_ab, f_aa, f_bb;
    double ot_bb = 0.0;
    bool warm = false;
    bool bb_ready = false;
};

/// Debiased Sinkhorn divergence with uniform weights,
///   S(a, b) = OT(a, b) - OT(a, a)/2 - OT(b, b)/2,
/// each OT term solved by log-domain Sinkhorn with epsilon annealing.
/// The gradient uses the envelope identity
///   dS/da_i = (2/n) (T_aa(a_i) - T_ab(a_i)),
/// T the barycentric projection of the converged plan.
SinkhornResult sinkhorn_divergence(const PointCloud& a, const PointCloud& b, const SinkhornConfig& cfg,
                                   SinkhornWarmState* warm = nullptr);

/// Entropic plan-based bijection: Sinkhorn at epsilon_end, then greedy
/// rounding of the plan into a permutation. Its cost upper-bounds the exact
/// assignment cost. Used for EMD on clouds too large for Hungarian.
Assignment sinkhorn_rounded_assignment(const PointCloud& a, const PointCloud& b, const SinkhornConfig& cfg);

// ---------------------------------------------------------------------------
// Wasserstein gradient flow

struct WgfConfig {
    /// Relative epsilons are scaled by the squared diameter of the target.
    SinkhornConfig sinkhorn{};
    std::size_t iters = 200;
    /// x <- x - step * m * grad. With the unhalved squared cost, step = 0.5
    /// moves each point by exactly the displacement T_ab(x) - T_aa(x).
    double step = 0.5;
    /// Stop once S <= stop_ratio * S_initial (0 disables).
    double stop_ratio = 1e-4;
    /// Supersets larger than this are split into random row blocks that flow
    /// independently.
    std::size_t block_size = 2048;
    /// Abort after this many consecutive increases of the divergence.
    std::size_t patience = 10;
    std::uint64_t seed = 0;
};

struct WgfResult {
    Superset deformed;            ///< row i corresponds to row i of the noise
    std::vector<double> history;  ///< divergence before the first step, then after each step
    bool converged = true;        ///< every Sinkhorn solve converged
};

/// Moves the noise rows by gradient descent on S(x, target). Throws
/// NumericError when the divergence rises for `patience` steps in a row.
WgfResult wasserstein_gradient_flow(const Superset& noise, const Superset& target, const WgfConfig& cfg);

inline constexpr std::size_t kExactOtThreshold = 10000;

/// Exact bijection between equal-size supersets (noise rows -> data columns).
/// Throws ConfigError above `threshold`, pointing at the gradient-flow path.
Assignment exact_superset_ot(const Superset& noise, const Superset& data,
                             std::size_t threshold = kExactOtThreshold);

}  // namespace pcflow
