#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pcflow/point_cloud.hpp"
#include "pcflow/sampler.hpp"

namespace pcflow {

enum class DistanceKind { cd, emd };

std::string to_string(DistanceKind kind);

/// Squared Chamfer: mean nearest squared distance a->b plus b->a.
double chamfer(const PointCloud& a, const PointCloud& b);

struct EmdResult {
    double value = 0.0;
    bool approximate = false;  ///< true: entropic-plan rounding, an upper bound
};

inline constexpr std::size_t kExactEmdMaxPoints = 512;

/// (1/N) min over bijections of sum |a_i - b_sigma(i)|^2. Exact Hungarian up
/// to exact_max points, Sinkhorn-rounded bijection beyond.
EmdResult emd(const PointCloud& a, const PointCloud& b, std::size_t exact_max = kExactEmdMaxPoints);

/// Distance matrix between two sets of clouds (rows x cols), or the
/// symmetric matrix of one set when cols is empty.
std::vector<double> cloud_distance_matrix(std::span<const PointCloud> rows, std::span<const PointCloud> cols,
                                          DistanceKind kind, bool* any_approximate = nullptr);
std::vector<double> cloud_distance_matrix(std::span<const PointCloud> set, DistanceKind kind,
                                          bool* any_approximate = nullptr);

/// Leave-one-out 1-NN accuracy over gen U ref. A sample counts as correct
/// only when its nearest same-set distance is strictly below its nearest
/// other-set distance.
double one_nna(std::span<const PointCloud> gen, std::span<const PointCloud> ref, DistanceKind kind);

/// Same from precomputed matrices: gg (G x G), rr (R x R), gr (G x R).
double one_nna_from(std::span<const double> gg, std::span<const double> rr, std::span<const double> gr, std::size_t g,
                    std::size_t r);

/// Fraction of ref clouds that are the nearest ref of some generated cloud
/// (ties go to the lowest ref index).
double coverage(std::span<const PointCloud> gen, std::span<const PointCloud> ref, DistanceKind kind);
double coverage_from(std::span<const double> gr, std::size_t g, std::size_t r);

struct CurvatureResult {
    std::vector<double> per_step;  ///< T - 1 values
    double max = 0.0;
};

/// per_step[i] = mean over points of |v_{i+1} - v_i|^2.
CurvatureResult trajectory_curvature(const Trajectory& traj);

using VelocityFn = std::function<PointCloud(const PointCloud&, double)>;

/// Hutchinson estimate of the Frobenius norm of dv/dx at (x, t): the root
/// mean of |J z|^2 over `probes` standard-normal z, each J z by central
/// differences with step h.
double jacobian_frobenius(const VelocityFn& field, const PointCloud& x, double t, std::size_t probes, Rng& rng,
                          double h = 1e-3);

struct EvalReport {
    std::size_t steps = 0;
    std::size_t n_gen = 0;
    std::size_t n_ref = 0;
    double one_nna_cd = 0.0;
    double cov_cd = 0.0;
    double one_nna_emd = 0.0;  ///< NaN when EMD was not requested
    double cov_emd = 0.0;
    bool emd_approximate = false;
};

EvalReport evaluate_sets(std::span<const PointCloud> gen, std::span<const PointCloud> ref, std::size_t steps,
                         bool with_emd);

}  // namespace pcflow
