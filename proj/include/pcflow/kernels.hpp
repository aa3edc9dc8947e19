#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "pcflow/point_cloud.hpp"

// Data-parallel inner loops shared by the OT engine and the metrics.
//
// Every kernel exists twice with the same signature:
//   kernels::serial  plain scalar loops, the reference used by tests;
//   kernels::omp     OpenMP row-parallel, vectorised exp/reductions.
// Row results never depend on the thread count, so omp output is
// reproducible run to run; it agrees with serial to rounding (~1e-13 rel).
//
// Point arrays are row-major n x 3 doubles.

namespace pcflow::kernels {

using PairDistance = std::function<double(const PointCloud&, const PointCloud&)>;

namespace serial {

/// out[i*m + j] = |a_i - b_j|^2
void sq_dist_matrix(std::span<const double> a, std::span<const double> b, std::span<double> out);

/// Entropic c-transform with uniform target weights:
/// out_i = -eps * log sum_j exp(log_w + (g_j - |x_i - y_j|^2) / eps)
void softmin_rows(std::span<const double> x, std::span<const double> y, std::span<const double> g,
                  double log_w, double eps, std::span<double> out);

/// Barycentric projection under the row-normalised Gibbs kernel:
/// out_i = sum_j p_ij y_j with p_ij proportional to exp((g_j - |x_i - y_j|^2) / eps).
void barycentric_rows(std::span<const double> x, std::span<const double> y, std::span<const double> g,
                      double eps, std::span<double> out);

/// out_i = min_j |a_i - b_j|^2
void nearest_sq_dist(std::span<const double> a, std::span<const double> b, std::span<double> out);

/// K x K symmetric matrix of dist(clouds[i], clouds[j]); diagonal is 0.
void pairwise_cloud_distances(std::span<const PointCloud> clouds, const PairDistance& dist,
                              std::span<double> out);

/// R x C matrix dist(rows[i], cols[j]).
void cross_cloud_distances(std::span<const PointCloud> rows, std::span<const PointCloud> cols,
                           const PairDistance& dist, std::span<double> out);

}  // namespace serial

namespace omp {

void sq_dist_matrix(std::span<const double> a, std::span<const double> b, std::span<double> out);
void softmin_rows(std::span<const double> x, std::span<const double> y, std::span<const double> g,
                  double log_w, double eps, std::span<double> out);
void barycentric_rows(std::span<const double> x, std::span<const double> y, std::span<const double> g,
                      double eps, std::span<double> out);
void nearest_sq_dist(std::span<const double> a, std::span<const double> b, std::span<double> out);
void pairwise_cloud_distances(std::span<const PointCloud> clouds, const PairDistance& dist,
                              std::span<double> out);
void cross_cloud_distances(std::span<const PointCloud> rows, std::span<const PointCloud> cols,
                           const PairDistance& dist, std::span<double> out);

}  // namespace omp

/// Worker threads used by the omp kernels (0 = OpenMP default).
void set_num_threads(int n);
int num_threads();

}  // namespace pcflow::kernels
