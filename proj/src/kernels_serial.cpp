#include <algorithm>
#include <cmath>
#include <limits>

#include "pcflow/errors.hpp"
#include "pcflow/kernels.hpp"

namespace pcflow::kernels::serial {

namespace {

void check_points(std::span<const double> p, const char* what) {
    if (p.size() % 3 != 0) throw ArgumentError(std::string(what) + ": not an n x 3 array");
}

}  // namespace

void sq_dist_matrix(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    check_points(a, "sq_dist_matrix");
    check_points(b, "sq_dist_matrix");
    const std::size_t n = a.size() / 3, m = b.size() / 3;
    if (out.size() != n * m) throw ArgumentError("sq_dist_matrix: output size mismatch");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = a[3 * i + k] - b[3 * j + k];
                s += d * d;
            }
            out[i * m + j] = s;
        }
}

void softmin_rows(std::span<const double> x, std::span<const double> y, std::span<const double> g,
                  double log_w, double eps, std::span<double> out) {
    const std::size_t n = x.size() / 3, m = y.size() / 3;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            double c = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = x[3 * i + k] - y[3 * j + k];
                c += d * d;
            }
            mx = std::max(mx, (g[j] - c) / eps);
        }
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            double c = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = x[3 * i + k] - y[3 * j + k];
                c += d * d;
            }
            s += std::exp((g[j] - c) / eps - mx);
        }
        out[i] = -eps * (log_w + mx + std::log(s));
    }
}

void barycentric_rows(std::span<const double> x, std::span<const double> y, std::span<const double> g,
                      double eps, std::span<double> out) {
    const std::size_t n = x.size() / 3, m = y.size() / 3;
    std::vector<double> logits(m);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            double c = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = x[3 * i + k] - y[3 * j + k];
                c += d * d;
            }
            logits[j] = (g[j] - c) / eps;
            mx = std::max(mx, logits[j]);
        }
        double s = 0.0, acc[3] = {0, 0, 0};
        for (std::size_t j = 0; j < m; ++j) {
            const double w = std::exp(logits[j] - mx);
            s += w;
            for (int k = 0; k < 3; ++k) acc[k] += w * y[3 * j + k];
        }
        for (int k = 0; k < 3; ++k) out[3 * i + k] = acc[k] / s;
    }
}

void nearest_sq_dist(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    const std::size_t n = a.size() / 3, m = b.size() / 3;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = a[3 * i + k] - b[3 * j + k];
                s += d * d;
            }
            best = std::min(best, s);
        }
        out[i] = best;
    }
}

void pairwise_cloud_distances(std::span<const PointCloud> clouds, const PairDistance& dist,
                              std::span<double> out) {
    const std::size_t k = clouds.size();
    if (out.size() != k * k) throw ArgumentError("pairwise_cloud_distances: output size mismatch");
    for (std::size_t i = 0; i < k; ++i) {
        out[i * k + i] = 0.0;
        for (std::size_t j = i + 1; j < k; ++j) {
            const double d = dist(clouds[i], clouds[j]);
            out[i * k + j] = d;
            out[j * k + i] = d;
        }
    }
}

void cross_cloud_distances(std::span<const PointCloud> rows, std::span<const PointCloud> cols,
                           const PairDistance& dist, std::span<double> out) {
    if (out.size() != rows.size() * cols.size())
        throw ArgumentError("cross_cloud_distances: output size mismatch");
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out[i * cols.size() + j] = dist(rows[i], cols[j]);
}

}  // namespace pcflow::kernels::serial
