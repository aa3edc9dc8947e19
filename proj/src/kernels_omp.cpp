#include <omp.h>

#include <Eigen/Core>
#include <exception>
#include <vector>

#include "pcflow/errors.hpp"
#include "pcflow/kernels.hpp"

namespace pcflow::kernels {

namespace {

int g_threads = 0;

int team_size() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

// Structure-of-arrays copy of an n x 3 point array, for vectorised sweeps.
struct Soa {
    Eigen::ArrayXd x, y, z;

    explicit Soa(std::span<const double> p) {
        const Eigen::Index n = static_cast<Eigen::Index>(p.size() / 3);
        x.resize(n);
        y.resize(n);
        z.resize(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            x[j] = p[3 * j];
            y[j] = p[3 * j + 1];
            z[j] = p[3 * j + 2];
        }
    }
    Eigen::Index size() const { return x.size(); }
};

inline void row_sq_dist(const double* p, const Soa& s, Eigen::ArrayXd& out) {
    out = (s.x - p[0]).square() + (s.y - p[1]).square() + (s.z - p[2]).square();
}

// Runs body(i) for i in [0, n) on the team; rethrows the first exception.
template <class Body>
void parallel_rows(std::size_t n, Body&& body) {
    std::exception_ptr err;
#pragma omp parallel for schedule(static) num_threads(team_size())
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(pcflow_kernel_error)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
}

}  // namespace

void set_num_threads(int n) { g_threads = n; }
int num_threads() { return team_size(); }

namespace omp {

void sq_dist_matrix(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    if (a.size() % 3 != 0 || b.size() % 3 != 0) throw ArgumentError("sq_dist_matrix: not an n x 3 array");
    const std::size_t n = a.size() / 3, m = b.size() / 3;
    if (out.size() != n * m) throw ArgumentError("sq_dist_matrix: output size mismatch");
    const Soa sb(b);
#pragma omp parallel num_threads(team_size())
    {
        Eigen::ArrayXd row;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            row_sq_dist(a.data() + 3 * i, sb, row);
            std::copy(row.data(), row.data() + m, out.data() + i * m);
        }
    }
}

void softmin_rows(std::span<const double> x, std::span<const double> y, std::span<const double> g,
                  double log_w, double eps, std::span<double> out) {
    const std::size_t n = x.size() / 3;
    const Soa sy(y);
    const Eigen::Map<const Eigen::ArrayXd> gv(g.data(), sy.size());
    const double inv_eps = 1.0 / eps;
#pragma omp parallel num_threads(team_size())
    {
        Eigen::ArrayXd row;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            row_sq_dist(x.data() + 3 * i, sy, row);
            row = (gv - row) * inv_eps;
            const double mx = row.maxCoeff();
            const double s = (row - mx).exp().sum();
            out[i] = -eps * (log_w + mx + std::log(s));
        }
    }
}

void barycentric_rows(std::span<const double> x, std::span<const double> y, std::span<const double> g,
                      double eps, std::span<double> out) {
    const std::size_t n = x.size() / 3;
    const Soa sy(y);
    const Eigen::Map<const Eigen::ArrayXd> gv(g.data(), sy.size());
    const double inv_eps = 1.0 / eps;
#pragma omp parallel num_threads(team_size())
    {
        Eigen::ArrayXd row;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            row_sq_dist(x.data() + 3 * i, sy, row);
            row = (gv - row) * inv_eps;
            const double mx = row.maxCoeff();
            row = (row - mx).exp();
            const double inv_s = 1.0 / row.sum();
            out[3 * i] = (row * sy.x).sum() * inv_s;
            out[3 * i + 1] = (row * sy.y).sum() * inv_s;
            out[3 * i + 2] = (row * sy.z).sum() * inv_s;
        }
    }
}

void nearest_sq_dist(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    const std::size_t n = a.size() / 3;
    const Soa sb(b);
#pragma omp parallel num_threads(team_size())
    {
        Eigen::ArrayXd row;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            row_sq_dist(a.data() + 3 * i, sb, row);
            out[i] = row.minCoeff();
        }
    }
}

void pairwise_cloud_distances(std::span<const PointCloud> clouds, const PairDistance& dist,
                              std::span<double> out) {
    const std::size_t k = clouds.size();
    if (out.size() != k * k) throw ArgumentError("pairwise_cloud_distances: output size mismatch");
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(k * (k - 1) / 2);
    for (std::size_t i = 0; i < k; ++i) {
        out[i * k + i] = 0.0;
        for (std::size_t j = i + 1; j < k; ++j) pairs.emplace_back(i, j);
    }
    parallel_rows(pairs.size(), [&](std::size_t p) {
        const auto [i, j] = pairs[p];
        const double d = dist(clouds[i], clouds[j]);
        out[i * k + j] = d;
        out[j * k + i] = d;
    });
}

void cross_cloud_distances(std::span<const PointCloud> rows, std::span<const PointCloud> cols,
                           const PairDistance& dist, std::span<double> out) {
    const std::size_t c = cols.size();
    if (out.size() != rows.size() * c) throw ArgumentError("cross_cloud_distances: output size mismatch");
    parallel_rows(rows.size() * c, [&](std::size_t p) { out[p] = dist(rows[p / c], cols[p % c]); });
}

}  // namespace omp

}  // namespace pcflow::kernels
