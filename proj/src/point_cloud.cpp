#include "pcflow/point_cloud.hpp"

#include <cmath>
#include <numeric>

#include "pcflow/errors.hpp"

namespace pcflow {

PointCloud::PointCloud(std::vector<double> xyz) : xyz_(std::move(xyz)) {
    if (xyz_.empty()) throw ArgumentError("empty cloud");
    if (xyz_.size() % 3 != 0) throw ArgumentError("coordinate count is not a multiple of 3");
    if (!all_finite()) throw ArgumentError("cloud has non-finite coordinates");
}

PointCloud::PointCloud(const std::vector<Point3>& points) {
    if (points.empty()) throw ArgumentError("empty cloud");
    xyz_.reserve(points.size() * 3);
    for (const auto& p : points) xyz_.insert(xyz_.end(), p.begin(), p.end());
    if (!all_finite()) throw ArgumentError("cloud has non-finite coordinates");
}

PointCloud PointCloud::zeros(std::size_t n) {
    PointCloud c;
    c.xyz_.assign(3 * n, 0.0);
    return c;
}

bool PointCloud::all_finite() const {
    for (double v : xyz_)
        if (!std::isfinite(v)) return false;
    return true;
}

double squared_distance(std::span<const double, 3> a, std::span<const double, 3> b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

NormalizationStats compute_normalization(std::span<const PointCloud> clouds) {
    Point3 sum{0, 0, 0};
    std::size_t count = 0;
    for (const auto& c : clouds) {
        for (std::size_t i = 0; i < c.size(); ++i)
            for (int k = 0; k < 3; ++k) sum[k] += c[i][k];
        count += c.size();
    }
    if (count == 0) throw ArgumentError("compute_normalization: no points");
    NormalizationStats stats;
    for (int k = 0; k < 3; ++k) stats.global_mean[k] = sum[k] / static_cast<double>(count);
    double ss = 0.0;
    for (const auto& c : clouds)
        for (std::size_t i = 0; i < c.size(); ++i)
            for (int k = 0; k < 3; ++k) {
                const double d = c[i][k] - stats.global_mean[k];
                ss += d * d;
            }
    stats.global_scale = std::sqrt(ss / static_cast<double>(3 * count));
    if (!(stats.global_scale > 0.0)) stats.global_scale = 1.0;
    return stats;
}

namespace {

void check_stats(const NormalizationStats& stats) {
    for (double m : stats.global_mean)
        if (!std::isfinite(m)) throw ArgumentError("normalization mean is not finite");
    if (!std::isfinite(stats.global_scale) || !(stats.global_scale > 0.0))
        throw ArgumentError("normalization scale must be finite and positive");
}

}  // namespace

PointCloud normalize(const PointCloud& cloud, const NormalizationStats& stats) {
    check_stats(stats);
    PointCloud out = cloud;
    for (std::size_t i = 0; i < out.size(); ++i)
        for (int k = 0; k < 3; ++k)
            out[i][k] = (cloud[i][k] - stats.global_mean[k]) / stats.global_scale;
    return out;
}

PointCloud denormalize(const PointCloud& cloud, const NormalizationStats& stats) {
    check_stats(stats);
    PointCloud out = cloud;
    for (std::size_t i = 0; i < out.size(); ++i)
        for (int k = 0; k < 3; ++k)
            out[i][k] = cloud[i][k] * stats.global_scale + stats.global_mean[k];
    return out;
}

PointCloud sample_noise(std::size_t n, Rng& rng) {
    if (n == 0) throw ArgumentError("noise cloud needs at least one point");
    std::vector<double> xyz(3 * n);
    for (double& v : xyz) v = rng.normal();
    return PointCloud(std::move(xyz));
}

Superset sample_noise_superset(std::size_t m, Rng& rng) {
    return Superset{sample_noise(m, rng), SupersetKind::noise};
}

std::vector<std::size_t> sample_indices(std::size_t m, std::size_t n, Rng& rng) {
    if (n > m)
        throw ArgumentError("subsample: requested " + std::to_string(n) + " rows from " +
                            std::to_string(m));
    std::vector<std::size_t> pool(m);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.uniform_index(m - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(n);
    return pool;
}

PointCloud gather(const PointCloud& source, std::span<const std::size_t> rows) {
    std::vector<double> xyz;
    xyz.reserve(3 * rows.size());
    for (std::size_t r : rows) {
        if (r >= source.size()) throw ArgumentError("gather: row index out of range");
        const auto p = source[r];
        xyz.insert(xyz.end(), p.begin(), p.end());
    }
    return PointCloud(std::move(xyz));
}

Subsample subsample(const PointCloud& source, std::size_t n, Rng& rng) {
    if (n == 0) throw ArgumentError("subsample: n must be at least 1");
    auto idx = sample_indices(source.size(), n, rng);
    PointCloud cloud = gather(source, idx);
    return Subsample{std::move(idx), std::move(cloud)};
}

Subsample subsample(const Superset& superset, std::size_t n, Rng& rng) {
    return subsample(superset.points, n, rng);
}

}  // namespace pcflow
