#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "pcflow/rng.hpp"

namespace pcflow {

using Point3 = std::array<double, 3>;

/// N x 3 coordinates stored row-major. Point order is not meaningful.
/// A default-constructed cloud is an empty placeholder; every cloud built
/// from coordinates has n >= 1 and only finite values.
class PointCloud {
public:
    PointCloud() = default;
    explicit PointCloud(std::vector<double> xyz);
    explicit PointCloud(const std::vector<Point3>& points);

    /// Unvalidated n x 3 zero cloud, for use as an output buffer.
    static PointCloud zeros(std::size_t n);

    std::size_t size() const noexcept { return xyz_.size() / 3; }
    bool empty() const noexcept { return xyz_.empty(); }

    std::span<const double, 3> operator[](std::size_t i) const {
        return std::span<const double, 3>(xyz_.data() + 3 * i, 3);
    }
    std::span<double, 3> operator[](std::size_t i) {
        return std::span<double, 3>(xyz_.data() + 3 * i, 3);
    }

    const double* data() const noexcept { return xyz_.data(); }
    double* data() noexcept { return xyz_.data(); }
    std::span<const double> flat() const noexcept { return xyz_; }
    const std::vector<double>& coords() const noexcept { return xyz_; }

    bool all_finite() const;

    friend bool operator==(const PointCloud&, const PointCloud&) = default;

private:
    std::vector<double> xyz_;
};

enum class SupersetKind { data, noise };

/// Dense M-point sample of one shape (kind=data) or of N(0, I) (kind=noise).
struct Superset {
    PointCloud points;
    SupersetKind kind = SupersetKind::data;

    std::size_t m() const noexcept { return points.size(); }
};

struct NormalizationStats {
    Point3 global_mean{0.0, 0.0, 0.0};
    double global_scale = 1.0;
};

/// Global mean over every point of every cloud and the global coordinate
/// standard deviation around it.
NormalizationStats compute_normalization(std::span<const PointCloud> clouds);

PointCloud normalize(const PointCloud& cloud, const NormalizationStats& stats);
PointCloud denormalize(const PointCloud& cloud, const NormalizationStats& stats);

Superset sample_noise_superset(std::size_t m, Rng& rng);

/// n x 3 cloud of i.i.d. standard-normal coordinates.
PointCloud sample_noise(std::size_t n, Rng& rng);

struct Subsample {
    std::vector<std::size_t> indices;
    PointCloud cloud;
};

/// n distinct rows drawn uniformly without replacement (partial Fisher-Yates).
std::vector<std::size_t> sample_indices(std::size_t m, std::size_t n, Rng& rng);
Subsample subsample(const PointCloud& source, std::size_t n, Rng& rng);
Subsample subsample(const Superset& superset, std::size_t n, Rng& rng);

PointCloud gather(const PointCloud& source, std::span<const std::size_t> rows);

double squared_distance(std::span<const double, 3> a, std::span<const double, 3> b);

}  // namespace pcflow
