#pragma once

// Independent reference computations used as test oracles. Deliberately
// naive: no shared code with the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "pcflow/point_cloud.hpp"

namespace oracle {

inline double sq(const pcflow::PointCloud& a, std::size_t i, const pcflow::PointCloud& b, std::size_t j) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += (a[i][k] - b[j][k]) * (a[i][k] - b[j][k]);
    return s;
}

/// Minimum over all permutations of sum_i c[i][p[i]] (n <= 8).
inline double brute_force_assignment(const std::vector<double>& c, std::size_t n,
                                     std::vector<std::size_t>* best_perm = nullptr) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += c[i * n + p[i]];
        if (s < best) {
            best = s;
            if (best_perm) *best_perm = p;
        }
    } while (std::next_permutation(p.begin(), p.end()));
    return best;
}

inline double brute_force_point_assignment(const pcflow::PointCloud& a, const pcflow::PointCloud& b) {
    const std::size_t n = a.size();
    std::vector<double> c(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) c[i * n + j] = sq(a, i, b, j);
    return brute_force_assignment(c, n);
}

inline double naive_chamfer(const pcflow::PointCloud& a, const pcflow::PointCloud& b) {
    auto one_side = [](const pcflow::PointCloud& x, const pcflow::PointCloud& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < y.size(); ++j) m = std::min(m, sq(x, i, y, j));
            s += m;
        }
        return s / static_cast<double>(x.size());
    };
    return one_side(a, b) + one_side(b, a);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// One-sample Kolmogorov-Smirnov statistic against N(0, 1).
inline double ks_normal(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = normal_cdf(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// Two-sample KS statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

/// Critical value of the two-sample KS statistic at level alpha.
inline double ks_two_sample_critical(std::size_t n, std::size_t m, double alpha) {
    const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

/// Pearson chi-square statistic against equal expected counts.
inline double chi_square_uniform(const std::vector<std::size_t>& counts) {
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const double e = total / static_cast<double>(counts.size());
    double s = 0.0;
    for (auto c : counts) s += (static_cast<double>(c) - e) * (static_cast<double>(c) - e) / e;
    return s;
}

/// Upper alpha quantile of chi-square with k degrees of freedom
/// (Wilson-Hilferty approximation, accurate to well under 1% for k >= 10).
inline double chi_square_critical(double k, double z_alpha) {
    const double a = 2.0 / (9.0 * k);
    return k * std::pow(1.0 - a + z_alpha * std::sqrt(a), 3.0);
}

/// |a - b| / max(|a|, |b|, floor)
inline double rel_err(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
