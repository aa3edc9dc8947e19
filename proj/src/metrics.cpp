#include "pcflow/metrics.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include "pcflow/errors.hpp"
#include "pcflow/kernels.hpp"
#include "pcflow/ot.hpp"

namespace pcflow {

std::string to_string(DistanceKind kind) { return kind == DistanceKind::cd ? "cd" : "emd"; }

double chamfer(const PointCloud& a, const PointCloud& b) {
    if (a.empty() || b.empty()) throw ArgumentError("chamfer: empty cloud");
    std::vector<double> ab(a.size()), ba(b.size());
    kernels::omp::nearest_sq_dist(a.flat(), b.flat(), ab);
    kernels::omp::nearest_sq_dist(b.flat(), a.flat(), ba);
    double sa = 0.0, sb = 0.0;
    for (double d : ab) sa += d;
    for (double d : ba) sb += d;
    return sa / static_cast<double>(a.size()) + sb / static_cast<double>(b.size());
}

EmdResult emd(const PointCloud& a, const PointCloud& b, std::size_t exact_max) {
    if (a.size() != b.size())
        throw ArgumentError("emd: clouds differ in size (" + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + ")");
    if (a.empty()) throw ArgumentError("emd: empty cloud");
    const double n = static_cast<double>(a.size());
    if (a.size() <= exact_max) return {hungarian_points(a, b).total_cost / n, false};
    SinkhornConfig cfg;
    cfg.epsilon_end = 1e-3;
    return {sinkhorn_rounded_assignment(a, b, cfg).total_cost / n, true};
}

namespace {

double distance(const PointCloud& a, const PointCloud& b, DistanceKind kind, bool& approx) {
    if (kind == DistanceKind::cd) return chamfer(a, b);
    const EmdResult r = emd(a, b);
    if (r.approximate) approx = true;
    return r.value;
}

}  // namespace

std::vector<double> cloud_distance_matrix(std::span<const PointCloud> rows, std::span<const PointCloud> cols,
                                          DistanceKind kind, bool* any_approximate) {
    std::vector<double> out(rows.size() * cols.size());
    std::atomic<bool> flag{false};
    kernels::omp::cross_cloud_distances(rows, cols,
                                        [&](const PointCloud& a, const PointCloud& b) {
                                            bool approx = false;
                                            const double d = distance(a, b, kind, approx);
                                            if (approx) flag = true;
                                            return d;
                                        },
                                        out);
    if (any_approximate) *any_approximate = flag;
    return out;
}

std::vector<double> cloud_distance_matrix(std::span<const PointCloud> set, DistanceKind kind, bool* any_approximate) {
    std::vector<double> out(set.size() * set.size());
    std::atomic<bool> flag{false};
    kernels::omp::pairwise_cloud_distances(set,
                                           [&](const PointCloud& a, const PointCloud& b) {
                                               bool approx = false;
                                               const double d = distance(a, b, kind, approx);
                                               if (approx) flag = true;
                                               return d;
                                           },
                                           out);
    if (any_approximate) *any_approximate = flag;
    return out;
}

double one_nna_from(std::span<const double> gg, std::span<const double> rr, std::span<const double> gr, std::size_t g,
                    std::size_t r) {
    if (g == 0 || r == 0) throw ArgumentError("one_nna: both sets must be nonempty");
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < g; ++i) {
        double same = inf, other = inf;
        for (std::size_t j = 0; j < g; ++j)
            if (j != i) same = std::min(same, gg[i * g + j]);
        for (std::size_t j = 0; j < r; ++j) other = std::min(other, gr[i * r + j]);
        if (same < other) ++correct;
    }
    for (std::size_t i = 0; i < r; ++i) {
        double same = inf, other = inf;
        for (std::size_t j = 0; j < r; ++j)
            if (j != i) same = std::min(same, rr[i * r + j]);
        for (std::size_t j = 0; j < g; ++j) other = std::min(other, gr[j * r + i]);
        if (same < other) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(g + r);
}

double one_nna(std::span<const PointCloud> gen, std::span<const PointCloud> ref, DistanceKind kind) {
    const auto gg = cloud_distance_matrix(gen, kind);
    const auto rr = cloud_distance_matrix(ref, kind);
    const auto gr = cloud_distance_matrix(gen, ref, kind);
    return one_nna_from(gg, rr, gr, gen.size(), ref.size());
}

double coverage_from(std::span<const double> gr, std::size_t g, std::size_t r) {
    if (g == 0 || r == 0) throw ArgumentError("coverage: both sets must be nonempty");
    std::vector<char> hit(r, 0);
    for (std::size_t i = 0; i < g; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < r; ++j)
            if (gr[i * r + j] < gr[i * r + best]) best = j;
        hit[best] = 1;
    }
    std::size_t c = 0;
    for (char h : hit) c += h ? 1 : 0;
    return static_cast<double>(c) / static_cast<double>(r);
}

double coverage(std::span<const PointCloud> gen, std::span<const PointCloud> ref, DistanceKind kind) {
    return coverage_from(cloud_distance_matrix(gen, ref, kind), gen.size(), ref.size());
}

CurvatureResult trajectory_curvature(const Trajectory& traj) {
    if (traj.size() < 2) throw ArgumentError("trajectory_curvature: need at least 2 steps");
    CurvatureResult out;
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        const auto& a = traj.v[i].coords();
        const auto& b = traj.v[i + 1].coords();
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += (b[k] - a[k]) * (b[k] - a[k]);
        const double c = s / static_cast<double>(traj.v[i].size());
        out.per_step.push_back(c);
        out.max = std::max(out.max, c);
    }
    return out;
}

double jacobian_frobenius(const VelocityFn& field, const PointCloud& x, double t, std::size_t probes, Rng& rng,
                          double h) {
    if (probes < 1) throw ArgumentError("jacobian_frobenius: probes must be at least 1");
    if (!(h > 0.0)) throw ArgumentError("jacobian_frobenius: h must be positive");
    const std::size_t d = x.coords().size();
    double acc = 0.0;
    std::vector<double> z(d), plus(d), minus(d);
    for (std::size_t p = 0; p < probes; ++p) {
        for (std::size_t i = 0; i < d; ++i) {
            z[i] = rng.normal();
            plus[i] = x.coords()[i] + h * z[i];
            minus[i] = x.coords()[i] - h * z[i];
        }
        const PointCloud vp = field(PointCloud(plus), t);
        const PointCloud vm = field(PointCloud(minus), t);
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double jz = (vp.coords()[i] - vm.coords()[i]) / (2.0 * h);
            s += jz * jz;
        }
        acc += s;
    }
    return std::sqrt(acc / static_cast<double>(probes));
}

EvalReport evaluate_sets(std::span<const PointCloud> gen, std::span<const PointCloud> ref, std::size_t steps,
                         bool with_emd) {
    EvalReport r;
    r.steps = steps;
    r.n_gen = gen.size();
    r.n_ref = ref.size();
    {
        const auto gg = cloud_distance_matrix(gen, DistanceKind::cd);
        const auto rr = cloud_distance_matrix(ref, DistanceKind::cd);
        const auto gr = cloud_distance_matrix(gen, ref, DistanceKind::cd);
        r.one_nna_cd = one_nna_from(gg, rr, gr, gen.size(), ref.size());
        r.cov_cd = coverage_from(gr, gen.size(), ref.size());
    }
    if (with_emd) {
        bool a1 = false, a2 = false, a3 = false;
        const auto gg = cloud_distance_matrix(gen, DistanceKind::emd, &a1);
        const auto rr = cloud_distance_matrix(ref, DistanceKind::emd, &a2);
        const auto gr = cloud_distance_matrix(gen, ref, DistanceKind::emd, &a3);
        r.one_nna_emd = one_nna_from(gg, rr, gr, gen.size(), ref.size());
        r.cov_emd = coverage_from(gr, gen.size(), ref.size());
        r.emd_approximate = a1 || a2 || a3;
    } else {
        r.one_nna_emd = std::nan("");
        r.cov_emd = std::nan("");
    }
    return r;
}

}  // namespace pcflow
