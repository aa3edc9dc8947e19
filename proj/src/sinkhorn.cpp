#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcflow/errors.hpp"
#include "pcflow/kernels.hpp"
#include "pcflow/ot.hpp"

namespace pcflow {

void SinkhornConfig::validate() const {
    if (!(epsilon_start > 0.0) || !(epsilon_end > 0.0))
        throw ArgumentError("sinkhorn: epsilons must be positive");
    if (epsilon_end > epsilon_start) throw ArgumentError("sinkhorn: epsilon_end must not exceed epsilon_start");
    if (!(tol > 0.0)) throw ArgumentError("sinkhorn: tol must be positive");
    if (max_iters == 0) throw ArgumentError("sinkhorn: max_iters must be at least 1");
}

double squared_diameter(const PointCloud& a, const PointCloud& b) {
    Point3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const PointCloud* c : {&a, &b})
        for (std::size_t i = 0; i < c->size(); ++i)
            for (int k = 0; k < 3; ++k) {
                lo[k] = std::min(lo[k], (*c)[i][k]);
                hi[k] = std::max(hi[k], (*c)[i][k]);
            }
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) d2 += (hi[k] - lo[k]) * (hi[k] - lo[k]);
    return d2 > 0.0 ? d2 : 1.0;
}

std::vector<double> epsilon_schedule(double start, double end) {
    std::vector<double> eps;
    for (double e = start; e > end; e *= 0.5) eps.push_back(e);
    eps.push_back(end);
    return eps;
}

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct SolveInfo {
    std::size_t iterations = 0;
    bool converged = false;
};

// Two-sided log-domain Sinkhorn for OT_eps(x, y) with uniform weights.
// f lives on x, g on y. Cold starts anneal through `schedule`; warm starts
// iterate at the final epsilon only.
SolveInfo solve_two_sided(const PointCloud& x, const PointCloud& y, const std::vector<double>& schedule,
                          const SinkhornConfig& cfg, std::vector<double>& f, std::vector<double>& g, bool warm) {
    namespace K = kernels::omp;
    const double log_wx = -std::log(static_cast<double>(x.size()));
    const double log_wy = -std::log(static_cast<double>(y.size()));
    if (!warm) {
        f.assign(x.size(), 0.0);
        g.assign(y.size(), 0.0);
        for (std::size_t s = 0; s + 1 < schedule.size(); ++s) {
            K::softmin_rows(x.flat(), y.flat(), g, log_wy, schedule[s], f);
            K::softmin_rows(y.flat(), x.flat(), f, log_wx, schedule[s], g);
        }
    }
    const double eps = schedule.back();
    std::vector<double> f_new(x.size()), g_new(y.size());
    SolveInfo info;
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        K::softmin_rows(x.flat(), y.flat(), g, log_wy, eps, f_new);
        K::softmin_rows(y.flat(), x.flat(), f_new, log_wx, eps, g_new);
        const double change = std::max(max_abs_diff(f, f_new), max_abs_diff(g, g_new));
        f.swap(f_new);
        g.swap(g_new);
        info.iterations = it + 1;
        if (!std::isfinite(change)) throw NumericError("sinkhorn: potentials diverged");
        if (change < cfg.tol) {
            info.converged = true;
            break;
        }
    }
    return info;
}

// Symmetric OT_eps(x, x): a single potential with averaged updates.
SolveInfo solve_symmetric(const PointCloud& x, const std::vector<double>& schedule, const SinkhornConfig& cfg,
                          std::vector<double>& f, bool warm) {
    namespace K = kernels::omp;
    const double log_w = -std::log(static_cast<double>(x.size()));
    std::vector<double> t(x.size());
    if (!warm) {
        f.assign(x.size(), 0.0);
        for (std::size_t s = 0; s + 1 < schedule.size(); ++s) {
            K::softmin_rows(x.flat(), x.flat(), f, log_w, schedule[s], t);
            for (std::size_t i = 0; i < f.size(); ++i) f[i] = 0.5 * (f[i] + t[i]);
        }
    }
    const double eps = schedule.back();
    SolveInfo info;
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        K::softmin_rows(x.flat(), x.flat(), f, log_w, eps, t);
        double change = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double nf = 0.5 * (f[i] + t[i]);
            change = std::max(change, std::abs(nf - f[i]));
            f[i] = nf;
        }
        info.iterations = it + 1;
        if (!std::isfinite(change)) throw NumericError("sinkhorn: potentials diverged");
        if (change < cfg.tol) {
            info.converged = true;
            break;
        }
    }
    return info;
}

// OT_eps value from converged potentials: <a, c-transform(g)> + <b, g>.
double two_sided_value(const PointCloud& x, const PointCloud& y, const std::vector<double>& g, double eps) {
    std::vector<double> fh(x.size());
    kernels::omp::softmin_rows(x.flat(), y.flat(), g, -std::log(static_cast<double>(y.size())), eps, fh);
    return mean(fh) + mean(g);
}

}  // namespace

SinkhornResult sinkhorn_divergence(const PointCloud& a, const PointCloud& b, const SinkhornConfig& cfg,
                                   SinkhornWarmState* warm) {
    cfg.validate();
    if (a.empty() || b.empty()) throw ArgumentError("sinkhorn_divergence: empty cloud");
    const std::size_t n = a.size();

    SinkhornResult res;
    res.grad_a.assign(3 * n, 0.0);
    const double scale = cfg.relative_to_diameter ? squared_diameter(a, b) : 1.0;
    const auto schedule = epsilon_schedule(cfg.epsilon_start * scale, cfg.epsilon_end * scale);
    const double eps = schedule.back();
    res.epsilon = eps;

    // S(a, a) = 0 and a is its minimiser, so the gradient vanishes as well.
    if (a == b) return res;

    SinkhornWarmState local;
    SinkhornWarmState& st = warm ? *warm : local;

    const SolveInfo ab = solve_two_sided(a, b, schedule, cfg, st.f_ab, st.g_ab, st.warm);
    const SolveInfo aa = solve_symmetric(a, schedule, cfg, st.f_aa, st.warm);
    SolveInfo bb{0, true};
    if (!st.bb_ready) {
        bb = solve_symmetric(b, schedule, cfg, st.f_bb, false);
        std::vector<double> t(b.size());
        kernels::omp::softmin_rows(b.flat(), b.flat(), st.f_bb, -std::log(static_cast<double>(b.size())), eps, t);
        st.ot_bb = mean(t) + mean(st.f_bb);
        st.bb_ready = warm != nullptr;
    }
    st.warm = warm != nullptr;

    const double ot_ab = two_sided_value(a, b, st.g_ab, eps);
    const double ot_aa = two_sided_value(a, a, st.f_aa, eps);
    res.value = ot_ab - 0.5 * ot_aa - 0.5 * st.ot_bb;
    res.iterations = ab.iterations + aa.iterations + bb.iterations;
    res.converged = ab.converged && aa.converged && bb.converged;

    std::vector<double> t_ab(3 * n), t_aa(3 * n);
    kernels::omp::barycentric_rows(a.flat(), b.flat(), st.g_ab, eps, t_ab);
    kernels::omp::barycentric_rows(a.flat(), a.flat(), st.f_aa, eps, t_aa);
    const double w = 2.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < 3 * n; ++i) res.grad_a[i] = w * (t_aa[i] - t_ab[i]);
    if (!std::isfinite(res.value)) throw NumericError("sinkhorn_divergence: non-finite value");
    return res;
}

Assignment sinkhorn_rounded_assignment(const PointCloud& a, const PointCloud& b, const SinkhornConfig& cfg) {
    cfg.validate();
    if (a.size() != b.size()) throw ArgumentError("sinkhorn_rounded_assignment: clouds differ in size");
    const std::size_t n = a.size();
    const double scale = cfg.relative_to_diameter ? squared_diameter(a, b) : 1.0;
    const auto schedule = epsilon_schedule(cfg.epsilon_start * scale, cfg.epsilon_end * scale);
    std::vector<double> f, g;
    solve_two_sided(a, b, schedule, cfg, f, g, false);
    const double eps = schedule.back();

    // Greedy rounding: visit pairs by decreasing plan mass, keep a pair when
    // both its row and column are still free. Always yields a bijection.
    std::vector<double> score(n * n);
    kernels::omp::sq_dist_matrix(a.flat(), b.flat(), score);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) score[i * n + j] = (f[i] + g[j] - score[i * n + j]) / eps;
    std::vector<std::size_t> order(n * n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return score[p] > score[q]; });
    Assignment out;
    out.perm.assign(n, n);
    std::vector<char> col_used(n, 0);
    std::size_t matched = 0;
    for (std::size_t p : order) {
        const std::size_t i = p / n, j = p % n;
        if (out.perm[i] != n || col_used[j]) continue;
        out.perm[i] = j;
        col_used[j] = 1;
        if (++matched == n) break;
    }
    out.total_cost = assignment_cost(a, b, out.perm);
    return out;
}

}  // namespace pcflow
