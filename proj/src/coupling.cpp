#include "pcflow/coupling.hpp"

#include <chrono>
#include <cmath>

#include "pcflow/errors.hpp"

namespace pcflow {

void HybridConfig::validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ArgumentError("hybrid beta must lie in [0, 1], got " + std::to_string(beta));
}

TrainingPair independent_pair(const PointCloud& data, Rng& rng) {
    return TrainingPair{sample_noise(data.size(), rng), data, {}};
}

double flat_cost(const PointCloud& a, const PointCloud& b) {
    if (a.size() != b.size()) throw ArgumentError("flat_cost: clouds differ in size");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += squared_distance(a[i], b[i]);
    return s;
}

double aligned_cost(const PointCloud& a, const PointCloud& b) { return hungarian_points(a, b).total_cost; }

namespace {

void check_batch(std::span<const PointCloud> noises, std::span<const PointCloud> datas, const char* who) {
    if (noises.size() != datas.size())
        throw ArgumentError(std::string(who) + ": batch sizes differ (" + std::to_string(noises.size()) + " vs " +
                            std::to_string(datas.size()) + ")");
    if (noises.empty()) throw ArgumentError(std::string(who) + ": empty batch");
    const std::size_t n = noises[0].size();
    for (std::size_t i = 0; i < noises.size(); ++i)
        if (noises[i].size() != n || datas[i].size() != n)
            throw ArgumentError(std::string(who) + ": clouds must share N = " + std::to_string(n));
}

}  // namespace

std::vector<TrainingPair> minibatch_ot_pairs(std::span<const PointCloud> noises, std::span<const PointCloud> datas) {
    check_batch(noises, datas, "minibatch_ot_pairs");
    const std::size_t b = noises.size();
    CostMatrix c{b, b, std::vector<double>(b * b)};
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) c(i, j) = flat_cost(noises[i], datas[j]);
    const Assignment a = hungarian(c);
    std::vector<TrainingPair> pairs;
    pairs.reserve(b);
    for (std::size_t i = 0; i < b; ++i) pairs.push_back({noises[i], datas[a.perm[i]], {}});
    return pairs;
}

std::vector<TrainingPair> equivariant_ot_pairs(std::span<const PointCloud> noises, std::span<const PointCloud> datas,
                                               std::size_t max_points) {
    check_batch(noises, datas, "equivariant_ot_pairs");
    const std::size_t b = noises.size(), n = noises[0].size();
    if (b * n > max_points) {
        // B^2 inner assignments of size N, each ~N^3.
        const double ops = static_cast<double>(b) * b * std::pow(static_cast<double>(n), 3);
        throw ConfigError("equivariant_ot_pairs: B*N = " + std::to_string(b * n) + " exceeds the guard of " +
                          std::to_string(max_points) + " points (about " + std::to_string(ops) +
                          " inner assignment operations)");
    }
    CostMatrix c{b, b, std::vector<double>(b * b)};
    std::vector<std::vector<std::size_t>> perms(b * b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) {
            Assignment inner = hungarian_points(noises[i], datas[j]);
            c(i, j) = inner.total_cost;
            perms[i * b + j] = std::move(inner.perm);
        }
    const Assignment outer = hungarian(c);
    std::vector<TrainingPair> pairs;
    pairs.reserve(b);
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t j = outer.perm[i];
        pairs.push_back({noises[i], gather(datas[j], perms[i * b + j]), {}});
    }
    return pairs;
}

CouplingMethod parse_coupling_method(const std::string& name) {
    if (name == "exact" || name == "exact_hungarian" || name == "hungarian") return CouplingMethod::exact_hungarian;
    if (name == "wgf") return CouplingMethod::wgf;
    throw ConfigError("unknown coupling method \"" + name + "\" (expected exact_hungarian or wgf)");
}

std::string to_string(CouplingMethod method) {
    return method == CouplingMethod::wgf ? "wgf" : "exact_hungarian";
}

SupersetCoupling precompute_superset_coupling(const Superset& data, const PrecomputeConfig& cfg, Rng& rng,
                                              const std::string& shape_id, std::uint64_t digest) {
    if (data.m() == 0) throw ArgumentError("precompute_superset_coupling: empty superset");
    const std::size_t m = data.m();
    if (cfg.method == CouplingMethod::exact_hungarian && m > cfg.exact_threshold)
        throw ConfigError("superset size " + std::to_string(m) + " exceeds the exact-OT threshold " +
                          std::to_string(cfg.exact_threshold) + "; use method = \"wgf\"");
    SupersetCoupling out;
    out.shape_id = shape_id;
    out.method = cfg.method;
    out.seed = rng.seed();
    out.digest = digest;
    Superset noise = sample_noise_superset(m, rng);
    if (cfg.method == CouplingMethod::exact_hungarian) {
        const Assignment a = exact_superset_ot(noise, data, cfg.exact_threshold);
        out.x1_rows = gather(data.points, a.perm);
    } else {
        WgfConfig w = cfg.wgf;
        w.seed = mix_seed(rng.seed(), 0x77676600);
        out.x1_rows = wasserstein_gradient_flow(noise, data, w).deformed.points;
    }
    out.x0_rows = std::move(noise.points);
    return out;
}

TrainingPair sample_coupled_pair(const SupersetCoupling& coupling, std::size_t n, Rng& rng) {
    if (n > coupling.m())
        throw ArgumentError("sample_coupled_pair: n = " + std::to_string(n) + " exceeds superset size " +
                            std::to_string(coupling.m()));
    const auto idx = sample_indices(coupling.m(), n, rng);
    return TrainingPair{gather(coupling.x0_rows, idx), gather(coupling.x1_rows, idx), {}};
}

PointCloud hybrid_perturb(const PointCloud& x0, const HybridConfig& cfg, Rng& rng) {
    cfg.validate();
    const double a = std::sqrt(1.0 - cfg.beta), b = std::sqrt(cfg.beta);
    std::vector<double> out(x0.coords());
    for (double& v : out) v = a * v + b * rng.normal();
    return PointCloud(std::move(out));
}

// ---------------------------------------------------------------------------

namespace {

double mean_pair_cost(const std::vector<TrainingPair>& pairs) {
    double s = 0.0;
    for (const auto& p : pairs) s += flat_cost(p.x0, p.x1) / static_cast<double>(p.x0.size());
    return s / static_cast<double>(pairs.size());
}

struct Accum {
    double cost = 0.0, seconds = 0.0;
    std::size_t batches = 0;
};

template <class F>
auto timed(double& seconds, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = f();
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace

BenchReport bench_couplings(const BenchConfig& cfg, Rng& rng) {
    if (cfg.shapes.empty() || cfg.n == 0 || cfg.trials == 0) throw ArgumentError("bench_couplings: empty configuration");
    if (cfg.superset_m < cfg.n) throw ArgumentError("bench_couplings: superset_m must be at least n");
    const std::size_t k = cfg.shapes.size();

    // Dense data per shape and its superset coupling, shared by all rows.
    std::vector<Superset> dense;
    std::vector<SupersetCoupling> couplings;
    for (std::size_t s = 0; s < k; ++s) {
        Rng srng = rng.fork(s);
        dense.push_back({generate_shape(cfg.shapes[s], cfg.superset_m, srng), SupersetKind::data});
        PrecomputeConfig pc;
        pc.method = cfg.superset_m <= kExactOtThreshold ? CouplingMethod::exact_hungarian : CouplingMethod::wgf;
        couplings.push_back(precompute_superset_coupling(dense.back(), pc, srng, to_string(cfg.shapes[s])));
    }

    BenchReport report;
    for (std::size_t bsz : cfg.batch_sizes) {
        if (bsz == 0) continue;
        Accum ind, mb, eq, sup;
        const bool eq_ok = bsz * cfg.n <= cfg.equivariant_max_points;
        for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
            std::vector<PointCloud> noises, datas;
            std::vector<std::size_t> shape_of;
            for (std::size_t i = 0; i < bsz; ++i) {
                const std::size_t s = rng.uniform_index(k);
                shape_of.push_back(s);
                datas.push_back(subsample(dense[s], cfg.n, rng).cloud);
                noises.push_back(sample_noise(cfg.n, rng));
            }
            double t = 0.0;
            std::vector<TrainingPair> p_ind = timed(t, [&] {
                std::vector<TrainingPair> p;
                for (std::size_t i = 0; i < bsz; ++i) p.push_back({noises[i], datas[i], {}});
                return p;
            });
            const double c_ind = mean_pair_cost(p_ind);
            ind.cost += c_ind;
            ind.seconds += t;

            auto p_mb = timed(t, [&] { return minibatch_ot_pairs(noises, datas); });
            const double c_mb = mean_pair_cost(p_mb);
            mb.cost += c_mb;
            mb.seconds += t;

            if (eq_ok) {
                auto p_eq = timed(t, [&] { return equivariant_ot_pairs(noises, datas, cfg.equivariant_max_points); });
                const double c_eq = mean_pair_cost(p_eq);
                eq.cost += c_eq;
                eq.seconds += t;
                ++eq.batches;
                const double slack = 1e-12 * c_ind;
                report.ordering_held = report.ordering_held && c_eq <= c_mb + slack && c_mb <= c_ind + slack;
                ++report.ordering_batches;
            } else {
                report.ordering_held = report.ordering_held && c_mb <= c_ind * (1.0 + 1e-12);
            }

            // Same shapes, pairs drawn from the precomputed couplings.
            auto p_sup = timed(t, [&] {
                std::vector<TrainingPair> p;
                for (std::size_t i = 0; i < bsz; ++i) p.push_back(sample_coupled_pair(couplings[shape_of[i]], cfg.n, rng));
                return p;
            });
            sup.cost += mean_pair_cost(p_sup);
            sup.seconds += t;
        }
        const double tr = static_cast<double>(cfg.trials);
        const double base = ind.cost / tr;
        auto row = [&](const std::string& name, const Accum& a, double batches, std::string note) {
            BenchRow r{name, bsz, cfg.n, a.cost / batches, 0.0, a.seconds / batches, std::move(note)};
            r.reduction_pct = 100.0 * (1.0 - r.mean_cost / base);
            report.rows.push_back(r);
        };
        row("independent", ind, tr, "");
        row("minibatch_ot", mb, tr, "");
        if (eq_ok)
            row("equivariant_ot", eq, tr, "");
        else
            report.rows.push_back({"equivariant_ot", bsz, cfg.n, std::nan(""), std::nan(""), std::nan(""),
                                   "skipped: B*N=" + std::to_string(bsz * cfg.n) + " exceeds guard " +
                                       std::to_string(cfg.equivariant_max_points)});
        row("superset", sup, tr, "M=" + std::to_string(cfg.superset_m));
    }
    return report;
}

}  // namespace pcflow
