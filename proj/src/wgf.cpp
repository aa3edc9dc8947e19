#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pcflow/errors.hpp"
#include "pcflow/ot.hpp"

namespace pcflow {

namespace {

struct BlockFlow {
    std::vector<double> history;
    bool converged = true;
};

BlockFlow flow_block(PointCloud& x, const PointCloud& target, const WgfConfig& cfg) {
    // Resolve epsilon once, from the target alone, so the warm potentials stay
    // valid as x moves and outlying noise does not blur the shape.
    SinkhornConfig sk = cfg.sinkhorn;
    if (sk.relative_to_diameter) {
        const double d2 = squared_diameter(target, target);
        sk.epsilon_start *= d2;
        sk.epsilon_end *= d2;
        sk.relative_to_diameter = false;
    }
    SinkhornWarmState warm;
    BlockFlow out;
    SinkhornResult r = sinkhorn_divergence(x, target, sk, &warm);
    out.converged = r.converged;
    out.history.push_back(r.value);
    const double s0 = r.value;
    if (s0 <= 0.0) return out;

    const double lr = cfg.step * static_cast<double>(x.size());
    std::size_t rises = 0;
    for (std::size_t it = 0; it < cfg.iters; ++it) {
        double* p = x.data();
        for (std::size_t i = 0; i < r.grad_a.size(); ++i) p[i] -= lr * r.grad_a[i];
        const double prev = r.value;
        r = sinkhorn_divergence(x, target, sk, &warm);
        out.converged = out.converged && r.converged;
        out.history.push_back(r.value);
        rises = r.value > prev ? rises + 1 : 0;
        if (rises >= cfg.patience) {
            std::ostringstream msg;
            msg << "wasserstein_gradient_flow: divergence rose for " << rises << " consecutive iterations (iteration "
                << it + 1 << ", value " << r.value << ", initial " << s0 << "); reduce the step";
            throw NumericError(msg.str());
        }
        if (r.value <= cfg.stop_ratio * s0) break;
    }
    return out;
}

}  // namespace

WgfResult wasserstein_gradient_flow(const Superset& noise, const Superset& target, const WgfConfig& cfg) {
    if (noise.m() != target.m())
        throw ArgumentError("wasserstein_gradient_flow: superset sizes differ (" + std::to_string(noise.m()) +
                            " vs " + std::to_string(target.m()) + ")");
    if (cfg.iters < 1) throw ArgumentError("wasserstein_gradient_flow: iters must be at least 1");
    if (!(cfg.step > 0.0)) throw ArgumentError("wasserstein_gradient_flow: step must be positive");
    if (cfg.block_size < 1) throw ArgumentError("wasserstein_gradient_flow: block_size must be at least 1");
    cfg.sinkhorn.validate();

    const std::size_t m = noise.m();
    WgfResult res;
    res.deformed = Superset{noise.points, SupersetKind::data};

    if (m <= cfg.block_size) {
        BlockFlow f = flow_block(res.deformed.points, target.points, cfg);
        res.history = std::move(f.history);
        res.converged = f.converged;
        return res;
    }

    // Random equal partitions of both supersets; block b of the noise flows
    // onto block b of the target.
    Rng rng(cfg.seed);
    const auto src_order = sample_indices(m, m, rng);
    const auto dst_order = sample_indices(m, m, rng);
    const std::size_t nblocks = (m + cfg.block_size - 1) / cfg.block_size;
    std::vector<std::vector<double>> histories;
    for (std::size_t b = 0; b < nblocks; ++b) {
        const std::size_t lo = b * m / nblocks, hi = (b + 1) * m / nblocks;
        const std::span<const std::size_t> src(src_order.data() + lo, hi - lo);
        const std::span<const std::size_t> dst(dst_order.data() + lo, hi - lo);
        PointCloud x = gather(noise.points, src);
        const PointCloud y = gather(target.points, dst);
        BlockFlow f = flow_block(x, y, cfg);
        res.converged = res.converged && f.converged;
        histories.push_back(std::move(f.history));
        for (std::size_t i = 0; i < src.size(); ++i)
            std::copy_n(x[i].data(), 3, res.deformed.points[src[i]].data());
    }

    // Mean over blocks; blocks that stopped early hold their last value.
    std::size_t len = 0;
    for (const auto& h : histories) len = std::max(len, h.size());
    res.history.assign(len, 0.0);
    for (const auto& h : histories)
        for (std::size_t i = 0; i < len; ++i) res.history[i] += h[std::min(i, h.size() - 1)];
    for (double& v : res.history) v /= static_cast<double>(histories.size());
    return res;
}

}  // namespace pcflow
