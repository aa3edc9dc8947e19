#include "pcflow/partial.hpp"

#include <cmath>

#include "activation.hpp"
#include "pcflow/errors.hpp"

namespace pcflow {

PartialObservation make_partial(const PointCloud& cloud, const CropPlane& crop, std::size_t max_k, Rng& rng) {
    if (max_k == 0) throw ArgumentError("make_partial: max_k must be at least 1");
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto p = cloud[i];
        if (crop.normal[0] * p[0] + crop.normal[1] * p[1] + crop.normal[2] * p[2] >= crop.offset) kept.push_back(i);
    }
    if (kept.empty()) throw ArgumentError("make_partial: crop removes every point");
    PartialObservation obs;
    obs.crop = crop;
    if (kept.size() > max_k) {
        const auto pick = sample_indices(kept.size(), max_k, rng);
        std::vector<std::size_t> rows(max_k);
        for (std::size_t i = 0; i < max_k; ++i) rows[i] = kept[pick[i]];
        obs.points = gather(cloud, rows);
    } else {
        obs.points = gather(cloud, kept);
    }
    return obs;
}

CropPlane random_crop(const PointCloud& cloud, Rng& rng) {
    Point3 n{rng.normal(), rng.normal(), rng.normal()};
    const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    for (double& v : n) v /= len;
    Point3 c{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (int k = 0; k < 3; ++k) c[k] += cloud[i][k];
    double off = 0.0;
    for (int k = 0; k < 3; ++k) off += n[k] * c[k] / static_cast<double>(cloud.size());
    return {n, off};
}

namespace {

using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

struct Offsets {
    std::size_t w1, b1, w2, b2, w3, b3, end;
    explicit Offsets(const EncoderConfig& c) {
        const std::size_t h = c.hidden_width, d = c.latent_dim;
        w1 = 0;
        b1 = w1 + 3 * h;
        w2 = b1 + h;
        b2 = w2 + h * h;
        w3 = b2 + h;
        b3 = w3 + h * d;
        end = b3 + d;
    }
};

struct EncTape {
    RowMat a1, h1, a2, h2, pooled;
};

void check_weights(const EncoderConfig& cfg, std::size_t n) {
    if (n != encoder_parameter_count(cfg)) throw ArgumentError("encoder: weight vector does not match config");
}

RowMat run(const EncoderConfig& cfg, std::span<const double> w, const PartialObservation& obs, EncTape& tp) {
    const Offsets o(cfg);
    const auto h = static_cast<Eigen::Index>(cfg.hidden_width), d = static_cast<Eigen::Index>(cfg.latent_dim);
    const ConstMap p(obs.points.data(), static_cast<Eigen::Index>(obs.points.size()), 3);
    tp.a1.noalias() = p * ConstMap(w.data() + o.w1, 3, h);
    tp.a1.rowwise() += ConstMap(w.data() + o.b1, 1, h).row(0);
    detail::activate(cfg.activation, tp.a1, tp.h1);
    tp.a2.noalias() = tp.h1 * ConstMap(w.data() + o.w2, h, h);
    tp.a2.rowwise() += ConstMap(w.data() + o.b2, 1, h).row(0);
    detail::activate(cfg.activation, tp.a2, tp.h2);
    tp.pooled = tp.h2.colwise().mean();
    RowMat latent = tp.pooled * ConstMap(w.data() + o.w3, h, d);
    latent += ConstMap(w.data() + o.b3, 1, d);
    return latent;
}

}  // namespace

std::size_t encoder_parameter_count(const EncoderConfig& cfg) { return Offsets(cfg).end; }

EncoderParams init_encoder(const EncoderConfig& cfg, Rng& rng) {
    if (cfg.hidden_width < 1 || cfg.latent_dim < 1) throw ConfigError("encoder: dims must be at least 1");
    const Offsets o(cfg);
    EncoderParams p;
    p.cfg = cfg;
    p.values.assign(o.end, 0.0);
    auto fill = [&](std::size_t from, std::size_t to, double fan_in) {
        const double bound = 1.0 / std::sqrt(fan_in);
        for (std::size_t i = from; i < to; ++i) p.values[i] = bound * (2.0 * rng.uniform() - 1.0);
    };
    fill(o.w1, o.w2, 3.0);
    fill(o.w2, o.w3, static_cast<double>(cfg.hidden_width));
    fill(o.w3, o.end, static_cast<double>(cfg.hidden_width));
    p.ema = p.values;
    return p;
}

std::vector<double> encode_partial(const EncoderConfig& cfg, std::span<const double> weights,
                                   const PartialObservation& obs) {
    check_weights(cfg, weights.size());
    if (obs.points.empty()) throw ArgumentError("encode_partial: empty observation");
    EncTape tp;
    const RowMat z = run(cfg, weights, obs, tp);
    return std::vector<double>(z.data(), z.data() + z.size());
}

void encode_partial_backward(const EncoderConfig& cfg, std::span<const double> weights,
                             const PartialObservation& obs, std::span<const double> d_latent,
                             std::span<double> grads) {
    check_weights(cfg, weights.size());
    if (grads.size() != weights.size() || d_latent.size() != cfg.latent_dim)
        throw ArgumentError("encode_partial_backward: size mismatch");
    const Offsets o(cfg);
    const auto h = static_cast<Eigen::Index>(cfg.hidden_width), d = static_cast<Eigen::Index>(cfg.latent_dim);
    const auto k = static_cast<Eigen::Index>(obs.points.size());
    EncTape tp;
    run(cfg, weights, obs, tp);
    const ConstMap dz(d_latent.data(), 1, d);
    Map(grads.data() + o.w3, h, d).noalias() += tp.pooled.transpose() * dz;
    Map(grads.data() + o.b3, 1, d) += dz;
    const RowMat dpool = dz * ConstMap(weights.data() + o.w3, h, d).transpose() / static_cast<double>(k);
    RowMat da2 = dpool.replicate(k, 1);
    detail::activate_backward(cfg.activation, tp.a2, da2);
    Map(grads.data() + o.w2, h, h).noalias() += tp.h1.transpose() * da2;
    Map(grads.data() + o.b2, 1, h) += da2.colwise().sum();
    RowMat da1 = da2 * ConstMap(weights.data() + o.w2, h, h).transpose();
    detail::activate_backward(cfg.activation, tp.a1, da1);
    const ConstMap p(obs.points.data(), k, 3);
    Map(grads.data() + o.w1, 3, h).noalias() += p.transpose() * da1;
    Map(grads.data() + o.b1, 1, h) += da1.colwise().sum();
}

}  // namespace pcflow
