#include "pcflow/flow_net.hpp"

#include <cmath>

#include "activation.hpp"
#include "pcflow/errors.hpp"

namespace pcflow {

namespace {

using detail::activate;
using detail::activate_backward;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

// Views into a flat weight vector, following layer_shapes().
template <class M, class Ptr>
struct Layout {
    struct Block {
        M wh, wg, wz, b;
    };
    M in_w, in_wz, in_b;
    std::vector<Block> blocks;
    M out_w, out_b;

    Layout(const NetConfig& cfg, Ptr base)
        : in_w(nullptr, 0, 0), in_wz(nullptr, 0, 0), in_b(nullptr, 0, 0), out_w(nullptr, 0, 0), out_b(nullptr, 0, 0) {
        const auto shapes = layer_shapes(cfg);
        auto view = [&](std::size_t k, M& m) {
            new (&m) M(base + shapes[k].offset, static_cast<Eigen::Index>(shapes[k].rows),
                       static_cast<Eigen::Index>(shapes[k].cols));
        };
        view(0, in_w);
        view(1, in_wz);
        view(2, in_b);
        std::size_t k = 3;
        for (std::size_t l = 0; l < cfg.depth; ++l) {
            blocks.push_back(Block{M(nullptr, 0, 0), M(nullptr, 0, 0), M(nullptr, 0, 0), M(nullptr, 0, 0)});
            view(k++, blocks.back().wh);
            view(k++, blocks.back().wg);
            view(k++, blocks.back().wz);
            view(k++, blocks.back().b);
        }
        view(k++, out_w);
        view(k, out_b);
    }
};

using Weights = Layout<ConstMap, const double*>;
using Grads = Layout<Map, double*>;

// rows [b*n, (b+1)*n) += p.row(b)
void add_broadcast(RowMat& m, const RowMat& p, std::size_t n) {
    for (Eigen::Index b = 0; b < p.rows(); ++b)
        m.middleRows(b * static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)).rowwise() += p.row(b);
}

RowMat segment_sum(const RowMat& m, std::size_t batch, std::size_t n) {
    RowMat out(static_cast<Eigen::Index>(batch), m.cols());
    for (std::size_t b = 0; b < batch; ++b)
        out.row(static_cast<Eigen::Index>(b)) =
            m.middleRows(static_cast<Eigen::Index>(b * n), static_cast<Eigen::Index>(n)).colwise().sum();
    return out;
}

void check_finite(const RowMat& m, std::size_t layer) {
    if (!m.allFinite()) throw NumericError("flow_net: non-finite activation in layer " + std::to_string(layer));
}

struct Tape {
    RowMat z;                  // B x (E+C)
    RowMat a0, h0;             // input layer
    std::vector<RowMat> a, h;  // per block pre-activation and output
    std::vector<RowMat> g;     // per block pooled input
    RowMat v;
};

void check_batch(const NetConfig& cfg, const FlowBatch& b, std::size_t nweights, bool need_target) {
    if (b.batch == 0 || b.points == 0) throw ArgumentError("flow_net: empty batch");
    if (nweights != parameter_count(cfg)) throw ArgumentError("flow_net: weight vector does not match config");
    if (b.x.rows() != static_cast<Eigen::Index>(b.batch * b.points) || b.x.cols() != 3)
        throw ArgumentError("flow_net: x must be (batch*points) x 3");
    if (b.t.size() != b.batch) throw ArgumentError("flow_net: need one t per batch element");
    if (cfg.cond_dim > 0 &&
        (b.cond.rows() != static_cast<Eigen::Index>(b.batch) || b.cond.cols() != static_cast<Eigen::Index>(cfg.cond_dim)))
        throw ArgumentError("flow_net: cond must be batch x " + std::to_string(cfg.cond_dim));
    if (cfg.cond_dim == 0 && b.cond.size() != 0) throw ArgumentError("flow_net: unconditional net given a cond");
    if (need_target && (b.target.rows() != b.x.rows() || b.target.cols() != 3))
        throw ArgumentError("flow_net: target shape does not match x");
}

void run_forward(const NetConfig& cfg, const Weights& w, const FlowBatch& b, Tape& tp) {
    const std::size_t e = cfg.time_embed_dim, c = cfg.cond_dim;
    tp.z.resize(static_cast<Eigen::Index>(b.batch), static_cast<Eigen::Index>(e + c));
    std::vector<double> emb(e);
    for (std::size_t i = 0; i < b.batch; ++i) {
        time_embedding(b.t[i], emb);
        for (std::size_t k = 0; k < e; ++k) tp.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = emb[k];
        for (std::size_t k = 0; k < c; ++k)
            tp.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e + k)) =
                b.cond(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    const double inv_n = 1.0 / static_cast<double>(b.points);

    tp.a0.noalias() = b.x * w.in_w;
    RowMat p = tp.z * w.in_wz;
    p.rowwise() += w.in_b.row(0);
    add_broadcast(tp.a0, p, b.points);
    activate(cfg.activation, tp.a0, tp.h0);
    check_finite(tp.h0, 0);

    tp.a.resize(cfg.depth);
    tp.h.resize(cfg.depth);
    tp.g.resize(cfg.depth);
    const RowMat* prev = &tp.h0;
    for (std::size_t l = 0; l < cfg.depth; ++l) {
        const auto& blk = w.blocks[l];
        tp.g[l] = segment_sum(*prev, b.batch, b.points) * inv_n;
        RowMat q = tp.g[l] * blk.wg;
        q.noalias() += tp.z * blk.wz;
        q.rowwise() += blk.b.row(0);
        tp.a[l].noalias() = *prev * blk.wh;
        add_broadcast(tp.a[l], q, b.points);
        activate(cfg.activation, tp.a[l], tp.h[l]);
        tp.h[l] += *prev;
        check_finite(tp.h[l], l + 1);
        prev = &tp.h[l];
    }
    tp.v.noalias() = *prev * w.out_w;
    tp.v.rowwise() += w.out_b.row(0);
    check_finite(tp.v, cfg.depth + 1);
}

}  // namespace

Activation parse_activation(const std::string& name) {
    if (name == "silu") return Activation::silu;
    if (name == "tanh") return Activation::tanh;
    if (name == "softplus") return Activation::softplus;
    throw ConfigError("unknown activation \"" + name + "\" (expected silu, tanh or softplus)");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::silu: return "silu";
        case Activation::tanh: return "tanh";
        case Activation::softplus: return "softplus";
    }
    return "silu";
}

void NetConfig::validate() const {
    if (hidden_width < 1 || depth < 1) throw ConfigError("net: hidden_width and depth must be at least 1");
    if (time_embed_dim < 2 || time_embed_dim % 2 != 0) throw ConfigError("net: time_embed_dim must be even and >= 2");
}

std::vector<TensorShape> layer_shapes(const NetConfig& cfg) {
    const std::size_t h = cfg.hidden_width, z = cfg.time_embed_dim + cfg.cond_dim;
    std::vector<TensorShape> s;
    std::size_t off = 0;
    auto add = [&](std::string name, std::size_t r, std::size_t c) {
        s.push_back({std::move(name), r, c, off});
        off += r * c;
    };
    add("in.w", 3, h);
    add("in.wz", z, h);
    add("in.b", 1, h);
    for (std::size_t l = 0; l < cfg.depth; ++l) {
        const std::string p = "block" + std::to_string(l);
        add(p + ".wh", h, h);
        add(p + ".wg", h, h);
        add(p + ".wz", z, h);
        add(p + ".b", 1, h);
    }
    add("out.w", h, 3);
    add("out.b", 1, 3);
    return s;
}

std::size_t parameter_count(const NetConfig& cfg) {
    const std::size_t h = cfg.hidden_width, z = cfg.time_embed_dim + cfg.cond_dim;
    return (3 + z + 1) * h + cfg.depth * (2 * h + z + 1) * h + 3 * h + 3;
}

VectorFieldParams init_network(const NetConfig& cfg, Rng& rng) {
    cfg.validate();
    VectorFieldParams p;
    p.cfg = cfg;
    p.shapes = layer_shapes(cfg);
    p.values.assign(parameter_count(cfg), 0.0);
    const std::size_t h = cfg.hidden_width, z = cfg.time_embed_dim + cfg.cond_dim;
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(3 + z));
    const double blk_bound = 1.0 / std::sqrt(static_cast<double>(2 * h + z));
    for (const auto& s : p.shapes) {
        if (s.name.rfind("out.", 0) == 0) continue;
        const double bound = s.name.rfind("in.", 0) == 0 ? in_bound : blk_bound;
        for (std::size_t i = 0; i < s.rows * s.cols; ++i) p.values[s.offset + i] = bound * (2.0 * rng.uniform() - 1.0);
    }
    p.ema = p.values;
    return p;
}

void time_embedding(double t, std::span<double> out) {
    const std::size_t half = out.size() / 2;
    for (std::size_t k = 0; k < half; ++k) {
        const double f = half > 1 ? std::pow(100.0, static_cast<double>(k) / static_cast<double>(half - 1)) : 1.0;
        out[k] = std::sin(f * t);
        out[half + k] = std::cos(f * t);
    }
}

RowMat forward_batch(const NetConfig& cfg, std::span<const double> weights, const FlowBatch& batch) {
    check_batch(cfg, batch, weights.size(), false);
    const Weights w(cfg, weights.data());
    Tape tp;
    run_forward(cfg, w, batch, tp);
    return std::move(tp.v);
}

PointCloud forward(const NetConfig& cfg, std::span<const double> weights, const PointCloud& x, double t,
                   std::span<const double> cond) {
    FlowBatch b;
    b.batch = 1;
    b.points = x.size();
    b.x = ConstMap(x.data(), static_cast<Eigen::Index>(x.size()), 3);
    b.t = {t};
    if (!cond.empty()) b.cond = ConstMap(cond.data(), 1, static_cast<Eigen::Index>(cond.size()));
    const RowMat v = forward_batch(cfg, weights, b);
    PointCloud out = PointCloud::zeros(x.size());
    std::copy(v.data(), v.data() + v.size(), out.data());
    return out;
}

PointCloud forward(const VectorFieldParams& params, const PointCloud& x, double t, std::span<const double> cond) {
    return forward(params.cfg, params.values, x, t, cond);
}

LossGrads loss_and_grads(const NetConfig& cfg, std::span<const double> weights, const FlowBatch& batch) {
    check_batch(cfg, batch, weights.size(), true);
    const Weights w(cfg, weights.data());
    Tape tp;
    run_forward(cfg, w, batch, tp);

    LossGrads out;
    out.grads.assign(weights.size(), 0.0);
    Grads g(cfg, out.grads.data());
    const double denom = static_cast<double>(batch.batch * batch.points * 3);
    RowMat dv = tp.v - batch.target;
    out.loss = dv.squaredNorm() / denom;
    dv *= 2.0 / denom;

    const RowMat& h_last = cfg.depth ? tp.h.back() : tp.h0;
    g.out_w.noalias() = h_last.transpose() * dv;
    g.out_b = dv.colwise().sum();
    RowMat dh = dv * w.out_w.transpose();
    RowMat dz = RowMat::Zero(tp.z.rows(), tp.z.cols());
    const double inv_n = 1.0 / static_cast<double>(batch.points);

    for (std::size_t l = cfg.depth; l-- > 0;) {
        const auto& blk = w.blocks[l];
        auto& gb = g.blocks[l];
        const RowMat& prev = l ? tp.h[l - 1] : tp.h0;
        RowMat da = dh;
        activate_backward(cfg.activation, tp.a[l], da);
        gb.wh.noalias() = prev.transpose() * da;
        const RowMat dq = segment_sum(da, batch.batch, batch.points);
        gb.wg.noalias() = tp.g[l].transpose() * dq;
        gb.wz.noalias() = tp.z.transpose() * dq;
        gb.b = dq.colwise().sum();
        dz.noalias() += dq * blk.wz.transpose();
        const RowMat dg = (dq * blk.wg.transpose()) * inv_n;
        dh.noalias() += da * blk.wh.transpose();
        add_broadcast(dh, dg, batch.points);
    }
    RowMat da0 = dh;
    activate_backward(cfg.activation, tp.a0, da0);
    g.in_w.noalias() = batch.x.transpose() * da0;
    const RowMat dp = segment_sum(da0, batch.batch, batch.points);
    g.in_wz.noalias() = tp.z.transpose() * dp;
    g.in_b = dp.colwise().sum();
    dz.noalias() += dp * w.in_wz.transpose();
    out.cond_grad = dz.rightCols(static_cast<Eigen::Index>(cfg.cond_dim));
    return out;
}

void ema_update(std::vector<double>& shadow, std::span<const double> values, double decay) {
    if (!(decay >= 0.0 && decay < 1.0)) throw ArgumentError("ema_update: decay must lie in [0, 1)");
    if (shadow.size() != values.size()) throw ArgumentError("ema_update: size mismatch");
    for (std::size_t i = 0; i < shadow.size(); ++i) shadow[i] = decay * shadow[i] + (1.0 - decay) * values[i];
}

void ema_update(VectorFieldParams& params, double decay) { ema_update(params.ema, params.values, decay); }

}  // namespace pcflow
