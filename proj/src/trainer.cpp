#include "pcflow/trainer.hpp"

#include <cmath>
#include <sstream>

#include "pcflow/errors.hpp"

namespace pcflow {

CouplingMode parse_coupling_mode(const std::string& name) {
    if (name == "independent") return CouplingMode::independent;
    if (name == "minibatch_ot") return CouplingMode::minibatch_ot;
    if (name == "equivariant_ot") return CouplingMode::equivariant_ot;
    if (name == "superset") return CouplingMode::superset;
    throw ConfigError("unknown coupling mode \"" + name +
                      "\" (expected independent, minibatch_ot, equivariant_ot or superset)");
}

std::string to_string(CouplingMode mode) {
    switch (mode) {
        case CouplingMode::independent: return "independent";
        case CouplingMode::minibatch_ot: return "minibatch_ot";
        case CouplingMode::equivariant_ot: return "equivariant_ot";
        case CouplingMode::superset: return "superset";
    }
    return "superset";
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train: lr_decay must lie in (0, 1]");
    if (lr_decay_every == 0) throw ConfigError("train: lr_decay_every must be at least 1");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("train: beta must lie in [0, 1]");
    if (total_steps < 1) throw ConfigError("train: total_steps must be at least 1");
    if (batch_size < 1 || n_points < 1) throw ConfigError("train: batch_size and n_points must be at least 1");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("train: ema_decay must lie in [0, 1)");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0))
        throw ConfigError("train: invalid Adam constants");
}

double learning_rate(const TrainConfig& cfg, std::uint64_t step) {
    return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(step / cfg.lr_decay_every));
}

PointCloud interpolate(const PointCloud& x0, const PointCloud& x1, double t) {
    if (x0.size() != x1.size()) throw ArgumentError("interpolate: clouds differ in size");
    if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("interpolate: t must lie in [0, 1]");
    std::vector<double> out(x0.coords().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - t) * x0.coords()[i] + t * x1.coords()[i];
    return PointCloud(std::move(out));
}

PointCloud target_velocity(const PointCloud& x0, const PointCloud& x1) {
    if (x0.size() != x1.size()) throw ArgumentError("target_velocity: clouds differ in size");
    std::vector<double> out(x0.coords().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x1.coords()[i] - x0.coords()[i];
    return PointCloud(std::move(out));
}

void adam_update(std::vector<double>& w, std::span<const double> g, AdamState& s, const TrainConfig& cfg,
                 std::uint64_t step, double lr) {
    if (s.m.size() != w.size()) {
        s.m.assign(w.size(), 0.0);
        s.v.assign(w.size(), 0.0);
    }
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t i = 0; i < w.size(); ++i) {
        s.m[i] = b1 * s.m[i] + (1.0 - b1) * g[i];
        s.v[i] = b2 * s.v[i] + (1.0 - b2) * g[i] * g[i];
        w[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + cfg.adam_eps);
    }
}

TrainState init_train_state(const TrainConfig& cfg, const NetConfig& net_cfg, const EncoderConfig& enc_cfg) {
    cfg.validate();
    NetConfig nc = net_cfg;
    if (cfg.conditional) nc.cond_dim = enc_cfg.latent_dim;
    else if (nc.cond_dim != 0) throw ConfigError("train: cond_dim > 0 requires conditional = true");
    Rng root(cfg.seed);
    Rng init_rng = root.fork(1);
    TrainState s{init_network(nc, init_rng), std::nullopt, {}, {}, root.fork(2)};
    if (cfg.conditional) s.encoder = init_encoder(enc_cfg, init_rng);
    return s;
}

std::vector<TrainingPair> draw_pairs(const TrainConfig& cfg, const TrainingData& data, Rng& rng) {
    const std::size_t k = data.shapes.size();
    if (k == 0) throw ArgumentError("draw_pairs: no shapes");
    const std::size_t b = cfg.batch_size, n = cfg.n_points;
    std::vector<TrainingPair> pairs;
    pairs.reserve(b);
    switch (cfg.coupling) {
        case CouplingMode::independent:
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t s = rng.uniform_index(k);
                PointCloud x1 = subsample(data.shapes[s], n, rng).cloud;
                pairs.push_back(independent_pair(x1, rng));
            }
            break;
        case CouplingMode::superset:
            if (data.couplings.size() != k) throw ArgumentError("draw_pairs: superset mode needs one coupling per shape");
            for (std::size_t i = 0; i < b; ++i) pairs.push_back(sample_coupled_pair(data.couplings[rng.uniform_index(k)], n, rng));
            break;
        case CouplingMode::minibatch_ot:
        case CouplingMode::equivariant_ot: {
            std::vector<PointCloud> noises, datas;
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t s = rng.uniform_index(k);
                datas.push_back(subsample(data.shapes[s], n, rng).cloud);
                noises.push_back(sample_noise(n, rng));
            }
            const std::size_t g = cfg.ot_group_size ? cfg.ot_group_size : b;
            for (std::size_t lo = 0; lo < b; lo += g) {
                const std::size_t len = std::min(g, b - lo);
                const std::span<const PointCloud> ns(noises.data() + lo, len), ds(datas.data() + lo, len);
                auto part = cfg.coupling == CouplingMode::minibatch_ot ? minibatch_ot_pairs(ns, ds)
                                                                       : equivariant_ot_pairs(ns, ds);
                for (auto& p : part) pairs.push_back(std::move(p));
            }
            break;
        }
    }
    return pairs;
}

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace

StepStats train_step(TrainState& state, const TrainConfig& cfg, std::vector<TrainingPair> pairs) {
    if (pairs.empty()) throw ArgumentError("train_step: empty batch");
    const std::size_t b = pairs.size(), n = pairs[0].x0.size();
    const NetConfig& nc = state.net.cfg;
    FlowBatch fb;
    fb.batch = b;
    fb.points = n;
    fb.x.resize(static_cast<Eigen::Index>(b * n), 3);
    fb.target.resize(static_cast<Eigen::Index>(b * n), 3);
    fb.t.resize(b);
    std::vector<PartialObservation> partials;
    if (cfg.conditional) {
        if (!state.encoder) throw ArgumentError("train_step: conditional training without an encoder");
        fb.cond.resize(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(nc.cond_dim));
    }
    const HybridConfig hybrid{cfg.beta};
    for (std::size_t i = 0; i < b; ++i) {
        auto& p = pairs[i];
        if (p.x0.size() != n || p.x1.size() != n) throw ArgumentError("train_step: pairs must share N");
        const double t = state.rng.uniform();
        fb.t[i] = t;
        if (cfg.coupling == CouplingMode::superset) p.x0 = hybrid_perturb(p.x0, hybrid, state.rng);
        for (std::size_t r = 0; r < n; ++r)
            for (int c = 0; c < 3; ++c) {
                const double x0 = p.x0[r][c], x1 = p.x1[r][c];
                fb.x(static_cast<Eigen::Index>(i * n + r), c) = (1.0 - t) * x0 + t * x1;
                fb.target(static_cast<Eigen::Index>(i * n + r), c) = x1 - x0;
            }
        if (cfg.conditional) {
            partials.push_back(make_partial(p.x1, random_crop(p.x1, state.rng), cfg.max_partial, state.rng));
            const auto z = encode_partial(state.encoder->cfg, state.encoder->values, partials.back());
            for (std::size_t k = 0; k < z.size(); ++k)
                fb.cond(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = z[k];
        }
    }

    LossGrads lg = loss_and_grads(nc, state.net.values, fb);
    std::vector<double> enc_grads;
    if (cfg.conditional) {
        enc_grads.assign(state.encoder->values.size(), 0.0);
        for (std::size_t i = 0; i < b; ++i) {
            const auto row = lg.cond_grad.row(static_cast<Eigen::Index>(i));
            std::vector<double> dz(row.data(), row.data() + row.size());
            encode_partial_backward(state.encoder->cfg, state.encoder->values, partials[i], dz, enc_grads);
        }
    }
    const double gnorm = std::sqrt(norm2(lg.grads) + norm2(enc_grads));
    const std::uint64_t step = state.net.step;
    if (!std::isfinite(lg.loss) || !std::isfinite(gnorm)) {
        std::ostringstream msg;
        msg << "train_step: non-finite loss at step " << step << " (loss " << lg.loss << ", grad norm " << gnorm
            << ", t =";
        for (double t : fb.t) msg << ' ' << t;
        msg << ")";
        throw NumericError(msg.str());
    }

    const double lr = learning_rate(cfg, step);
    adam_update(state.net.values, lg.grads, state.adam_net, cfg, step + 1, lr);
    ema_update(state.net, cfg.ema_decay);
    if (cfg.conditional) {
        adam_update(state.encoder->values, enc_grads, state.adam_encoder, cfg, step + 1, lr);
        ema_update(state.encoder->ema, state.encoder->values, cfg.ema_decay);
    }
    state.net.step = step + 1;
    return StepStats{state.net.step, lg.loss, lr, gnorm};
}

void train(TrainState& state, const TrainConfig& cfg, const TrainingData& data, const StepCallback& on_step) {
    cfg.validate();
    while (state.net.step < cfg.total_steps) {
        auto pairs = draw_pairs(cfg, data, state.rng);
        const StepStats st = train_step(state, cfg, std::move(pairs));
        if (on_step) on_step(st, state);
    }
}

}  // namespace pcflow
