#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pcflow/errors.hpp"
#include "pcflow/flow_net.hpp"

using namespace pcflow;

namespace {

NetConfig small_net(std::size_t cond = 0) {
    NetConfig c;
    c.hidden_width = 8;
    c.depth = 2;
    c.time_embed_dim = 4;
    c.cond_dim = cond;
    return c;
}

std::vector<double> perturbed(const VectorFieldParams& p, Rng& rng, double scale) {
    std::vector<double> w(p.values);
    for (double& v : w) v += scale * rng.normal();
    return w;
}

FlowBatch random_batch(const NetConfig& cfg, std::size_t b, std::size_t n, Rng& rng) {
    FlowBatch fb;
    fb.batch = b;
    fb.points = n;
    fb.x.resize(b * n, 3);
    fb.target.resize(b * n, 3);
    for (Eigen::Index i = 0; i < fb.x.size(); ++i) {
        fb.x.data()[i] = rng.normal();
        fb.target.data()[i] = rng.normal();
    }
    for (std::size_t i = 0; i < b; ++i) fb.t.push_back(rng.uniform());
    fb.cond.resize(b, cfg.cond_dim);
    for (Eigen::Index i = 0; i < fb.cond.size(); ++i) fb.cond.data()[i] = rng.normal();
    return fb;
}

}  // namespace

TEST_CASE("parameter count formula") {
    const NetConfig c = small_net();
    const std::size_t h = 8, e = 4, l = 2;
    CHECK(parameter_count(c) == (3 + e + 1) * h + l * (2 * h + e + 1) * h + 3 * h + 3);
    std::size_t total = 0;
    for (const auto& s : layer_shapes(c)) {
        CHECK(s.offset == total);
        total += s.rows * s.cols;
    }
    CHECK(total == parameter_count(c));
    NetConfig odd = c;
    odd.time_embed_dim = 5;
    CHECK_THROWS_AS(odd.validate(), ConfigError);
}

TEST_CASE("zero output head gives a zero field at init") {
    Rng rng(1);
    const VectorFieldParams p = init_network(small_net(), rng);
    CHECK(p.ema == p.values);
    const PointCloud v = forward(p, sample_noise(20, rng), 0.3);
    for (double x : v.coords()) CHECK(x == 0.0);
}

TEST_CASE("field is permutation equivariant and duplication invariant") {
    Rng rng(2);
    const NetConfig cfg = small_net(3);
    const VectorFieldParams p = init_network(cfg, rng);
    const std::vector<double> w = perturbed(p, rng, 0.3);
    const PointCloud x = sample_noise(15, rng);
    const std::vector<double> cond{0.5, -1.0, 2.0};
    const PointCloud v = forward(cfg, w, x, 0.7, cond);

    std::vector<std::size_t> perm(15);
    for (std::size_t i = 0; i < 15; ++i) perm[i] = (i * 7 + 3) % 15;
    const PointCloud vp = forward(cfg, w, gather(x, perm), 0.7, cond);
    for (std::size_t i = 0; i < 15; ++i)
        for (int k = 0; k < 3; ++k) CHECK(vp[i][k] == doctest::Approx(v[perm[i]][k]).epsilon(1e-12));

    std::vector<double> twice(x.coords());
    twice.insert(twice.end(), x.coords().begin(), x.coords().end());
    const PointCloud vd = forward(cfg, w, PointCloud(twice), 0.7, cond);
    for (std::size_t i = 0; i < 30; ++i)
        for (int k = 0; k < 3; ++k) CHECK(vd[i][k] == doctest::Approx(v[i % 15][k]).epsilon(1e-12));
}

TEST_CASE("batched forward matches per-cloud forward") {
    Rng rng(3);
    const NetConfig cfg = small_net(2);
    const VectorFieldParams p = init_network(cfg, rng);
    const std::vector<double> w = perturbed(p, rng, 0.3);
    const FlowBatch fb = random_batch(cfg, 3, 10, rng);
    const RowMat v = forward_batch(cfg, w, fb);
    for (std::size_t b = 0; b < 3; ++b) {
        std::vector<double> xs(fb.x.data() + b * 30, fb.x.data() + (b + 1) * 30);
        const std::vector<double> c(fb.cond.data() + 2 * b, fb.cond.data() + 2 * b + 2);
        const PointCloud one = forward(cfg, w, PointCloud(xs), fb.t[b], c);
        for (std::size_t i = 0; i < 30; ++i) CHECK(one.coords()[i] == doctest::Approx(v.data()[b * 30 + i]).epsilon(1e-12));
    }
}

TEST_CASE("loss gradients match central differences") {
    Rng rng(4);
    for (Activation act : {Activation::silu, Activation::tanh, Activation::softplus}) {
        NetConfig cfg = small_net(2);
        cfg.activation = act;
        const VectorFieldParams p = init_network(cfg, rng);
        std::vector<double> w = perturbed(p, rng, 0.2);
        const FlowBatch fb = random_batch(cfg, 2, 6, rng);
        const LossGrads lg = loss_and_grads(cfg, w, fb);
        const double h = 1e-5;
        double worst = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double keep = w[k];
            w[k] = keep + h;
            const double lp = loss_and_grads(cfg, w, fb).loss;
            w[k] = keep - h;
            const double lm = loss_and_grads(cfg, w, fb).loss;
            w[k] = keep;
            worst = std::max(worst, oracle::rel_err((lp - lm) / (2 * h), lg.grads[k]));
        }
        CHECK(worst < 1e-4);

        FlowBatch fc = fb;
        for (Eigen::Index k = 0; k < fc.cond.size(); ++k) {
            const double keep = fc.cond.data()[k];
            fc.cond.data()[k] = keep + h;
            const double lp = loss_and_grads(cfg, w, fc).loss;
            fc.cond.data()[k] = keep - h;
            const double lm = loss_and_grads(cfg, w, fc).loss;
            fc.cond.data()[k] = keep;
            CHECK(oracle::rel_err((lp - lm) / (2 * h), lg.cond_grad.data()[k]) < 1e-4);
        }
    }
}

TEST_CASE("time embedding layout") {
    std::vector<double> e(6);
    time_embedding(0.0, e);
    CHECK(e == std::vector<double>{0, 0, 0, 1, 1, 1});
    time_embedding(0.5, e);
    CHECK(e[0] == doctest::Approx(std::sin(0.5)));
    CHECK(e[2] == doctest::Approx(std::sin(50.0)));
    CHECK(e[4] == doctest::Approx(std::cos(5.0)));
}

TEST_CASE("ema update") {
    std::vector<double> shadow{1.0, 2.0};
    const std::vector<double> values{3.0, 4.0};
    ema_update(shadow, values, 0.75);
    CHECK(shadow[0] == doctest::Approx(1.5));
    CHECK(shadow[1] == doctest::Approx(2.5));
    ema_update(shadow, values, 0.0);
    CHECK(shadow == values);
}

TEST_CASE("non-finite input raises a numeric error") {
    Rng rng(5);
    const NetConfig cfg = small_net();
    const VectorFieldParams p = init_network(cfg, rng);
    std::vector<double> w = perturbed(p, rng, 0.1);
    w[0] = 1e308;
    w[1] = 1e308;
    CHECK_THROWS_AS(forward(cfg, w, PointCloud(std::vector<double>{1e10, 1e10, 1e10}), 0.5), NumericError);
}
