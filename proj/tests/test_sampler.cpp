#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "oracles.hpp"
#include "pcflow/errors.hpp"
#include "pcflow/metrics.hpp"
#include "pcflow/partial.hpp"
#include "pcflow/sampler.hpp"
#include "pcflow/shapes.hpp"
#include "pcflow/trainer.hpp"

using namespace pcflow;

namespace {

NetConfig tiny_net() {
    NetConfig c;
    c.hidden_width = 8;
    c.depth = 1;
    c.time_embed_dim = 4;
    return c;
}

/// Network whose only nonzero output path is the bias: v(x, t) = c.
std::vector<double> constant_field(const NetConfig& cfg, Rng& rng, Point3 c) {
    VectorFieldParams p = init_network(cfg, rng);
    for (const auto& s : p.shapes)
        if (s.name == "out.b")
            for (int k = 0; k < 3; ++k) p.values[s.offset + k] = c[k];
    return p.values;
}

}  // namespace

TEST_CASE("euler integrates a constant field exactly") {
    Rng rng(1);
    const NetConfig cfg = tiny_net();
    const auto w = constant_field(cfg, rng, {1.0, -2.0, 0.5});
    const FlowModel m{cfg, w};
    const PointCloud x0 = sample_noise(12, rng);
    for (std::size_t steps : {1, 4, 10}) {
        const SampleResult r = euler_sample(m, x0, steps);
        CHECK(r.traj.size() == steps);
        for (std::size_t k = 0; k < steps; ++k) CHECK(r.traj.t[k] == doctest::Approx(static_cast<double>(k) / steps));
        CHECK(r.traj.x[0] == x0);
        for (std::size_t i = 0; i < 12; ++i) {
            CHECK(r.final[i][0] == doctest::Approx(x0[i][0] + 1.0).epsilon(1e-12));
            CHECK(r.final[i][1] == doctest::Approx(x0[i][1] - 2.0).epsilon(1e-12));
            CHECK(r.final[i][2] == doctest::Approx(x0[i][2] + 0.5).epsilon(1e-12));
        }
        if (steps > 1) {
            const CurvatureResult c = trajectory_curvature(r.traj);
            CHECK(c.per_step.size() == steps - 1);
            CHECK(c.max == doctest::Approx(0.0));
        }
    }
    CHECK_THROWS_AS(euler_sample(m, x0, 0), ArgumentError);
}

TEST_CASE("denormalization applies to the final cloud only") {
    Rng rng(2);
    const NetConfig cfg = tiny_net();
    const auto w = constant_field(cfg, rng, {0.0, 0.0, 0.0});
    const PointCloud x0 = sample_noise(5, rng);
    const NormalizationStats st{{1.0, 2.0, 3.0}, 2.0};
    const SampleResult r = euler_sample({cfg, w}, x0, 3, {}, true, &st);
    CHECK(r.traj.x.back() == x0);
    for (std::size_t i = 0; i < 5; ++i) CHECK(r.final[i][1] == doctest::Approx(2.0 * x0[i][1] + 2.0));
}

TEST_CASE("batched sampling equals one-at-a-time sampling") {
    Rng rng(3);
    const NetConfig cfg = tiny_net();
    VectorFieldParams p = init_network(cfg, rng);
    for (double& v : p.values) v += 0.2 * rng.normal();
    const FlowModel m{cfg, p.values};
    std::vector<PointCloud> starts{sample_noise(20, rng), sample_noise(20, rng), sample_noise(20, rng)};
    const auto batch = euler_sample_batch(m, starts, 7);
    for (std::size_t i = 0; i < 3; ++i) {
        const SampleResult one = euler_sample(m, starts[i], 7);
        for (std::size_t k = 0; k < 60; ++k)
            CHECK(one.final.coords()[k] == doctest::Approx(batch[i].final.coords()[k]).epsilon(1e-12));
    }
    Rng a(9), b(9);
    CHECK(generate_set(m, 40, 16, 3, a) == generate_set(m, 40, 16, 3, b));
}

TEST_CASE("trajectory dump round trip") {
    Rng rng(4);
    const NetConfig cfg = tiny_net();
    VectorFieldParams p = init_network(cfg, rng);
    for (double& v : p.values) v += 0.2 * rng.normal();
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 2; ++i) trajs.push_back(euler_sample({cfg, p.values}, sample_noise(9, rng), 5).traj);
    const auto path = std::filesystem::temp_directory_path() / "pcflow_test.traj";
    write_trajectories(path, trajs);
    const auto back = read_trajectories(path);
    REQUIRE(back.size() == 2);
    CHECK(back[1].size() == 5);
    CHECK(back[1].v[3].coords()[7] == static_cast<double>(static_cast<float>(trajs[1].v[3].coords()[7])));
    std::filesystem::resize_file(path, 30);
    CHECK_THROWS_AS(read_trajectories(path), IoError);
    std::filesystem::remove(path);
}

TEST_CASE("half-space crops") {
    Rng rng(5);
    const PointCloud c = generate_shape(ShapeKind::sphere, 2000, rng);
    const PartialObservation o = make_partial(c, {{0.0, 0.0, 1.0}, 0.0}, 5000, rng);
    for (std::size_t i = 0; i < o.points.size(); ++i) CHECK(o.points[i][2] >= 0.0);
    CHECK(std::abs(static_cast<double>(o.points.size()) - 1000.0) < 100.0);
    CHECK(make_partial(c, {{0.0, 0.0, 1.0}, 0.0}, 50, rng).points.size() == 50);
    CHECK_THROWS_AS(make_partial(c, {{0.0, 0.0, 1.0}, 2.0}, 50, rng), ArgumentError);
    const CropPlane p = random_crop(c, rng);
    CHECK(std::hypot(p.normal[0], p.normal[1], p.normal[2]) == doctest::Approx(1.0));
}

TEST_CASE("encoder is permutation invariant with exact gradients") {
    Rng rng(6);
    EncoderConfig cfg;
    cfg.hidden_width = 6;
    cfg.latent_dim = 4;
    EncoderParams e = init_encoder(cfg, rng);
    CHECK(e.values.size() == encoder_parameter_count(cfg));
    CHECK(encoder_parameter_count(cfg) == 3 * 6 + 6 + 36 + 6 + 24 + 4);
    PartialObservation obs{sample_noise(7, rng), {}};
    const auto z = encode_partial(cfg, e.values, obs);
    PartialObservation rev{gather(obs.points, std::vector<std::size_t>{6, 5, 4, 3, 2, 1, 0}), {}};
    const auto zr = encode_partial(cfg, e.values, rev);
    for (std::size_t k = 0; k < 4; ++k) CHECK(z[k] == doctest::Approx(zr[k]).epsilon(1e-12));

    // loss = sum_k c_k z_k
    const std::vector<double> c{0.3, -1.0, 2.0, 0.7};
    std::vector<double> g(e.values.size(), 0.0);
    encode_partial_backward(cfg, e.values, obs, c, g);
    auto loss = [&](const std::vector<double>& w) {
        const auto zz = encode_partial(cfg, w, obs);
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += c[k] * zz[k];
        return s;
    };
    double worst = 0.0;
    for (std::size_t k = 0; k < e.values.size(); ++k) {
        auto wp = e.values, wm = e.values;
        wp[k] += 1e-6;
        wm[k] -= 1e-6;
        worst = std::max(worst, oracle::rel_err((loss(wp) - loss(wm)) / 2e-6, g[k]));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("an empty set request returns no clouds") {
    Rng rng(8);
    const NetConfig cfg = tiny_net();
    const VectorFieldParams p = init_network(cfg, rng);
    CHECK(generate_set(FlowModel{cfg, p.values}, 0, 16, 10, rng).empty());
}

TEST_CASE("permuting the start permutes the result") {
    Rng rng(9);
    NetConfig cfg = tiny_net();
    cfg.hidden_width = 16;
    VectorFieldParams p = init_network(cfg, rng);
    for (double& v : p.values) v += 0.2 * rng.normal();
    const FlowModel m{cfg, p.values};
    const PointCloud x0 = sample_noise(20, rng);
    std::vector<std::size_t> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.begin() + 13);
    std::swap(perm[2], perm[17]);
    std::vector<double> shuffled;
    for (std::size_t i : perm) shuffled.insert(shuffled.end(), x0[i].begin(), x0[i].end());
    const PointCloud a = euler_sample(m, x0, 12, {}, false).final;
    const PointCloud b = euler_sample(m, PointCloud(shuffled), 12, {}, false).final;
    for (std::size_t i = 0; i < 20; ++i)
        for (int k = 0; k < 3; ++k) CHECK(b[i][k] == doctest::Approx(a[perm[i]][k]).epsilon(1e-12));
}

TEST_CASE("a field overfit to one pair transports it") {
    Rng rng(4);
    TrainConfig tc;
    tc.coupling = CouplingMode::independent;
    tc.n_points = 8;
    tc.lr = 3e-3;
    tc.ema_decay = 0.99;
    tc.seed = 11;
    NetConfig nc;
    nc.hidden_width = 32;
    nc.depth = 2;
    nc.time_embed_dim = 8;
    TrainState s = init_train_state(tc, nc);
    const TrainingPair pair{sample_noise(8, rng), generate_shape(ShapeKind::sphere, 8, rng), {}};
    for (int i = 0; i < 10000; ++i) train_step(s, tc, {pair});
    const FlowModel m{nc, s.net.ema};
    CHECK(chamfer(euler_sample(m, pair.x0, 100, {}, false).final, pair.x1) < 1e-3);

    // Euler refinement: successive doublings move the endpoint less.
    std::vector<double> gaps;
    for (std::size_t t : {5, 10, 20, 40, 80})
        gaps.push_back(chamfer(euler_sample(m, pair.x0, t, {}, false).final, euler_sample(m, pair.x0, 2 * t, {}, false).final));
    int shrinking = 0;
    for (std::size_t i = 0; i + 1 < gaps.size(); ++i) shrinking += gaps[i + 1] < gaps[i];
    CHECK(shrinking >= 3);
}
