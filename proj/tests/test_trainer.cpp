#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "pcflow/checkpoint.hpp"
#include "pcflow/errors.hpp"
#include "pcflow/trainer.hpp"

using namespace pcflow;

namespace {

NetConfig tiny_net() {
    NetConfig c;
    c.hidden_width = 16;
    c.depth = 2;
    c.time_embed_dim = 8;
    return c;
}

TrainingData toy_data(Rng& rng, bool couplings) {
    TrainingData d;
    for (ShapeKind k : {ShapeKind::sphere, ShapeKind::torus}) {
        d.shapes.push_back({generate_shape(k, 128, rng), SupersetKind::data});
        if (couplings) d.couplings.push_back(precompute_superset_coupling(d.shapes.back(), {}, rng, to_string(k)));
    }
    return d;
}

TrainConfig toy_cfg(CouplingMode mode) {
    TrainConfig c;
    c.coupling = mode;
    c.batch_size = 4;
    c.n_points = 32;
    c.total_steps = 30;
    c.lr = 1e-3;
    c.ema_decay = 0.9;
    c.seed = 11;
    return c;
}

std::vector<double> run_losses(const TrainConfig& cfg, const TrainingData& data, TrainState& s) {
    std::vector<double> out;
    train(s, cfg, data, [&](const StepStats& st, const TrainState&) { out.push_back(st.loss); });
    return out;
}

}  // namespace

TEST_CASE("learning rate decays in steps") {
    TrainConfig c;
    c.lr = 1e-3;
    CHECK(learning_rate(c, 0) == 1e-3);
    CHECK(learning_rate(c, 999) == 1e-3);
    CHECK(learning_rate(c, 1000) == doctest::Approx(1e-3 * 0.998));
    CHECK(learning_rate(c, 25500) == doctest::Approx(1e-3 * std::pow(0.998, 25)));
}

TEST_CASE("interpolation endpoints and target") {
    Rng rng(1);
    const PointCloud a = sample_noise(10, rng), b = sample_noise(10, rng);
    CHECK(interpolate(a, b, 0.0) == a);
    CHECK(interpolate(a, b, 1.0) == b);
    const PointCloud mid = interpolate(a, b, 0.25), v = target_velocity(a, b);
    for (std::size_t i = 0; i < 30; ++i) {
        CHECK(mid.coords()[i] == doctest::Approx(0.75 * a.coords()[i] + 0.25 * b.coords()[i]));
        CHECK(v.coords()[i] == doctest::Approx(b.coords()[i] - a.coords()[i]));
    }
    CHECK_THROWS_AS(interpolate(a, b, 1.5), ArgumentError);
    CHECK_THROWS_AS(interpolate(a, b, -0.1), ArgumentError);
}

TEST_CASE("adam first step moves each weight by lr against the gradient sign") {
    TrainConfig c;
    std::vector<double> w{1.0, -2.0, 0.5};
    const std::vector<double> g{0.3, -4.0, 1e-3};
    AdamState s;
    adam_update(w, g, s, c, 1, 0.1);
    CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(-1.9).epsilon(1e-6));
    CHECK(w[2] == doctest::Approx(0.4).epsilon(1e-4));
}

TEST_CASE("config validation") {
    TrainConfig c;
    c.beta = 1.2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.lr = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(parse_coupling_mode("greedy"), ConfigError);
    CHECK(parse_coupling_mode("equivariant_ot") == CouplingMode::equivariant_ot);
}

TEST_CASE("training is deterministic for every coupling mode") {
    Rng rng(2);
    const TrainingData data = toy_data(rng, true);
    for (CouplingMode m :
         {CouplingMode::independent, CouplingMode::minibatch_ot, CouplingMode::equivariant_ot, CouplingMode::superset}) {
        TrainConfig cfg = toy_cfg(m);
        cfg.total_steps = 5;
        TrainState a = init_train_state(cfg, tiny_net()), b = init_train_state(cfg, tiny_net());
        CHECK(run_losses(cfg, data, a) == run_losses(cfg, data, b));
        CHECK(a.net.values == b.net.values);
    }
}

TEST_CASE("resume from a saved state continues the same loss sequence") {
    Rng rng(3);
    const TrainingData data = toy_data(rng, true);
    TrainConfig cfg = toy_cfg(CouplingMode::superset);
    TrainState full = init_train_state(cfg, tiny_net());
    const auto all = run_losses(cfg, data, full);

    TrainConfig half = cfg;
    half.total_steps = 12;
    TrainState first = init_train_state(half, tiny_net());
    auto seq = run_losses(half, data, first);
    const auto path = std::filesystem::temp_directory_path() / "pcflow_test_resume.state";
    save_train_state(path, first);
    TrainState resumed = load_train_state(path);
    std::filesystem::remove(path);
    CHECK(resumed.net.step == 12);
    const auto rest = run_losses(cfg, data, resumed);
    seq.insert(seq.end(), rest.begin(), rest.end());
    CHECK(seq == all);
    CHECK(resumed.net.values == full.net.values);
}

TEST_CASE("a fixed pair is fitted") {
    Rng rng(4);
    TrainConfig cfg = toy_cfg(CouplingMode::independent);
    cfg.lr = 1e-2;
    cfg.n_points = 8;
    TrainState s = init_train_state(cfg, tiny_net());
    const TrainingPair pair{sample_noise(8, rng), generate_shape(ShapeKind::sphere, 8, rng), {}};
    double first = 0.0, late = 0.0;
    for (int i = 0; i < 3000; ++i) {
        const StepStats st = train_step(s, cfg, {pair});
        if (i == 0) first = st.loss;
        if (i >= 2900) late += st.loss / 100.0;
    }
    CHECK(late < 0.01 * first);
}

TEST_CASE("conditional training updates the encoder") {
    Rng rng(5);
    const TrainingData data = toy_data(rng, false);
    TrainConfig cfg = toy_cfg(CouplingMode::independent);
    cfg.conditional = true;
    cfg.total_steps = 3;
    EncoderConfig enc;
    enc.hidden_width = 8;
    enc.latent_dim = 6;
    TrainState s = init_train_state(cfg, tiny_net(), enc);
    REQUIRE(s.encoder.has_value());
    CHECK(s.net.cfg.cond_dim == 6);
    const auto before = s.encoder->values;
    train(s, cfg, data);
    CHECK(s.encoder->values != before);
}

TEST_CASE("checkpoint round trip") {
    Rng rng(6);
    TrainConfig cfg = toy_cfg(CouplingMode::independent);
    const TrainState s = init_train_state(cfg, tiny_net());
    const auto path = std::filesystem::temp_directory_path() / "pcflow_test.ckpt";
    save_checkpoint(path, s.net, nullptr, {7, {{0.1, 0.2, 0.3}, 1.5}, "abc"});
    const Checkpoint ck = load_checkpoint(path);
    CHECK(ck.net.cfg == s.net.cfg);
    CHECK(ck.meta.seed == 7);
    CHECK(ck.meta.config_digest == "abc");
    CHECK(ck.meta.normalization.global_scale == 1.5);
    CHECK_FALSE(ck.encoder.has_value());
    for (std::size_t i = 0; i < s.net.values.size(); ++i)
        CHECK(ck.net.values[i] == static_cast<double>(static_cast<float>(s.net.values[i])));
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
    std::filesystem::remove(path);
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("pcflow_test.ckpt"), IoError);
}
