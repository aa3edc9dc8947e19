#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pcflow/coupling.hpp"
#include "pcflow/flow_net.hpp"
#include "pcflow/partial.hpp"

namespace pcflow {

enum class CouplingMode { independent, minibatch_ot, equivariant_ot, superset };

CouplingMode parse_coupling_mode(const std::string& name);
std::string to_string(CouplingMode mode);

struct TrainConfig {
    double lr = 2e-4;
    double lr_decay = 0.998;
    std::size_t lr_decay_every = 1000;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double ema_decay = 0.9999;
    std::size_t batch_size = 16;
    std::size_t total_steps = 20000;
    double beta = 0.2;
    CouplingMode coupling = CouplingMode::superset;
    std::size_t n_points = 512;
    /// Minibatch / equivariant OT group size; 0 means the whole batch.
    std::size_t ot_group_size = 0;
    /// Shape completion: condition on an encoded half-space crop of x1.
    bool conditional = false;
    std::size_t max_partial = 600;
    std::uint64_t seed = 0;

    void validate() const;
};

/// lr * lr_decay^floor(step / lr_decay_every)
double learning_rate(const TrainConfig& cfg, std::uint64_t step);

/// (1 - t) x0 + t x1
PointCloud interpolate(const PointCloud& x0, const PointCloud& x1, double t);

/// x1 - x0
PointCloud target_velocity(const PointCloud& x0, const PointCloud& x1);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
};

/// One bias-corrected Adam step; `step` counts from 1.
void adam_update(std::vector<double>& w, std::span<const double> g, AdamState& s, const TrainConfig& cfg,
                 std::uint64_t step, double lr);

/// Dense per-shape data and, for superset mode, one coupling per shape.
struct TrainingData {
    std::vector<Superset> shapes;
    std::vector<SupersetCoupling> couplings;
};

struct TrainState {
    VectorFieldParams net;
    std::optional<EncoderParams> encoder;
    AdamState adam_net;
    AdamState adam_encoder;
    Rng rng;
};

TrainState init_train_state(const TrainConfig& cfg, const NetConfig& net_cfg, const EncoderConfig& enc_cfg = {});

/// Draws B training pairs under cfg.coupling (before any hybrid perturbation).
std::vector<TrainingPair> draw_pairs(const TrainConfig& cfg, const TrainingData& data, Rng& rng);

struct StepStats {
    std::uint64_t step = 0;  ///< step count after the update
    double loss = 0.0;
    double lr = 0.0;
    double grad_norm = 0.0;
};

/// Samples t per element, applies the hybrid perturbation in superset mode,
/// interpolates, backpropagates, then Adam and EMA. Throws NumericError with
/// the step, t values and gradient norm on a non-finite loss.
StepStats train_step(TrainState& state, const TrainConfig& cfg, std::vector<TrainingPair> pairs);

using StepCallback = std::function<void(const StepStats&, const TrainState&)>;

/// Runs until net.step == cfg.total_steps, starting from the state's step.
void train(TrainState& state, const TrainConfig& cfg, const TrainingData& data, const StepCallback& on_step = {});

}  // namespace pcflow
