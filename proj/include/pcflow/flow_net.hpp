#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcflow/point_cloud.hpp"

namespace pcflow {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { silu, tanh, softplus };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct NetConfig {
    std::size_t hidden_width = 128;
    std::size_t depth = 4;
    std::size_t time_embed_dim = 64;  ///< even
    std::size_t cond_dim = 0;
    Activation activation = Activation::silu;

    void validate() const;
    bool operator==(const NetConfig&) const = default;
};

struct TensorShape {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
};

/// Shape table in storage order:
///   in.w (3 x H), in.wz (E+C x H), in.b (1 x H),
///   per block l: block<l>.wh (H x H), block<l>.wg (H x H), block<l>.wz (E+C x H), block<l>.b (1 x H),
///   out.w (H x 3), out.b (1 x 3).
std::vector<TensorShape> layer_shapes(const NetConfig& cfg);

/// (3 + E + C + 1) H + L (2H + E + C + 1) H + 3H + 3
std::size_t parameter_count(const NetConfig& cfg);

struct VectorFieldParams {
    NetConfig cfg;
    std::vector<TensorShape> shapes;
    std::vector<double> values;
    std::vector<double> ema;
    std::uint64_t step = 0;
};

/// Uniform(+-1/sqrt(fan_in)) weights and biases, zero output head; ema = values.
VectorFieldParams init_network(const NetConfig& cfg, Rng& rng);

/// Sinusoidal features of t: E/2 sines then E/2 cosines, frequencies
/// geometric from 1 to 100.
void time_embedding(double t, std::span<double> out);

/// B clouds of N points each, stacked as (B*N) x 3 rows.
struct FlowBatch {
    std::size_t batch = 0;
    std::size_t points = 0;
    RowMat x;               ///< (B*N) x 3
    std::vector<double> t;  ///< B
    RowMat cond;            ///< B x C (C = 0 for unconditional)
    RowMat target;          ///< (B*N) x 3, used by loss_and_grads only
};

/// Velocity for every row of batch.x. Throws NumericError naming the layer
/// on non-finite activations.
RowMat forward_batch(const NetConfig& cfg, std::span<const double> weights, const FlowBatch& batch);

/// Single-cloud convenience.
PointCloud forward(const NetConfig& cfg, std::span<const double> weights, const PointCloud& x, double t,
                   std::span<const double> cond = {});
PointCloud forward(const VectorFieldParams& params, const PointCloud& x, double t, std::span<const double> cond = {});

struct LossGrads {
    double loss = 0.0;
    std::vector<double> grads;  ///< same layout as the weights
    RowMat cond_grad;           ///< B x C, d loss / d cond
};

/// loss = mean over batch, points and coordinates of (v - target)^2, with
/// exact reverse-mode gradients.
LossGrads loss_and_grads(const NetConfig& cfg, std::span<const double> weights, const FlowBatch& batch);

/// shadow <- decay * shadow + (1 - decay) * values
void ema_update(VectorFieldParams& params, double decay);
void ema_update(std::vector<double>& shadow, std::span<const double> values, double decay);

}  // namespace pcflow
