#pragma once

#include <span>
#include <vector>

#include "pcflow/flow_net.hpp"
#include "pcflow/point_cloud.hpp"

namespace pcflow {

/// Half-space crop: keeps points p with dot(normal, p) >= offset.
struct CropPlane {
    Point3 normal{1.0, 0.0, 0.0};
    double offset = 0.0;
};

struct PartialObservation {
    PointCloud points;  ///< K x 3, 1 <= K <= max_k
    CropPlane crop;
};

/// Keeps the points on the kept side of the plane, then subsamples without
/// replacement down to max_k. Throws ArgumentError when nothing is kept.
PartialObservation make_partial(const PointCloud& cloud, const CropPlane& crop, std::size_t max_k, Rng& rng);

/// Plane with a uniformly random unit normal through the centroid of `cloud`.
CropPlane random_crop(const PointCloud& cloud, Rng& rng);

struct EncoderConfig {
    std::size_t hidden_width = 128;
    std::size_t latent_dim = 256;
    Activation activation = Activation::silu;

    bool operator==(const EncoderConfig&) const = default;
};

/// Shared two-layer MLP on points, mean pool, linear head to the latent.
///   w1 (3 x He), b1, w2 (He x He), b2, w3 (He x D), b3
struct EncoderParams {
    EncoderConfig cfg;
    std::vector<double> values;
    std::vector<double> ema;
};

std::size_t encoder_parameter_count(const EncoderConfig& cfg);
EncoderParams init_encoder(const EncoderConfig& cfg, Rng& rng);

/// Permutation-invariant latent of the observed points.
std::vector<double> encode_partial(const EncoderConfig& cfg, std::span<const double> weights,
                                   const PartialObservation& obs);

/// Accumulates d loss / d weights into `grads` given d loss / d latent.
void encode_partial_backward(const EncoderConfig& cfg, std::span<const double> weights,
                             const PartialObservation& obs, std::span<const double> d_latent,
                             std::span<double> grads);

}  // namespace pcflow
