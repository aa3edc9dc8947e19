#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "pcflow/flow_net.hpp"
#include "pcflow/partial.hpp"
#include "pcflow/trainer.hpp"

namespace pcflow {

struct CheckpointMeta {
    std::uint64_t seed = 0;
    NormalizationStats normalization{};
    std::string config_digest;
};

struct Checkpoint {
    VectorFieldParams net;
    std::optional<EncoderParams> encoder;
    CheckpointMeta meta;
};

// Checkpoint file: one line of JSON (net config, step, seed, normalization,
// digest, shape table, block list) followed by little-endian float32 blocks:
// params, ema, then encoder params and ema when present.
void save_checkpoint(const std::filesystem::path& path, const VectorFieldParams& net, const EncoderParams* encoder,
                     const CheckpointMeta& meta);

/// Throws IoError naming the file for missing, truncated or malformed input.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Resume sidecar: the full float64 training state (weights, EMA, Adam
// moments, step, generator state) so a resumed run continues bitwise.
void save_train_state(const std::filesystem::path& path, const TrainState& state);
TrainState load_train_state(const std::filesystem::path& path);

}  // namespace pcflow
