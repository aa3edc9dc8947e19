#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "pcflow/flow_net.hpp"
#include "pcflow/point_cloud.hpp"

namespace pcflow {

/// A network plus the weight vector to evaluate (usually the EMA shadow).
struct FlowModel {
    NetConfig cfg;
    std::span<const double> weights;
};

/// Euler record: step i holds (t_i, x_i, v_i) with t_i = i / T and
/// x_{i+1} = x_i + v_i / T.
struct Trajectory {
    std::vector<double> t;
    std::vector<PointCloud> x;
    std::vector<PointCloud> v;

    std::size_t size() const noexcept { return t.size(); }
};

struct SampleResult {
    PointCloud final;
    Trajectory traj;
};

/// T Euler steps of dx/dt = v(x, t) from x0 on the uniform grid. The final
/// cloud is denormalized when stats are given; the trajectory stays in model
/// units. Throws NumericError naming the step on a non-finite state.
SampleResult euler_sample(const FlowModel& model, const PointCloud& x0, std::size_t steps,
                          std::span<const double> cond = {}, bool record = true,
                          const NormalizationStats* stats = nullptr);

/// The same integration for several clouds of equal size, batched through
/// the network.
std::vector<SampleResult> euler_sample_batch(const FlowModel& model, std::span<const PointCloud> x0s, std::size_t steps,
                                             std::span<const double> cond = {}, bool record = true,
                                             const NormalizationStats* stats = nullptr);

/// G samples of N points from fresh N(0, I) starts, all sharing `cond`.
std::vector<PointCloud> generate_set(const FlowModel& model, std::size_t count, std::size_t n, std::size_t steps,
                                     Rng& rng, std::span<const double> cond = {},
                                     const NormalizationStats* stats = nullptr);

// Trajectory dump, little-endian:
//   "PCFTRAJ1" | u32 samples | u32 T | u32 N |
//   per sample: f32 t[T] | f32 x[T*N*3] | f32 v[T*N*3]
void write_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajs);
std::vector<Trajectory> read_trajectories(const std::filesystem::path& path);

}  // namespace pcflow
