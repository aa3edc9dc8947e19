#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcflow/ot.hpp"
#include "pcflow/point_cloud.hpp"
#include "pcflow/shapes.hpp"

namespace pcflow {

/// One flow-matching training pair. cond is empty for unconditional models.
struct TrainingPair {
    PointCloud x0;
    PointCloud x1;
    std::vector<double> cond;
};

struct HybridConfig {
    double beta = 0.2;
    void validate() const;
};

/// x1 = data, x0 fresh N(0, I) of the same size.
TrainingPair independent_pair(const PointCloud& data, Rng& rng);

/// Sum over rows of |a_i - b_i|^2 (clouds treated as flat vectors).
double flat_cost(const PointCloud& a, const PointCloud& b);

/// Minimum over point permutations of flat_cost(a, P b).
double aligned_cost(const PointCloud& a, const PointCloud& b);

/// Batch-level assignment on flat costs. pairs[i] = (noises[i], datas[match[i]]).
std::vector<TrainingPair> minibatch_ot_pairs(std::span<const PointCloud> noises, std::span<const PointCloud> datas);

inline constexpr std::size_t kEquivariantMaxPoints = 4096;

/// Batch-level assignment on permutation-aligned costs; each returned x1 is
/// reordered so row i is matched to row i of its x0. Refuses when
/// B * N > max_points.
std::vector<TrainingPair> equivariant_ot_pairs(std::span<const PointCloud> noises, std::span<const PointCloud> datas,
                                               std::size_t max_points = kEquivariantMaxPoints);

enum class CouplingMethod : std::uint32_t { exact_hungarian = 0, wgf = 1 };

CouplingMethod parse_coupling_method(const std::string& name);
std::string to_string(CouplingMethod method);

/// Row-aligned superset coupling: row i of x0_rows is transported to row i
/// of x1_rows.
struct SupersetCoupling {
    std::string shape_id;
    PointCloud x0_rows;
    PointCloud x1_rows;
    CouplingMethod method = CouplingMethod::exact_hungarian;
    std::uint64_t seed = 0;
    std::uint64_t digest = 0;

    std::size_t m() const noexcept { return x0_rows.size(); }
};

struct PrecomputeConfig {
    CouplingMethod method = CouplingMethod::exact_hungarian;
    std::size_t exact_threshold = kExactOtThreshold;
    WgfConfig wgf{};
};

/// Draws an M-point noise superset (M = data.m()) and couples it with the
/// data superset.
SupersetCoupling precompute_superset_coupling(const Superset& data, const PrecomputeConfig& cfg, Rng& rng,
                                              const std::string& shape_id = "", std::uint64_t digest = 0);

/// n distinct rows drawn uniformly, with their partners.
TrainingPair sample_coupled_pair(const SupersetCoupling& coupling, std::size_t n, Rng& rng);

/// x0' = sqrt(1 - beta) x0 + sqrt(beta) eps. Always draws eps, so the
/// generator advances identically for every beta.
PointCloud hybrid_perturb(const PointCloud& x0, const HybridConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Coupling cache: little-endian binary,
//   "PCFLOWSC" | u32 version | u64 m | u32 method | u64 seed | u64 digest |
//   u32 id_len | id bytes | f32 x0[m*3] | f32 x1[m*3]

inline constexpr std::uint32_t kCouplingCacheVersion = 1;

void write_coupling_cache(const std::filesystem::path& path, const SupersetCoupling& coupling);

/// Throws IoError naming the file on missing file, bad magic, version or size.
SupersetCoupling read_coupling_cache(const std::filesystem::path& path);

/// Header check without loading the blocks. Returns nullopt on any defect.
struct CacheHeader {
    std::uint64_t m = 0;
    CouplingMethod method = CouplingMethod::exact_hungarian;
    std::uint64_t seed = 0;
    std::uint64_t digest = 0;
    std::string shape_id;
};
std::optional<CacheHeader> probe_coupling_cache(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Cost / timing comparison across coupling strategies.

struct BenchConfig {
    std::vector<std::size_t> batch_sizes{1, 4, 16, 64};
    std::size_t n = 512;
    std::size_t trials = 4;
    std::vector<ShapeKind> shapes{ShapeKind::sphere, ShapeKind::torus, ShapeKind::box_frame};
    std::size_t superset_m = 4096;
    std::size_t equivariant_max_points = kEquivariantMaxPoints;
};

struct BenchRow {
    std::string method;
    std::size_t batch = 0;
    std::size_t n = 0;
    double mean_cost = 0.0;      ///< mean over pairs of flat_cost / N
    double reduction_pct = 0.0;  ///< vs independent at the same B
    double seconds = 0.0;        ///< mean pairing time per batch
    std::string note;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    /// cost(equivariant) <= cost(minibatch) <= cost(identity) held on every
    /// batch where all three were computed.
    bool ordering_held = true;
    std::size_t ordering_batches = 0;
};

BenchReport bench_couplings(const BenchConfig& cfg, Rng& rng);

}  // namespace pcflow
