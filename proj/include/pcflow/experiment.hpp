#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "pcflow/checkpoint.hpp"
#include "pcflow/config.hpp"
#include "pcflow/metrics.hpp"
#include "pcflow/sampler.hpp"

namespace pcflow {

// Output layout under spec.out:
//   data/<shape>.xyz            dense superset per shape (raw units)
//   data/reference.xyz          held-out reference clouds, stacked
//   data/normalization.json     global mean and scale
//   couplings/<shape>.pcsc      superset coupling per shape
//   train/<run>/{model.ckpt, train.state, loss.csv}
//   samples/<run>/...           XYZ samples and trajectory dump
//   eval/eval.csv, diag/..., bench/coupling.csv

struct Dataset {
    std::vector<std::string> shape_ids;
    std::vector<Superset> raw;
    std::vector<PointCloud> reference;
    NormalizationStats stats;
};

/// Deterministic in spec.seed and the data section.
Dataset generate_dataset(const ExperimentSpec& spec);
void write_dataset(const ExperimentSpec& spec, const Dataset& data);
/// Throws IoError naming the missing or malformed file.
Dataset load_dataset(const ExperimentSpec& spec);

std::filesystem::path coupling_path(const ExperimentSpec& spec, const std::string& shape_id);
/// Digest over the seed and the data and coupling sections only, so a change
/// elsewhere does not invalidate caches.
std::uint64_t coupling_digest(const ExperimentSpec& spec);
std::uint64_t coupling_seed(const ExperimentSpec& spec, std::size_t shape_index);

/// Reads every coupling, checking the digest against the current config.
std::vector<SupersetCoupling> load_couplings(const ExperimentSpec& spec, const Dataset& data);

struct RunId {
    std::string name;
    double beta = 0.0;
    std::uint64_t seed = 0;
};

/// One run per (beta, seed) in superset mode, one per seed otherwise.
std::vector<RunId> planned_runs(const ExperimentSpec& spec);
std::filesystem::path run_dir(const ExperimentSpec& spec, const std::string& run);

/// Trains one run, resuming from train.state when allowed. Writes the
/// checkpoint, the state sidecar and loss.csv; returns every logged step.
std::vector<StepStats> train_run(const ExperimentSpec& spec, const RunId& run, const Dataset& data,
                                 std::ostream& log);

/// Runs named in `selected`, or every planned run when it is empty.
std::vector<std::string> resolve_runs(const ExperimentSpec& spec, const std::vector<std::string>& selected);
Checkpoint load_run(const ExperimentSpec& spec, const std::string& run);

/// Encoded crop of a raw reference cloud for completion checkpoints; the
/// crop itself (raw units) goes to `partial` when given.
std::vector<double> completion_condition(const Checkpoint& ck, const PointCloud& raw, std::size_t max_partial, Rng& rng,
                                         PointCloud* partial = nullptr);

/// One report per entry of spec.eval.steps, each from the same starting noise.
std::vector<EvalReport> evaluate_checkpoint(const ExperimentSpec& spec, const Checkpoint& ck, const Dataset& data);

struct DiagResult {
    std::vector<double> t;                 ///< T step times
    std::vector<double> curvature;         ///< T - 1, mean over trajectories
    std::vector<double> max_curvature;     ///< per trajectory
    double mean_max_curvature = 0.0;
    std::vector<double> jacobian;          ///< T, mean over trajectories
};

DiagResult diagnose_checkpoint(const ExperimentSpec& spec, const Checkpoint& ck);

/// Mean of the Jacobian norms whose step time lies in [lo, hi]; NaN when no
/// step falls inside.
double mean_over_window(const DiagResult& d, double lo, double hi);

/// "# key value" provenance lines: command, digest, seed and the resolved
/// config.
std::string provenance_header(const ExperimentSpec& spec, const std::string& command);

}  // namespace pcflow
