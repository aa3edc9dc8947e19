#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcflow/coupling.hpp"
#include "pcflow/flow_net.hpp"
#include "pcflow/partial.hpp"
#include "pcflow/trainer.hpp"

namespace pcflow {

struct DataSpec {
    std::vector<std::string> shapes{"sphere", "torus", "box-frame"};
    std::size_t superset_m = 4096;
    std::size_t n_points = 256;
    std::size_t ref_per_shape = 32;
    bool normalize = true;
};

struct CouplingSpec {
    PrecomputeConfig precompute{};
};

struct ModelSpec {
    NetConfig net{};
    EncoderConfig encoder{};
};

struct TrainSpec {
    /// beta, seed and the superset size come from the sweep lists and the
    /// data section; the rest is used as is.
    TrainConfig base{};
    std::vector<double> betas{0.2};
    std::vector<std::uint64_t> seeds;
    std::size_t log_every = 1;
    std::size_t checkpoint_every = 1000;
    bool resume = true;
};

struct SampleSpec {
    std::vector<std::string> runs;
    std::size_t count = 16;
    std::size_t steps = 100;
    std::size_t trajectories = 4;
};

struct EvalSpec {
    std::vector<std::string> runs;
    std::vector<std::size_t> steps{1, 2, 5, 10, 20, 50, 100};
    /// Generated clouds per row; 0 means as many as the reference set.
    std::size_t count = 0;
    bool with_emd = false;
};

struct DiagSpec {
    std::vector<std::string> runs;
    std::size_t steps = 100;
    std::size_t trajectories = 32;
    std::size_t probes = 8;
    double fd_step = 1e-3;
};

/// Everything one invocation needs. Relative paths are resolved against the
/// directory of the config file.
struct ExperimentSpec {
    std::uint64_t seed = 0;
    std::filesystem::path out;
    int threads = 0;
    DataSpec data;
    CouplingSpec coupling;
    ModelSpec model;
    TrainSpec train;
    SampleSpec sample;
    EvalSpec eval;
    DiagSpec diag;
    BenchConfig bench;

    /// Canonical TOML with every field spelled out.
    std::string to_toml() const;
    /// fnv1a64 of to_toml() without the out and threads lines, hex.
    std::string digest() const;
    void validate() const;
};

struct SpecOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<int> threads;
};

/// Throws ConfigError for syntax errors, unknown keys, wrong types, a
/// missing seed or out directory, and invalid values; IoError when the file
/// cannot be read.
ExperimentSpec load_spec(const std::filesystem::path& path, const SpecOverrides& overrides = {});
ExperimentSpec parse_spec(const std::string& text, const std::filesystem::path& base_dir,
                          const SpecOverrides& overrides = {});

/// Shortest decimal that round-trips.
std::string format_number(double v);

}  // namespace pcflow
