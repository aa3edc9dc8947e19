#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace pcflow {

/// Deterministic random source. Identical seed and call sequence give
/// identical draws; `fork` derives independent child streams so callers can
/// hand out generators without sharing mutable state.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }

    double normal();
    double uniform();  // [0, 1)
    std::uint64_t uniform_index(std::uint64_t n);  // [0, n)

    /// Child generator for stream `stream`; does not advance this one.
    Rng fork(std::uint64_t stream) const;

    /// Full engine + distribution state, textual. Round-trips through restore().
    std::string state() const;
    void restore(const std::string& state);

    friend bool operator==(const Rng& a, const Rng& b);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// SplitMix64 finaliser, used to derive stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace pcflow
