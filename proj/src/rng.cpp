#include "pcflow/rng.hpp"

#include <sstream>

#include "pcflow/errors.hpp"

namespace pcflow {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(mix_seed(seed, 0)) {}

double Rng::normal() { return normal_(engine_); }

double Rng::uniform() { return uniform_(engine_); }

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0) throw ArgumentError("uniform_index: empty range");
    std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
    return dist(engine_);
}

Rng Rng::fork(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream + 1)); }

std::string Rng::state() const {
    std::ostringstream os;
    os << seed_ << ' ' << engine_ << ' ' << normal_ << ' ' << uniform_;
    return os.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream is(state);
    is >> seed_ >> engine_ >> normal_ >> uniform_;
    if (!is) throw IoError("corrupt rng state");
}

bool operator==(const Rng& a, const Rng& b) {
    return a.seed_ == b.seed_ && a.engine_ == b.engine_ && a.normal_ == b.normal_;
}

}  // namespace pcflow
