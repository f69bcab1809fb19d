#pragma once

// Seeded, trial-indexed random streams. A trial's stream depends only on
// (master seed, trial index), so results do not depend on execution order or
// on how trials are sharded across workers.

#include <cstdint>
#include <random>

#include "hmsim/bloch.hpp"

namespace hmsim {

inline constexpr std::uint64_t kDefaultSeed = 0xB10C;

std::uint64_t splitmix64(std::uint64_t x);

/// One trial's generator. Draws are built from raw 64-bit words so the values
/// are identical on every standard library.
class TrialStream {
public:
    explicit TrialStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Unit-rate exponential variate.
    double exponential();
    /// Standard normal variate (Box-Muller).
    double normal();
    /// Uniform integer on [0, n).
    int below(int n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

class RandomSource {
public:
    explicit RandomSource(std::uint64_t master_seed = kDefaultSeed) : master_seed_(master_seed) {}

    std::uint64_t master_seed() const { return master_seed_; }
    TrialStream stream(std::uint64_t trial) const;
    /// Independent source for a named sub-experiment.
    RandomSource derive(std::uint64_t tag) const;

private:
    std::uint64_t master_seed_;
};

/// Haar-random pure state in C^n.
PureState<double> random_pure_state(int n, TrialStream& stream);

}  // namespace hmsim
