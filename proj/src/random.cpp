#include "hmsim/random.hpp"

#include <cmath>
#include <numbers>

namespace hmsim {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double TrialStream::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double TrialStream::exponential() { return -std::log1p(-uniform()); }

double TrialStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

int TrialStream::below(int n) {
    // Lemire's multiply-shift; bias is < n / 2^64.
    const auto wide = static_cast<unsigned __int128>(next()) * static_cast<unsigned __int128>(n);
    return static_cast<int>(wide >> 64);
}

TrialStream RandomSource::stream(std::uint64_t trial) const { return TrialStream(splitmix64(master_seed_ ^ splitmix64(trial))); }

RandomSource RandomSource::derive(std::uint64_t tag) const { return RandomSource(splitmix64(splitmix64(master_seed_) + 0xD1B54A32D192ED03ULL * (tag + 1))); }

PureState<double> random_pure_state(int n, TrialStream& stream) {
    ComplexVector<double> v(n);
    for (int i = 0; i < n; ++i) v(i) = {stream.normal(), stream.normal()};
    return PureState<double>::normalized(std::move(v));
}

}  // namespace hmsim
