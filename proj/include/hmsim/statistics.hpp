#pragma once

// Monte Carlo experiment runner: empirical outcome frequencies of the membrane
// mechanism against the Born oracle Tr(D P_M).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hmsim/membrane.hpp"

namespace hmsim {

struct ExperimentConfig {
    Density state;
    Obs observable;
    MembraneModel membrane = MembraneModel::uniform();
    std::uint64_t trials = 100000;
    std::uint64_t master_seed = kDefaultSeed;
    double tolerance_sigmas = 4.0;
    /// Hint only; results depend on (config, seed) alone.
    int workers = 1;

    int dimension() const { return observable.dimension(); }
};

struct ChiSquareResult {
    double statistic = 0.0;
    int degrees_of_freedom = 0;
    double critical_value = 0.0;
    /// Bins left after pooling blocks with expected probability below 10 / trials.
    int retained_bins = 0;
    /// Rao-Scott first-order correction applied to the Pearson statistic.
    double design_effect = 1.0;
    bool pass = true;
};

inline constexpr double kChiSquareQuantile = 0.999;

/// Pearson goodness of fit at the 0.999 quantile. Throws when all counts are zero.
ChiSquareResult chi_square_check(const std::vector<std::uint64_t>& counts, const std::vector<double>& expected, double design_effect = 1.0);

/// Upper quantile of the chi-square distribution.
double chi_square_quantile(int degrees_of_freedom, double probability = kChiSquareQuantile);

struct ConvergenceReport {
    int dimension = 0;
    std::string membrane;
    /// "binomial" for independent trials, "between-membrane" when the standard
    /// error is estimated from the spread across random membranes.
    std::string sigma_model = "binomial";
    std::uint64_t trials = 0;
    std::uint64_t master_seed = 0;
    double tolerance_sigmas = 4.0;
    std::vector<std::vector<int>> blocks;
    std::vector<double> labels;
    std::vector<std::uint64_t> counts;
    std::vector<double> empirical_frequencies;
    std::vector<double> oracle_probabilities;
    std::vector<double> per_block_deviation;
    std::vector<double> per_block_sigma;
    /// max |geometric - Born| over blocks.
    double oracle_discrepancy = 0.0;
    ChiSquareResult chi_square;
    bool deviations_pass = true;
    bool pass = true;
    std::optional<int> membranes;
    std::optional<int> cells;

    double max_deviation() const;
};

/// Outcome-block counts for trials [first, first + count); trial t draws from
/// source.stream(t).
std::vector<std::uint64_t> count_outcomes(const PreparedMeasurement& prepared, const MembraneModel& model, const RandomSource& source,
                                          std::uint64_t first, std::uint64_t count, int workers);

/// Born block probabilities and the geometric route; throws when they differ by more than 1e-9.
std::vector<double> checked_oracle(const PreparedMeasurement& prepared, double* discrepancy = nullptr);

ConvergenceReport simulate_statistics(const ExperimentConfig& config);

struct UniversalAverageConfig {
    Density state;
    Obs observable;
    int cell_count = 50;
    int membranes = 200;
    std::uint64_t trials_per_membrane = 2000;
    std::uint64_t master_seed = kDefaultSeed;
    double tolerance_sigmas = 4.0;
    int workers = 1;
    /// Run a single membrane with all weight on this cell instead of a random family.
    std::optional<int> fixed_cell{};
};

/// Grand average over random cellular membranes whose cell weights are
/// uniform on the probability simplex.
ConvergenceReport universal_average_experiment(const UniversalAverageConfig& config);

struct StateVerification {
    PureState<double> state;
    /// max_i |barycentric_i - Tr(D P_i)|
    double identity_error;
    /// max_i |volume fraction_i - barycentric_i|
    double volume_error;
    std::optional<ConvergenceReport> monte_carlo;
    bool pass;
};

struct BornVerification {
    int dimension;
    std::uint64_t master_seed;
    double identity_tolerance;
    double max_identity_error;
    std::vector<StateVerification> states;
    bool pass;
};

inline constexpr int kMaxVerifyDimension = 8;
inline constexpr double kIdentityTolerance = 1e-9;

/// Haar-random pure states against the canonical non-degenerate observable.
/// trials == 0 skips the Monte Carlo part.
BornVerification verify_born(int n, int states, std::uint64_t trials, std::uint64_t master_seed, double tolerance_sigmas = 4.0, int workers = 1);

struct DieReport {
    ConvergenceReport report;
    /// Fraction of rolls whose immediate re-roll showed the same face.
    double repeat_frequency;
    bool pass;
};

DieReport die_experiment(const DieState& start, std::uint64_t rolls, std::uint64_t master_seed, int workers = 1);

}  // namespace hmsim
