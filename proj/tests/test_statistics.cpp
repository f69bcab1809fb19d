#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "hmsim/serialization.hpp"
#include "hmsim/statistics.hpp"
#include "test_support.hpp"

using namespace hmsim;
using hmsim::testing::haar_state;

namespace {

Density spin_state(double theta) { return pure_to_density(spin_state_at_angle(theta)); }

ExperimentConfig spin_config(double theta, std::uint64_t trials, std::uint64_t seed = kDefaultSeed) {
    return ExperimentConfig{spin_state(theta), Obs::canonical(2, {0.5, -0.5}), MembraneModel::uniform(), trials, seed};
}

}  // namespace

TEST_CASE("chi-square quantiles") {
    // Standard table values at the 0.999 level.
    CHECK(chi_square_quantile(1) == doctest::Approx(10.828).epsilon(1e-4));
    CHECK(chi_square_quantile(5) == doctest::Approx(20.515).epsilon(1e-4));
    CHECK(chi_square_quantile(49) == doctest::Approx(85.351).epsilon(1e-4));
    CHECK(chi_square_quantile(0) == 0.0);
}

TEST_CASE("chi-square check examples") {
    const auto exact = chi_square_check({750, 250}, {0.75, 0.25});
    CHECK(exact.statistic == 0.0);
    CHECK(exact.pass);
    CHECK(exact.degrees_of_freedom == 1);

    const std::vector<double> uniform6(6, 1.0 / 6);
    const auto concentrated = chi_square_check({60000, 0, 0, 0, 0, 0}, uniform6);
    CHECK_FALSE(concentrated.pass);
    CHECK(concentrated.statistic == doctest::Approx(300000.0));

    CHECK_THROWS_AS(chi_square_check({0, 0}, {0.5, 0.5}), Error);
    CHECK_THROWS_AS(chi_square_check({1, 2}, {1.0}), DimensionMismatch);

    // Pearson statistic by hand: (60-50)^2/50 + (40-50)^2/50 = 4.
    const auto hand = chi_square_check({60, 40}, {0.5, 0.5});
    CHECK(hand.statistic == doctest::Approx(4.0));
    const auto corrected = chi_square_check({60, 40}, {0.5, 0.5}, 2.0);
    CHECK(corrected.statistic == doctest::Approx(2.0));
    CHECK(corrected.design_effect == 2.0);
}

TEST_CASE("chi-square pooling of rare blocks") {
    // Threshold 10 / 1000: the 1e-4 block joins the smallest retained one.
    const auto merged = chi_square_check({500, 499, 1}, {0.5, 0.4999, 0.0001});
    CHECK(merged.retained_bins == 2);
    CHECK(merged.degrees_of_freedom == 1);
    // Two rare blocks whose pool clears the threshold stay as one extra bin.
    const auto pooled = chi_square_check({490, 490, 10, 10}, {0.49, 0.49, 0.008, 0.012});
    CHECK(pooled.retained_bins == 3);
    // A certain outcome leaves no degrees of freedom.
    const auto certain = chi_square_check({0, 1000, 0}, {0.0, 1.0, 0.0});
    CHECK(certain.degrees_of_freedom == 0);
    CHECK(certain.statistic == 0.0);
    CHECK(certain.pass);
}

TEST_CASE("spin machine converges to cos^2(theta/2)") {
    const auto r = simulate_statistics(spin_config(std::numbers::pi / 3, 100000));
    CHECK(r.pass);
    CHECK(r.oracle_probabilities[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(std::abs(r.empirical_frequencies[0] - 0.75) <= 4 * std::sqrt(0.75 * 0.25 / 1e5));
    CHECK(std::abs(std::accumulate(r.empirical_frequencies.begin(), r.empirical_frequencies.end(), 0.0) - 1.0) <= 1e-12);
    CHECK(r.oracle_discrepancy <= 1e-9);
    CHECK(r.labels == std::vector<double>{0.5, -0.5});
}

TEST_CASE("eigenstate input gives exact frequencies under every membrane") {
    for (const auto& model : {MembraneModel::uniform(), MembraneModel::solipsistic(), MembraneModel::pure(50, 20)}) {
        ExperimentConfig cfg{pure_to_density(PureState<double>::basis(3, 1)), Obs::canonical(3), model, 5000};
        const auto r = simulate_statistics(cfg);
        CHECK(r.counts == std::vector<std::uint64_t>{0, 5000, 0});
        CHECK(r.max_deviation() == 0.0);
        CHECK(r.pass);
    }
}

TEST_CASE("N = 3 random pure state matches the Born rule") {
    std::mt19937_64 rng(61);
    for (int k = 0; k < 3; ++k) {
        ExperimentConfig cfg{pure_to_density(haar_state(3, rng)), Obs::canonical(3), MembraneModel::uniform(), 100000, kDefaultSeed + k};
        const auto r = simulate_statistics(cfg);
        CHECK(r.pass);
        for (std::size_t b = 0; b < 3; ++b) CHECK(r.per_block_deviation[b] <= 4 * r.per_block_sigma[b]);
    }
}

TEST_CASE("a single pure membrane deviates from the Born rule") {
    ExperimentConfig cfg = spin_config(std::numbers::pi / 3, 10000);
    cfg.membrane = MembraneModel::pure(50, CellularPartition(50, 2).cell_near_first_vertex());
    const auto r = simulate_statistics(cfg);
    CHECK_FALSE(r.pass);
    CHECK(r.counts[1] == 10000);  // every break lands beyond the particle on the n side
}

TEST_CASE("reports do not depend on the worker count") {
    std::mt19937_64 rng(67);
    ExperimentConfig cfg{pure_to_density(haar_state(4, rng)), Obs::canonical(4, {1, 1, 2, 3}), MembraneModel::uniform(), 30000};
    const std::string one = to_json(simulate_statistics(cfg)).dump();
    for (int w : {2, 3, 8}) {
        cfg.workers = w;
        CHECK(to_json(simulate_statistics(cfg)).dump() == one);
    }

    UniversalAverageConfig ua{spin_state(1.0), Obs::canonical(2), 10, 20, 500};
    const std::string avg = to_json(universal_average_experiment(ua)).dump();
    ua.workers = 7;
    CHECK(to_json(universal_average_experiment(ua)).dump() == avg);
}

TEST_CASE("same seed, same report; different seed, different counts") {
    const auto a = simulate_statistics(spin_config(1.0, 20000, 5));
    const auto b = simulate_statistics(spin_config(1.0, 20000, 5));
    const auto c = simulate_statistics(spin_config(1.0, 20000, 6));
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(a.counts != c.counts);
}

TEST_CASE("universal average") {
    const double theta = std::numbers::pi / 3;
    SUBCASE("one cell reduces to the uniform membrane") {
        UniversalAverageConfig cfg{spin_state(theta), Obs::canonical(2, {0.5, -0.5}), 1, 20, 1000};
        const auto avg = universal_average_experiment(cfg);
        const auto uni = simulate_statistics(spin_config(theta, 20000));
        CHECK(avg.counts == uni.counts);
        CHECK(avg.empirical_frequencies == uni.empirical_frequencies);
    }
    SUBCASE("random cellular membranes average to Born") {
        UniversalAverageConfig cfg{spin_state(theta), Obs::canonical(2), 50, 200, 2000};
        cfg.workers = 4;
        const auto r = universal_average_experiment(cfg);
        CHECK(r.pass);
        CHECK(r.sigma_model == "between-membrane");
        CHECK(r.membranes == 200);
        CHECK(r.trials == 400000);
        // The spread across membranes exceeds the binomial error of the pooled counts.
        CHECK(r.per_block_sigma[0] > std::sqrt(0.75 * 0.25 / 400000.0));
    }
    SUBCASE("a fixed cell near the first vertex fails") {
        UniversalAverageConfig cfg{spin_state(theta), Obs::canonical(2), 50, 200, 2000};
        cfg.fixed_cell = CellularPartition(50, 2).cell_near_first_vertex();
        const auto r = universal_average_experiment(cfg);
        CHECK_FALSE(r.pass);
        CHECK(r.membrane == "cellular-surrogate-fixed");
        CHECK(r.max_deviation() > 0.2);
    }
    SUBCASE("configuration errors") {
        UniversalAverageConfig cfg{spin_state(theta), Obs::canonical(2), 0, 10, 10};
        CHECK_THROWS_AS(universal_average_experiment(cfg), ConfigError);
        cfg.cell_count = 5;
        cfg.trials_per_membrane = 0;
        CHECK_THROWS_AS(universal_average_experiment(cfg), ConfigError);
    }
}

TEST_CASE("verify_born") {
    const auto v = verify_born(3, 10, 10000, kDefaultSeed, 4.0, 2);
    CHECK(v.pass);
    CHECK(v.states.size() == 10);
    CHECK(v.max_identity_error <= 1e-9);
    for (const auto& s : v.states) {
        REQUIRE(s.monte_carlo.has_value());
        CHECK(s.volume_error <= 1e-9);
    }
    const auto analytic = verify_born(8, 100, 0, 1);
    CHECK(analytic.pass);
    CHECK_FALSE(analytic.states[0].monte_carlo.has_value());
    CHECK_THROWS_AS(verify_born(9, 1, 0, 1), InvalidDimension);
    CHECK_THROWS_AS(verify_born(1, 1, 0, 1), InvalidDimension);

    // N = 2: the identity error is measured against cos^2(theta/2) of each state.
    const auto two = verify_born(2, 100, 0, 3);
    const Basis basis(2);
    for (const auto& s : two.states) {
        const auto r = density_to_bloch(pure_to_density(s.state), basis);
        const double theta = std::acos(std::clamp(r.coords()(2), -1.0, 1.0));
        const double p0 = std::norm(s.state.amplitudes()(0));
        CHECK(std::abs(p0 - std::pow(std::cos(theta / 2), 2)) <= 1e-9);
    }
}

TEST_CASE("die experiment") {
    const auto off = die_experiment(DieState::off_table(), 60000, kDefaultSeed, 3);
    CHECK(off.pass);
    CHECK(off.report.chi_square.pass);
    CHECK(off.repeat_frequency == 1.0);
    const auto on = die_experiment(DieState::on_table(2), 1000, kDefaultSeed);
    CHECK(on.pass);
    CHECK(on.report.counts == std::vector<std::uint64_t>{0, 1000, 0, 0, 0, 0});
    CHECK(on.report.labels[1] == 2.0);
}

TEST_CASE("deviation shrinks like 1/sqrt(trials)") {
    const std::vector<std::uint64_t> sizes{1000, 10000, 100000};
    std::vector<double> mean_dev(sizes.size(), 0.0);
    for (int seed = 0; seed < 20; ++seed) {
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            ExperimentConfig cfg = spin_config(std::numbers::pi / 3, sizes[i], 1000 + static_cast<std::uint64_t>(seed));
            cfg.workers = 4;
            mean_dev[i] += simulate_statistics(cfg).max_deviation() / 20.0;
        }
    }
    // Least-squares slope of log(mean deviation) against log(trials).
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double x = std::log(static_cast<double>(sizes[i])), y = std::log(mean_dev[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double k = static_cast<double>(sizes.size());
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    MESSAGE("fitted slope " << slope);
    CHECK(slope >= -0.65);
    CHECK(slope <= -0.35);
}

TEST_CASE("invalid experiment settings") {
    auto cfg = spin_config(1.0, 0);
    CHECK_THROWS_AS(simulate_statistics(cfg), ConfigError);
    cfg.trials = 10;
    cfg.tolerance_sigmas = 0.0;
    CHECK_THROWS_AS(simulate_statistics(cfg), ConfigError);
    cfg.tolerance_sigmas = 4.0;
    cfg.state = Density::maximally_mixed(3);
    CHECK_THROWS_AS(simulate_statistics(cfg), DimensionMismatch);
}
