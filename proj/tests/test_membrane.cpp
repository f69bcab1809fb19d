#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "hmsim/membrane.hpp"
#include "test_support.hpp"

using namespace hmsim;
using hmsim::testing::haar_state;
using hmsim::testing::random_mixed;

namespace {

using CMat = ComplexMatrix<double>;

double binomial_sigma(double p, double n) { return std::sqrt(p * (1 - p) / n); }

Simplex canonical_simplex(int n) { return build_measurement_simplex(Obs::canonical(n), Basis(n)); }

}  // namespace

TEST_CASE("random streams are reproducible and trial-indexed") {
    const RandomSource a(42), b(42), c(43);
    auto s1 = a.stream(7), s2 = b.stream(7), s3 = c.stream(7), s4 = a.stream(8);
    for (int i = 0; i < 100; ++i) {
        const auto x = s1.next();
        CHECK(x == s2.next());
        CHECK(x != s3.next());
        CHECK(x != s4.next());
    }
    CHECK(a.derive(1).master_seed() != a.derive(2).master_seed());
    CHECK(a.derive(1).master_seed() == b.derive(1).master_seed());

    auto s = a.stream(0);
    for (int i = 0; i < 1000; ++i) {
        const double u = s.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(s.exponential() >= 0.0);
        const int k = s.below(6);
        CHECK(k >= 0);
        CHECK(k < 6);
    }
}

TEST_CASE("splitmix64 reference values") {
    // First two outputs of the reference generator started from state 0.
    CHECK(splitmix64(0) == 0xE220A8397B1DCDAFULL);
    CHECK(splitmix64(0x9E3779B97F4A7C15ULL) == 0x6E789E6AA1B965F4ULL);
}

TEST_CASE("uniform band: breaking points are uniform on the segment") {
    const Simplex s = canonical_simplex(2);
    const RandomSource source(kDefaultSeed);
    const int draws = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int t = 0; t < draws; ++t) {
        auto stream = source.stream(t);
        const auto p = sample_breaking_point(s, MembraneModel::uniform(), stream);
        CHECK_FALSE(p.vertex.has_value());
        const double x = p.weights(0) - p.weights(1);  // position along [-n, n]
        sum += x;
        sum_sq += x * x;
    }
    // Uniform on [-1, 1]: mean 0, variance 1/3.
    CHECK(std::abs(sum / draws) <= 3 * std::sqrt(1.0 / 3 / draws));
    CHECK(std::abs(sum_sq / draws - 1.0 / 3) <= 4 * std::sqrt((1.0 / 5 - 1.0 / 9) / draws));
}

TEST_CASE("solipsistic membrane breaks only at vertices, each 1/6") {
    const Simplex s = canonical_simplex(6);
    const RandomSource source(kDefaultSeed);
    const int draws = 100000;
    std::vector<int> counts(6, 0);
    for (int t = 0; t < draws; ++t) {
        auto stream = source.stream(t);
        const auto p = sample_breaking_point(s, MembraneModel::solipsistic(), stream);
        REQUIRE(p.vertex.has_value());
        CHECK(p.weights(*p.vertex) == 1.0);
        CHECK(p.weights.sum() == 1.0);
        ++counts[*p.vertex];
    }
    for (int c : counts) CHECK(std::abs(c / double(draws) - 1.0 / 6) <= 3 * binomial_sigma(1.0 / 6, draws));
}

TEST_CASE("cellular partition grid") {
    CHECK(CellularPartition(50, 2).grid() == std::vector<int>{50});
    CHECK(CellularPartition(50, 3).grid() == std::vector<int>{10, 5});
    CHECK(CellularPartition(12, 4).grid() == std::vector<int>{3, 2, 2});
    CHECK(CellularPartition(1, 5).grid() == std::vector<int>{1, 1, 1, 1});
    CHECK_THROWS_AS(CellularPartition(0, 3), InvalidMembrane);

    const CellularPartition p(50, 3);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uniform;
    for (int k = 0; k < 100; ++k) {
        Vec u(2);
        u << uniform(rng), uniform(rng);
        const Vec w = p.weights_from_cube(u);
        CHECK(std::abs(w.sum() - 1.0) < 1e-12);
        CHECK(w.minCoeff() >= 0.0);
        CHECK((p.cube_from_weights(w) - u).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("cells have equal uniform measure") {
    for (int n : {2, 3, 4}) {
        const CellularPartition p(50, n);
        const Simplex s = canonical_simplex(n);
        const RandomSource source(kDefaultSeed);
        const int draws = 200000;
        std::vector<double> counts(50, 0.0);
        for (int t = 0; t < draws; ++t) {
            auto stream = source.stream(t);
            ++counts[p.cell_of(sample_breaking_point(s, MembraneModel::uniform(), stream).weights)];
        }
        double chi2 = 0.0;
        const double expected = draws / 50.0;
        for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
        CHECK(chi2 < 85.35);  // chi-square 0.999 quantile, 49 dof
    }
}

TEST_CASE("samples inside a cell stay in that cell") {
    const CellularPartition p(50, 3);
    const RandomSource source(5);
    for (int cell = 0; cell < 50; ++cell) {
        auto stream = source.stream(cell);
        for (int k = 0; k < 20; ++k) CHECK(p.cell_of(p.sample_in_cell(cell, stream)) == cell);
    }
    // The cell near vertex 0 has its points close to that vertex.
    auto stream = source.stream(99);
    for (int k = 0; k < 100; ++k) CHECK(p.sample_in_cell(p.cell_near_first_vertex(), stream)(0) > 0.5);
}

TEST_CASE("membrane model validation") {
    CHECK_THROWS_AS(MembraneModel::cellular({0.5, 0.4}), InvalidMembrane);
    CHECK_THROWS_AS(MembraneModel::cellular({1.5, -0.5}), InvalidMembrane);
    CHECK_THROWS_AS(MembraneModel::cellular({}), InvalidMembrane);
    CHECK_THROWS_AS(MembraneModel::pure(10, 10), InvalidMembrane);
    const auto m = MembraneModel::pure(10, 3);
    CHECK(m.cell_count() == 10);
    CHECK(m.cell_weights()[3] == 1.0);
    auto stream = RandomSource(1).stream(0);
    for (int k = 0; k < 100; ++k) CHECK(m.pick_cell(stream) == 3);
}

TEST_CASE("a one-cell membrane is the uniform membrane") {
    const Simplex s = canonical_simplex(3);
    const RandomSource source(kDefaultSeed);
    const auto one = MembraneModel::cellular({1.0});
    const int draws = 100000;
    // Compare the marginal of weight 0 with its exact law, P(w0 > x) = (1 - x)^2.
    std::vector<int> above(4, 0);
    const double cuts[4] = {0.1, 0.3, 0.5, 0.8};
    double mean_w1 = 0.0;
    for (int t = 0; t < draws; ++t) {
        auto stream = source.stream(t);
        const Vec w = sample_breaking_point(s, one, stream).weights;
        for (int c = 0; c < 4; ++c) above[c] += w(0) > cuts[c];
        mean_w1 += w(1) / draws;
    }
    for (int c = 0; c < 4; ++c) {
        const double p = std::pow(1 - cuts[c], 2);
        CHECK(std::abs(above[c] / double(draws) - p) <= 4 * binomial_sigma(p, draws));
    }
    // Marginal Beta(1, 2): variance 1/18.
    CHECK(std::abs(mean_w1 - 1.0 / 3) <= 4 * std::sqrt(1.0 / 18 / draws));
}

TEST_CASE("eigenstate input: outcome certain and posterior unchanged") {
    for (const auto& model : {MembraneModel::uniform(), MembraneModel::solipsistic(), MembraneModel::pure(50, 0), MembraneModel::pure(50, 49)}) {
        const Obs obs = Obs::canonical(2, {0.5, -0.5});
        const Density up = pure_to_density(spin_state_at_angle(0.0));
        const RandomSource source(3);
        for (int t = 0; t < 200; ++t) {
            auto stream = source.stream(t);
            const auto r = run_measurement(up, obs, model, stream);
            CHECK(r.label == 0.5);
            CHECK((r.posterior.matrix() - up.matrix()).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("collapse trace invariants") {
    std::mt19937_64 rng(41);
    for (int n = 2; n <= 6; ++n) {
        const Basis basis(n);
        const Obs obs = Obs::canonical(n);
        const RandomSource source(n);
        for (int t = 0; t < 100; ++t) {
            const Density d = t % 2 ? random_mixed(n, rng) : pure_to_density(haar_state(n, rng));
            auto stream = source.stream(t);
            const auto r = run_measurement(d, obs, MembraneModel::uniform(), stream);
            const auto& tr = r.trace;
            const Simplex s = build_measurement_simplex(obs, basis);
            CHECK((tr.on_membrane_point.coords() - project_onto_membrane(tr.initial_state, s).coords()).norm() == 0.0);
            CHECK(std::abs(tr.final_state.norm() - 1.0) <= 1e-10);
            CHECK((tr.final_state.coords() - s.vertex(tr.elementary_outcome)).norm() <= 1e-12);
            CHECK((tr.intermediate_point.coords() - s.vertex(tr.elementary_outcome)).norm() == 0.0);
            CHECK(tr.outcome_block == std::vector<int>{tr.elementary_outcome});
            CHECK(tr.polar_angle.has_value() == (n == 2));
            const Vec beta = s.raw_barycentric(tr.breaking_point.coords());
            CHECK(beta.minCoeff() >= -1e-12);
        }
    }
}

TEST_CASE("polar angle") {
    const Obs obs = Obs::canonical(2);
    auto stream = RandomSource(1).stream(0);
    for (double theta : {0.0, 0.4, std::numbers::pi / 2, 2.5}) {
        const auto r = run_measurement(pure_to_density(spin_state_at_angle(theta)), obs, MembraneModel::uniform(), stream);
        REQUIRE(r.trace.polar_angle.has_value());
        CHECK(*r.trace.polar_angle == doctest::Approx(theta).epsilon(1e-12));
    }
}

TEST_CASE("degenerate observable: Lüders posterior and block probability") {
    const Basis basis(3);
    const Obs obs = Obs::canonical(3, {7.0, 7.0, -1.0});
    ComplexVector<double> amps(3);
    amps << std::complex<double>(0.6, 0.1), std::complex<double>(-0.3, 0.5), std::complex<double>(0.2, -0.4);
    const auto psi = PureState<double>::normalized(amps);
    const Density d = pure_to_density(psi);
    const auto& a = psi.amplitudes();
    const double p_block = std::norm(a(0)) + std::norm(a(1));

    // P_M psi normalized, from the amplitudes.
    ComplexVector<double> phi(3);
    phi << a(0), a(1), 0;
    phi /= phi.norm();
    const CMat expected_post = phi * phi.adjoint();

    const PreparedMeasurement prepared(d, obs, basis);
    CHECK(prepared.block_probabilities()(0) == doctest::Approx(p_block).epsilon(1e-12));

    const RandomSource source(kDefaultSeed);
    const int trials = 100000;
    int in_block = 0;
    for (int t = 0; t < trials; ++t) {
        auto stream = source.stream(t);
        const auto r = prepared.run(MembraneModel::uniform(), stream);
        if (r.trace.block_index == 0) {
            ++in_block;
            CHECK(r.label == 7.0);
            CHECK((r.posterior.matrix() - expected_post).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK(r.trace.outcome_block == std::vector<int>{0, 1});
            // Intermediate point: on the edge n0-n1, closest to r_par.
            const Vec v0 = prepared.simplex().vertex(0), v1 = prepared.simplex().vertex(1);
            const Vec x = r.trace.intermediate_point.coords();
            const Vec edge = v1 - v0;
            CHECK(std::abs((x - v0).dot(edge) - (x - v0).norm() * edge.norm()) <= 1e-9 * edge.norm());
            CHECK(std::abs((r.trace.on_membrane_point.coords() - x).dot(edge)) <= 1e-12);
        } else {
            CHECK(r.label == -1.0);
            CHECK(std::abs(r.posterior.matrix()(2, 2).real() - 1.0) <= 1e-12);
        }
    }
    CHECK(std::abs(in_block / double(trials) - p_block) <= 4 * binomial_sigma(p_block, trials));
}

TEST_CASE("coarse-graining consistency") {
    std::mt19937_64 rng(43);
    const Obs fine = Obs::canonical(4);
    const Obs coarse = Obs::canonical(4, {1, 2, 2, 3});
    for (int k = 0; k < 20; ++k) {
        const Density d = random_mixed(4, rng);
        const Vec f = PreparedMeasurement(d, fine).block_probabilities();
        const Vec c = PreparedMeasurement(d, coarse).block_probabilities();
        CHECK(std::abs(c(1) - (f(1) + f(2))) <= 1e-9);
        CHECK(std::abs(c(0) - f(0)) <= 1e-9);
    }
}

TEST_CASE("first-kind repeatability under every membrane") {
    std::mt19937_64 rng(47);
    const std::vector<MembraneModel> models{MembraneModel::uniform(), MembraneModel::solipsistic(), MembraneModel::pure(50, 0), MembraneModel::pure(50, 17)};
    for (int n : {2, 3, 6}) {
        std::vector<double> labels(n);
        for (int i = 0; i < n; ++i) labels[i] = i / 2;  // blocks of size two (last may be single)
        for (const Obs& obs : {Obs::canonical(n), Obs::canonical(n, labels)}) {
            const RandomSource source(n);
            for (int t = 0; t < 200; ++t) {
                const Density d = pure_to_density(haar_state(n, rng));
                auto first = source.stream(2 * t);
                const auto r = run_measurement(d, obs, models[t % models.size()], first);
                for (const auto& model : models) {
                    auto second = source.stream(2 * t + 1);
                    CHECK(run_measurement(r.posterior, obs, model, second).trace.block_index == r.trace.block_index);
                }
            }
        }
    }
}

TEST_CASE("solipsistic outcomes are uniform for non-eigenstates") {
    std::mt19937_64 rng(53);
    const Obs obs = Obs::canonical(6);
    for (int k = 0; k < 2; ++k) {
        const PreparedMeasurement prepared(random_mixed(6, rng), obs);
        const RandomSource source(kDefaultSeed + k);
        const int trials = 100000;
        std::vector<int> counts(6, 0);
        for (int t = 0; t < trials; ++t) {
            auto stream = source.stream(t);
            ++counts[prepared.sample(MembraneModel::solipsistic(), stream).elementary];
        }
        for (int c : counts) CHECK(std::abs(c / double(trials) - 1.0 / 6) <= 3 * binomial_sigma(1.0 / 6, trials));
    }
}

TEST_CASE("zero-weight outcome under the uniform membrane is impossible") {
    const PreparedMeasurement prepared(pure_to_density(PureState<double>::basis(3, 0)), Obs::canonical(3));
    SampledOutcome fake{{Vec::Unit(3, 1), std::nullopt}, 1, 1, MembraneModel::Kind::uniform};
    CHECK_THROWS_AS(prepared.collapse(fake), ImpossibleOutcome);
    fake.model = MembraneModel::Kind::cellular;
    CHECK(prepared.collapse(fake).posterior.matrix()(1, 1).real() == doctest::Approx(1.0));
}

TEST_CASE("spin machine") {
    const Eigen::Vector3d axis(0, 0, 1);
    const RandomSource source(kDefaultSeed);
    const int trials = 20000;
    for (double theta : {std::numbers::pi / 2, std::numbers::pi / 3, std::numbers::pi}) {
        const Eigen::Vector3d r(std::sin(theta), 0, std::cos(theta));
        const double p = std::pow(std::cos(theta / 2), 2);
        int up = 0;
        for (int t = 0; t < trials; ++t) {
            auto stream = source.stream(t);
            const auto res = spin_machine_measure(r, axis, MembraneModel::uniform(), stream);
            up += res.outcome == 1;
            CHECK(*res.trace.polar_angle == doctest::Approx(theta).epsilon(1e-12));
        }
        CHECK(std::abs(up / double(trials) - p) <= 4 * binomial_sigma(p, trials) + 1e-15);
        if (theta == std::numbers::pi) CHECK(up == 0);
    }
    auto stream = source.stream(0);
    CHECK_THROWS_AS(spin_machine_measure(Eigen::Vector3d(0, 0, 1), Eigen::Vector3d::Zero(), MembraneModel::uniform(), stream), InvalidObservable);
    CHECK_THROWS_AS(spin_machine_measure(Eigen::Vector3d(0, 0, 2), axis, MembraneModel::uniform(), stream), InvalidState);
}

TEST_CASE("die") {
    const RandomSource source(kDefaultSeed);
    for (int t = 0; t < 1000; ++t) {
        auto stream = source.stream(t);
        CHECK(die_measure(DieState::on_table(4), stream).face == 4);
    }
    const int rolls = 100000;
    std::map<int, int> counts;
    for (int t = 0; t < rolls; ++t) {
        auto stream = source.stream(t);
        const auto roll = die_measure(DieState::off_table(), stream);
        ++counts[roll.face];
        CHECK(roll.after.face() == roll.face);
        if (t < 2000) CHECK(die_measure(roll.after, stream).face == roll.face);
    }
    REQUIRE(counts.size() == 6);
    for (const auto& [face, c] : counts) CHECK(std::abs(c / double(rolls) - 1.0 / 6) <= 3 * binomial_sigma(1.0 / 6, rolls));
    CHECK_THROWS_AS(DieState::on_table(7), InvalidState);
    CHECK_THROWS_AS(DieState::on_table(0), InvalidState);
}

TEST_CASE("sample and run agree") {
    const PreparedMeasurement prepared(DensityOperator<double>::maximally_mixed(4), Obs::canonical(4));
    const RandomSource source(9);
    for (int t = 0; t < 100; ++t) {
        auto a = source.stream(t), b = source.stream(t);
        CHECK(prepared.sample(MembraneModel::uniform(), a).elementary == prepared.run(MembraneModel::uniform(), b).trace.elementary_outcome);
    }
}
