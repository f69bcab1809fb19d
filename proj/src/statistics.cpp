#include "hmsim/statistics.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace hmsim {

namespace {

constexpr std::uint64_t kMembraneWeightsTag = 0x4D454D42;  // "MEMB"
constexpr std::uint64_t kStateTag = 0x53544154;            // "STAT"

/// Splits [0, count) into contiguous shards, runs fn(begin, end, shard) on up
/// to `workers` threads and returns the per-shard results in shard order.
template <typename Result, typename Fn>
std::vector<Result> run_sharded(std::uint64_t count, int workers, Fn fn) {
    const auto shards = static_cast<std::uint64_t>(std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::max(workers, 1)), 1, std::max<std::uint64_t>(count, 1)));
    std::vector<Result> results(shards);
    auto bounds = [&](std::uint64_t s) { return count * s / shards; };
    if (shards == 1) {
        results[0] = fn(0, count, 0);
        return results;
    }
    std::vector<std::thread> threads;
    threads.reserve(shards);
    std::vector<std::exception_ptr> errors(shards);
    for (std::uint64_t s = 0; s < shards; ++s) {
        threads.emplace_back([&, s] {
            try {
                results[s] = fn(bounds(s), bounds(s + 1), s);
            } catch (...) {
                errors[s] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

std::vector<std::uint64_t> sum_counts(const std::vector<std::vector<std::uint64_t>>& parts, std::size_t size) {
    std::vector<std::uint64_t> total(size, 0);
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < size; ++i) total[i] += p[i];
    }
    return total;
}

std::vector<double> frequencies(const std::vector<std::uint64_t>& counts) {
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
    std::vector<double> f(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) f[i] = static_cast<double>(counts[i]) / total;
    return f;
}

ConvergenceReport base_report(const PreparedMeasurement& prepared, const std::string& membrane, std::uint64_t trials, std::uint64_t seed, double tol_sigmas) {
    ConvergenceReport r;
    r.dimension = prepared.dimension();
    r.membrane = membrane;
    r.trials = trials;
    r.master_seed = seed;
    r.tolerance_sigmas = tol_sigmas;
    r.blocks = prepared.observable().blocks();
    for (int b = 0; b < prepared.observable().block_count(); ++b) r.labels.push_back(prepared.observable().block_label(b));
    r.oracle_probabilities = checked_oracle(prepared, &r.oracle_discrepancy);
    return r;
}

/// Fills deviations and the pass flag; per_block_sigma must already be set.
void finish_report(ConvergenceReport& r) {
    r.empirical_frequencies = frequencies(r.counts);
    r.per_block_deviation.resize(r.counts.size());
    r.deviations_pass = true;
    for (std::size_t b = 0; b < r.counts.size(); ++b) {
        r.per_block_deviation[b] = std::abs(r.empirical_frequencies[b] - r.oracle_probabilities[b]);
        if (!(r.per_block_deviation[b] <= r.tolerance_sigmas * r.per_block_sigma[b])) r.deviations_pass = false;
    }
    r.pass = r.deviations_pass && r.chi_square.pass;
}

std::vector<double> binomial_sigmas(const std::vector<double>& p, std::uint64_t trials) {
    std::vector<double> s(p.size());
    for (std::size_t b = 0; b < p.size(); ++b) s[b] = std::sqrt(p[b] * (1.0 - p[b]) / static_cast<double>(trials));
    return s;
}

void validate(std::uint64_t trials, double tol_sigmas) {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (!(tol_sigmas > 0.0)) throw ConfigError("tolerance_sigmas must be positive");
}

}  // namespace

double chi_square_quantile(int degrees_of_freedom, double probability) {
    if (degrees_of_freedom <= 0) return 0.0;
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(degrees_of_freedom), probability);
}

ChiSquareResult chi_square_check(const std::vector<std::uint64_t>& counts, const std::vector<double>& expected, double design_effect) {
    if (counts.size() != expected.size()) throw DimensionMismatch("chi_square_check: counts and expected differ in size");
    const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    if (total == 0) throw Error("chi_square_check: all counts are zero");
    if (!(design_effect > 0.0)) throw Error("chi_square_check: design effect must be positive");

    const double threshold = 10.0 / static_cast<double>(total);
    struct Bin {
        double p = 0.0;
        std::uint64_t observed = 0;
    };
    std::vector<Bin> bins;
    Bin pooled;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (expected[i] >= threshold) {
            bins.push_back({expected[i], counts[i]});
        } else {
            pooled.p += expected[i];
            pooled.observed += counts[i];
        }
    }
    if (pooled.p >= threshold || bins.empty()) {
        bins.push_back(pooled);
    } else if (pooled.observed > 0 || pooled.p > 0.0) {
        auto smallest = std::min_element(bins.begin(), bins.end(), [](const Bin& a, const Bin& b) { return a.p < b.p; });
        smallest->p += pooled.p;
        smallest->observed += pooled.observed;
    }

    ChiSquareResult result;
    result.retained_bins = static_cast<int>(bins.size());
    result.degrees_of_freedom = result.retained_bins - 1;
    result.design_effect = design_effect;
    if (result.degrees_of_freedom > 0) {
        double stat = 0.0;
        for (const Bin& bin : bins) {
            const double e = bin.p * static_cast<double>(total);
            const double d = static_cast<double>(bin.observed) - e;
            stat += d * d / e;
        }
        result.statistic = stat / design_effect;
    }
    result.critical_value = chi_square_quantile(result.degrees_of_freedom);
    result.pass = result.statistic <= result.critical_value;
    return result;
}

double ConvergenceReport::max_deviation() const {
    return per_block_deviation.empty() ? 0.0 : *std::max_element(per_block_deviation.begin(), per_block_deviation.end());
}

std::vector<std::uint64_t> count_outcomes(const PreparedMeasurement& prepared, const MembraneModel& model, const RandomSource& source,
                                          std::uint64_t first, std::uint64_t count, int workers) {
    const auto blocks = static_cast<std::size_t>(prepared.observable().block_count());
    auto parts = run_sharded<std::vector<std::uint64_t>>(count, workers, [&](std::uint64_t begin, std::uint64_t end, std::uint64_t) {
        std::vector<std::uint64_t> local(blocks, 0);
        for (std::uint64_t t = begin; t < end; ++t) {
            TrialStream stream = source.stream(first + t);
            ++local[static_cast<std::size_t>(prepared.sample(model, stream).block)];
        }
        return local;
    });
    return sum_counts(parts, blocks);
}

std::vector<double> checked_oracle(const PreparedMeasurement& prepared, double* discrepancy) {
    const Weights born = born_probabilities(prepared.state(), prepared.observable());
    const Vec born_blocks = block_weights(born, prepared.observable());
    const Vec geometric = prepared.block_probabilities();
    const double diff = (born_blocks - geometric).cwiseAbs().maxCoeff();
    if (!(diff <= kIdentityTolerance)) {
        throw Error("Born oracle and membrane geometry disagree by " + std::to_string(diff));
    }
    if (discrepancy) *discrepancy = diff;
    return {born_blocks.data(), born_blocks.data() + born_blocks.size()};
}

ConvergenceReport simulate_statistics(const ExperimentConfig& config) {
    validate(config.trials, config.tolerance_sigmas);
    const PreparedMeasurement prepared(config.state, config.observable);
    ConvergenceReport r = base_report(prepared, config.membrane.name(), config.trials, config.master_seed, config.tolerance_sigmas);
    if (config.membrane.kind() == MembraneModel::Kind::cellular) r.cells = config.membrane.cell_count();
    r.counts = count_outcomes(prepared, config.membrane, RandomSource(config.master_seed), 0, config.trials, config.workers);
    r.per_block_sigma = binomial_sigmas(r.oracle_probabilities, config.trials);
    r.chi_square = chi_square_check(r.counts, r.oracle_probabilities);
    finish_report(r);
    return r;
}

ConvergenceReport universal_average_experiment(const UniversalAverageConfig& config) {
    validate(config.trials_per_membrane, config.tolerance_sigmas);
    if (config.cell_count < 1) throw ConfigError("cell count must be >= 1");
    if (config.membranes < 1) throw ConfigError("membrane count must be >= 1");

    if (config.fixed_cell) {
        ExperimentConfig single{config.state, config.observable, MembraneModel::pure(config.cell_count, *config.fixed_cell), config.trials_per_membrane,
                                config.master_seed, config.tolerance_sigmas, config.workers};
        ConvergenceReport r = simulate_statistics(single);
        r.membrane = "cellular-surrogate-fixed";
        r.membranes = 1;
        return r;
    }
    if (config.cell_count == 1) {
        // A single cell of weight 1 is the uniform membrane.
        ExperimentConfig uniform{config.state,
                                 config.observable,
                                 MembraneModel::uniform(),
                                 config.trials_per_membrane * static_cast<std::uint64_t>(config.membranes),
                                 config.master_seed,
                                 config.tolerance_sigmas,
                                 config.workers};
        ConvergenceReport r = simulate_statistics(uniform);
        r.membranes = config.membranes;
        r.cells = 1;
        return r;
    }

    const PreparedMeasurement prepared(config.state, config.observable);
    const auto k_count = static_cast<std::uint64_t>(config.membranes);
    const std::uint64_t per = config.trials_per_membrane;
    ConvergenceReport r = base_report(prepared, "cellular-surrogate", per * k_count, config.master_seed, config.tolerance_sigmas);
    r.sigma_model = "between-membrane";
    r.membranes = config.membranes;
    r.cells = config.cell_count;

    const RandomSource trials_source(config.master_seed);
    const RandomSource weight_source = trials_source.derive(kMembraneWeightsTag);
    const auto blocks = static_cast<std::size_t>(prepared.observable().block_count());

    // Per-membrane counts, membrane k using trial indices [k * per, (k + 1) * per).
    auto parts = run_sharded<std::vector<std::vector<std::uint64_t>>>(k_count, config.workers, [&](std::uint64_t begin, std::uint64_t end, std::uint64_t) {
        std::vector<std::vector<std::uint64_t>> local;
        for (std::uint64_t k = begin; k < end; ++k) {
            TrialStream ws = weight_source.stream(k);
            std::vector<double> w(static_cast<std::size_t>(config.cell_count));
            for (double& x : w) x = ws.exponential();
            const double total = std::accumulate(w.begin(), w.end(), 0.0);
            for (double& x : w) x /= total;
            const MembraneModel model = MembraneModel::cellular(std::move(w));
            local.push_back(count_outcomes(prepared, model, trials_source, k * per, per, 1));
        }
        return local;
    });
    std::vector<std::vector<std::uint64_t>> per_membrane;
    for (auto& p : parts) {
        for (auto& c : p) per_membrane.push_back(std::move(c));
    }
    r.counts = sum_counts(per_membrane, blocks);

    // Standard error of the grand mean from the spread of per-membrane frequencies.
    const double k = static_cast<double>(k_count);
    r.per_block_sigma.assign(blocks, 0.0);
    double deff_sum = 0.0;
    int deff_terms = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        double mean = 0.0;
        for (const auto& c : per_membrane) mean += static_cast<double>(c[b]) / static_cast<double>(per);
        mean /= k;
        double ss = 0.0;
        for (const auto& c : per_membrane) {
            const double d = static_cast<double>(c[b]) / static_cast<double>(per) - mean;
            ss += d * d;
        }
        const double p = r.oracle_probabilities[b];
        const double binomial_var = p * (1.0 - p) / static_cast<double>(r.trials);
        double var = k_count > 1 ? ss / (k - 1.0) / k : binomial_var;
        r.per_block_sigma[b] = std::sqrt(var);
        if (binomial_var > 0.0) {
            deff_sum += var / binomial_var;
            ++deff_terms;
        }
    }
    const double deff = deff_terms > 0 ? deff_sum / deff_terms : 1.0;
    r.chi_square = chi_square_check(r.counts, r.oracle_probabilities, deff > 0.0 ? deff : 1.0);
    finish_report(r);
    return r;
}

BornVerification verify_born(int n, int states, std::uint64_t trials, std::uint64_t master_seed, double tolerance_sigmas, int workers) {
    if (n < 2 || n > kMaxVerifyDimension) throw InvalidDimension("verify_born supports 2 <= N <= 8, got " + std::to_string(n));
    if (states < 1) throw ConfigError("states must be >= 1");
    const Basis basis(n);
    const Obs observable = Obs::canonical(n);
    const RandomSource source(master_seed);
    const RandomSource state_source = source.derive(kStateTag);

    BornVerification out{n, master_seed, kIdentityTolerance, 0.0, {}, true};
    for (int s = 0; s < states; ++s) {
        TrialStream stream = state_source.stream(static_cast<std::uint64_t>(s));
        PureState<double> psi = random_pure_state(n, stream);
        const Density d = pure_to_density(psi);
        const PreparedMeasurement prepared(d, observable, basis);
        const Weights born = born_probabilities(d, observable);
        const Weights& geometric = prepared.membrane_weights();
        const Weights volumes = subsimplex_volume_fractions(prepared.on_membrane_point(), prepared.simplex());
        const double identity = (geometric.weights() - born.weights()).cwiseAbs().maxCoeff();
        const double volume = (volumes.weights() - geometric.weights()).cwiseAbs().maxCoeff();

        StateVerification sv{std::move(psi), identity, volume, std::nullopt, identity <= kIdentityTolerance && volume <= kIdentityTolerance};
        if (trials > 0) {
            ExperimentConfig cfg{d, observable, MembraneModel::uniform(), trials, source.derive(static_cast<std::uint64_t>(s)).master_seed(), tolerance_sigmas,
                                 workers};
            sv.monte_carlo = simulate_statistics(cfg);
            sv.pass = sv.pass && sv.monte_carlo->pass;
        }
        out.max_identity_error = std::max(out.max_identity_error, identity);
        out.pass = out.pass && sv.pass;
        out.states.push_back(std::move(sv));
    }
    return out;
}

DieReport die_experiment(const DieState& start, std::uint64_t rolls, std::uint64_t master_seed, int workers) {
    validate(rolls, 4.0);
    const Basis basis(kDieFaces);
    const Obs observable = die_observable();
    const MembraneModel membrane = MembraneModel::solipsistic();
    const PreparedMeasurement initial(die_density(start), observable, basis);
    std::vector<PreparedMeasurement> settled;
    for (int face = 1; face <= kDieFaces; ++face) settled.emplace_back(die_density(DieState::on_table(face)), observable, basis);

    ConvergenceReport r = base_report(initial, membrane.name(), rolls, master_seed, 4.0);
    const RandomSource source(master_seed);
    struct Tally {
        std::vector<std::uint64_t> counts = std::vector<std::uint64_t>(kDieFaces, 0);
        std::uint64_t repeats = 0;
    };
    auto parts = run_sharded<Tally>(rolls, workers, [&](std::uint64_t begin, std::uint64_t end, std::uint64_t) {
        Tally local;
        for (std::uint64_t t = begin; t < end; ++t) {
            TrialStream stream = source.stream(t);
            const SampledOutcome first = initial.sample(membrane, stream);
            ++local.counts[static_cast<std::size_t>(first.block)];
            const SampledOutcome again = settled[static_cast<std::size_t>(first.block)].sample(membrane, stream);
            if (again.block == first.block) ++local.repeats;
        }
        return local;
    });
    r.counts.assign(kDieFaces, 0);
    std::uint64_t repeats = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < kDieFaces; ++i) r.counts[static_cast<std::size_t>(i)] += p.counts[static_cast<std::size_t>(i)];
        repeats += p.repeats;
    }
    r.per_block_sigma = binomial_sigmas(r.oracle_probabilities, rolls);
    r.chi_square = chi_square_check(r.counts, r.oracle_probabilities);
    finish_report(r);
    const double repeat_frequency = static_cast<double>(repeats) / static_cast<double>(rolls);
    const bool pass = r.pass && repeats == rolls;
    return {std::move(r), repeat_frequency, pass};
}

}  // namespace hmsim
