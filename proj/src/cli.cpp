#include "hmsim/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include "hmsim/config.hpp"
#include "hmsim/serialization.hpp"
#include "hmsim/statistics.hpp"

namespace hmsim::cli {

namespace {

struct CommonOptions {
    std::optional<std::uint64_t> seed;
    std::string format = "json";
    std::string out_path;
    int workers = 1;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--seed", opts.seed, "Master seed (default: HM_SIM_SEED or 0xB10C)");
    cmd->add_option("--format", opts.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--out", opts.out_path, "Write the report to this file instead of stdout");
    cmd->add_option("--workers", opts.workers, "Worker thread hint; results do not depend on it")->check(CLI::Range(1, 1024));
}

/// --seed, then the config's seed, then HM_SIM_SEED, then the fixed default.
std::uint64_t resolve_seed(const CommonOptions& opts, std::optional<std::uint64_t> from_config = std::nullopt) {
    if (opts.seed) return *opts.seed;
    if (from_config) return *from_config;
    if (const char* env = std::getenv("HM_SIM_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            const std::uint64_t v = std::stoull(env, &used, 0);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("HM_SIM_SEED is not an unsigned integer: ") + env);
    }
    return kDefaultSeed;
}

json envelope(const std::string& command, json parameters, json result, bool pass) {
    return {{"schema_version", kReportSchemaVersion}, {"command", command}, {"parameters", std::move(parameters)}, {"result", std::move(result)}, {"pass", pass}};
}

void emit(const CommonOptions& opts, const std::string& text, std::ostream& out) {
    if (opts.out_path.empty()) {
        out << text;
        return;
    }
    std::ofstream file(opts.out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw ConfigError("cannot open output file " + opts.out_path);
    file << text;
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

DieState parse_die_start(const std::string& s) {
    if (s == "off_table") return DieState::off_table();
    const std::string prefix = "on_table:";
    if (s.rfind(prefix, 0) == 0) {
        const std::string face = s.substr(prefix.size());
        if (face.size() == 1 && face[0] >= '1' && face[0] <= '6') return DieState::on_table(face[0] - '0');
        throw ConfigError("invalid die face '" + face + "' (expected 1..6)");
    }
    throw ConfigError("invalid die start state '" + s + "' (expected off_table or on_table:<face>)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hidden-measurement simulator: membrane measurements in the extended Bloch representation", "hmsim"};
    app.require_subcommand(1);

    CommonOptions spin_opts, born_opts, die_opts, avg_opts, measure_opts;

    double angle = 0.0;
    std::uint64_t spin_trials = 100000;
    auto* spin = app.add_subcommand("spin-machine", "Uniform elastic band between n and -n; state at polar angle theta");
    spin->add_option("--angle", angle, "Polar angle theta in radians, within [0, pi]")->required();
    spin->add_option("--trials", spin_trials, "Number of measurements")->check(CLI::PositiveNumber);
    add_common(spin, spin_opts);

    int born_dim = 3;
    int born_states = 100;
    std::uint64_t born_trials = 10000;
    auto* born = app.add_subcommand("verify-born", "Geometric identity and Monte Carlo checks on random pure states");
    born->add_option("--dim", born_dim, "Hilbert-space dimension N, 2..8")->required();
    born->add_option("--states", born_states, "Random pure states to check")->check(CLI::PositiveNumber);
    born->add_option("--trials", born_trials, "Monte Carlo trials per state (0 skips the Monte Carlo check)");
    add_common(born, born_opts);

    std::uint64_t rolls = 60000;
    std::string start = "off_table";
    auto* die = app.add_subcommand("die", "Solipsistic six-outcome measurement (upper face of a die)");
    die->add_option("--rolls", rolls, "Number of rolls")->check(CLI::PositiveNumber);
    die->add_option("--start", start, "off_table or on_table:<face>");
    add_common(die, die_opts);

    std::string avg_config;
    auto* avg = app.add_subcommand("universal-average", "Grand average over random cellular membranes");
    avg->add_option("--config", avg_config, "Experiment config (JSON)")->required();
    add_common(avg, avg_opts);

    std::string measure_config;
    auto* measure = app.add_subcommand("measure", "One measurement, dumped as a collapse trace (JSON)");
    measure->add_option("--config", measure_config, "Experiment config (JSON)")->required();
    add_common(measure, measure_opts);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kPass;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kPass;
    } catch (const CLI::ParseError& e) {
        err << "hmsim: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (*spin) {
            if (!(angle >= 0.0 && angle <= std::numbers::pi)) throw ConfigError("--angle must lie in [0, pi]");
            const std::uint64_t seed = resolve_seed(spin_opts);
            ExperimentConfig cfg{pure_to_density(spin_state_at_angle(angle)), Obs::canonical(2, {0.5, -0.5}), MembraneModel::uniform(), spin_trials, seed, 4.0,
                                 spin_opts.workers};
            const ConvergenceReport report = simulate_statistics(cfg);
            const json params = {{"angle", round_significant(angle)}, {"trials", spin_trials}, {"seed", seed}};
            emit(spin_opts, spin_opts.format == "csv" ? to_csv(report) : json_text(envelope("spin-machine", params, to_json(report), report.pass)), out);
            return report.pass ? kPass : kFail;
        }
        if (*born) {
            if (born_dim < 2 || born_dim > kMaxVerifyDimension) throw ConfigError("--dim must be in [2, 8]");
            const std::uint64_t seed = resolve_seed(born_opts);
            const BornVerification v = verify_born(born_dim, born_states, born_trials, seed, 4.0, born_opts.workers);
            const json params = {{"dim", born_dim}, {"states", born_states}, {"trials", born_trials}, {"seed", seed}};
            emit(born_opts, born_opts.format == "csv" ? to_csv(v) : json_text(envelope("verify-born", params, to_json(v), v.pass)), out);
            return v.pass ? kPass : kFail;
        }
        if (*die) {
            const DieState state = parse_die_start(start);
            const std::uint64_t seed = resolve_seed(die_opts);
            const DieReport d = die_experiment(state, rolls, seed, die_opts.workers);
            const json params = {{"rolls", rolls}, {"start", start}, {"seed", seed}};
            emit(die_opts, die_opts.format == "csv" ? to_csv(d.report) : json_text(envelope("die", params, to_json(d), d.pass)), out);
            return d.pass ? kPass : kFail;
        }
        if (*avg) {
            const ExperimentSpec spec = parse_experiment_text(read_file(avg_config));
            if (spec.trials || spec.membrane) throw ConfigError("config field 'trials'/'membrane': not used by universal-average (use trials_per_membrane)");
            const std::uint64_t seed = resolve_seed(avg_opts, spec.seed);
            const UniversalAverageConfig cfg = universal_average_config(spec, seed, avg_opts.workers);
            const ConvergenceReport report = universal_average_experiment(cfg);
            json params = {{"config", avg_config},
                           {"cells", cfg.cell_count},
                           {"membranes", cfg.membranes},
                           {"trials_per_membrane", cfg.trials_per_membrane},
                           {"seed", seed},
                           {"surrogate", "finite family of random cellular membranes"}};
            params["fixed_cell"] = cfg.fixed_cell ? json(*cfg.fixed_cell) : json(nullptr);
            emit(avg_opts, avg_opts.format == "csv" ? to_csv(report) : json_text(envelope("universal-average", params, to_json(report), report.pass)), out);
            return report.pass ? kPass : kFail;
        }
        if (*measure) {
            if (measure_opts.format != "json") throw ConfigError("measure emits JSON only");
            const ExperimentSpec spec = parse_experiment_text(read_file(measure_config));
            const std::uint64_t seed = resolve_seed(measure_opts, spec.seed);
            const MembraneModel model = spec.membrane.value_or(MembraneModel::uniform());
            TrialStream stream = RandomSource(seed).stream(0);
            const MeasurementResult result = run_measurement(spec.state, spec.observable, model, stream);
            const json params = {{"config", measure_config}, {"seed", seed}, {"membrane", model.name()}};
            const json body = {{"outcome_label", round_significant(result.label)}, {"trace", to_json(result.trace)}, {"posterior", to_json(result.posterior)}};
            emit(measure_opts, json_text(envelope("measure", params, body, true)), out);
            return kPass;
        }
    } catch (const ConfigError& e) {
        err << "hmsim: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        err << "hmsim: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

}  // namespace hmsim::cli
