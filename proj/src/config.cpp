#include "hmsim/config.hpp"

#include <set>

namespace hmsim {

namespace {

const std::set<std::string> kKnownFields = {"schema_version", "dimension", "state",       "observable",          "membrane",  "trials",
                                            "seed",           "tolerance_sigmas", "cells", "membranes", "trials_per_membrane", "fixed_cell"};

[[noreturn]] void fail(const std::string& field, const std::string& message) { throw ConfigError("config field '" + field + "': " + message); }

const json& require(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) fail(path + key, "missing");
    return obj.at(key);
}

std::int64_t integer(const json& j, const std::string& field) {
    if (!j.is_number_integer()) fail(field, "expected an integer");
    return j.get<std::int64_t>();
}

std::uint64_t positive_count(const json& j, const std::string& field) {
    if (j.is_number_unsigned()) {
        const auto v = j.get<std::uint64_t>();
        if (v >= 1) return v;
    } else if (j.is_number_integer() && j.get<std::int64_t>() >= 1) {
        return static_cast<std::uint64_t>(j.get<std::int64_t>());
    }
    fail(field, "expected a positive integer");
}

double number(const json& j, const std::string& field) {
    if (!j.is_number()) fail(field, "expected a number");
    return j.get<double>();
}

std::vector<double> numbers(const json& j, const std::string& field) {
    if (!j.is_array()) fail(field, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

template <typename Fn>
auto rethrow_as_config(const std::string& field, Fn fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        fail(field, e.what());
    }
}

Obs parse_observable(const json& j, int n) {
    const std::string field = "observable";
    if (j.is_null()) return Obs::canonical(n);
    if (!j.is_object()) fail(field, "expected an object");
    return rethrow_as_config(field, [&]() -> Obs {
        std::vector<double> labels;
        if (j.contains("eigenvalue_labels")) labels = numbers(j.at("eigenvalue_labels"), field + ".eigenvalue_labels");
        if (j.contains("eigenstates")) {
            if (!j.contains("eigenvalue_labels")) {
                for (std::size_t i = 0; i < j.at("eigenstates").size(); ++i) labels.push_back(static_cast<double>(i));
            }
            json copy = j;
            copy["eigenvalue_labels"] = labels;
            Obs o = observable_from_json(copy);
            if (o.dimension() != n) fail(field + ".eigenstates", "expected " + std::to_string(n) + " eigenstates");
            return o;
        }
        if (j.contains("preset") && !j.at("preset").is_string()) fail(field + ".preset", "expected a string");
        const std::string preset = j.value("preset", "canonical");
        if (preset == "canonical") {
            if (!labels.empty() && static_cast<int>(labels.size()) != n) fail(field + ".eigenvalue_labels", "expected " + std::to_string(n) + " labels");
            return Obs::canonical(n, labels);
        }
        if (preset == "spin") {
            if (n != 2) fail(field + ".preset", "\"spin\" requires dimension 2");
            const auto axis = numbers(require(j, "axis", field + "."), field + ".axis");
            if (axis.size() != 3) fail(field + ".axis", "expected three components");
            return spin_observable<double>(Eigen::Vector3d(axis[0], axis[1], axis[2]));
        }
        fail(field + ".preset", "unknown preset \"" + preset + "\" (expected canonical or spin)");
    });
}

Density parse_state(const json& j, int n, const Basis& basis) {
    const std::string field = "state";
    if (!j.is_object()) fail(field, "expected an object");
    return rethrow_as_config(field, [&]() -> Density {
        if (j.contains("pure")) {
            const PureState<double> psi = pure_state_from_json(j.at("pure"));
            if (psi.dimension() != n) fail(field + ".pure", "expected " + std::to_string(n) + " amplitudes");
            return pure_to_density(psi);
        }
        if (j.contains("bloch")) {
            const auto coords = numbers(j.at("bloch"), field + ".bloch");
            const Vec r = Eigen::Map<const Vec>(coords.data(), static_cast<Eigen::Index>(coords.size()));
            return bloch_to_density(Bloch(n, r), basis);
        }
        if (j.contains("density")) {
            Density d = density_from_json(j.at("density"));
            if (d.dimension() != n) fail(field + ".density", "expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
            return d;
        }
        const std::string preset = j.contains("preset") && j.at("preset").is_string() ? j.at("preset").get<std::string>() : "";
        if (preset == "maximally_mixed") return Density::maximally_mixed(n);
        if (preset == "eigenstate") {
            const auto k = integer(require(j, "index", field + "."), field + ".index");
            if (k < 0 || k >= n) fail(field + ".index", "must be in [0, " + std::to_string(n) + ")");
            return pure_to_density(PureState<double>::basis(n, static_cast<int>(k)));
        }
        if (preset == "spin_angle") {
            if (n != 2) fail(field + ".preset", "\"spin_angle\" requires dimension 2");
            return pure_to_density(spin_state_at_angle(number(require(j, "theta", field + "."), field + ".theta")));
        }
        fail(field, "expected one of \"pure\", \"bloch\", \"density\" or a preset (maximally_mixed, eigenstate, spin_angle)");
    });
}

MembraneModel parse_membrane(const json& j) {
    const std::string field = "membrane";
    if (!j.is_object()) fail(field, "expected an object");
    const json& kind_json = require(j, "kind", field + ".");
    if (!kind_json.is_string()) fail(field + ".kind", "expected a string");
    const std::string kind = kind_json.get<std::string>();
    return rethrow_as_config(field, [&]() -> MembraneModel {
        if (kind == "uniform") return MembraneModel::uniform();
        if (kind == "solipsistic") return MembraneModel::solipsistic();
        if (kind == "cellular") return MembraneModel::cellular(numbers(require(j, "cell_weights", field + "."), field + ".cell_weights"));
        if (kind == "pure") {
            return MembraneModel::pure(static_cast<int>(integer(require(j, "cells", field + "."), field + ".cells")),
                                       static_cast<int>(integer(require(j, "cell", field + "."), field + ".cell")));
        }
        fail(field + ".kind", "unknown kind \"" + kind + "\" (expected uniform, solipsistic, cellular or pure)");
    });
}

}  // namespace

ExperimentSpec parse_experiment(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config: expected a JSON object at the top level");
    for (const auto& item : doc.items()) {
        if (!kKnownFields.count(item.key())) fail(item.key(), "unknown field");
    }
    if (doc.contains("schema_version") && integer(doc.at("schema_version"), "schema_version") != kReportSchemaVersion) {
        fail("schema_version", "unsupported version (expected " + std::to_string(kReportSchemaVersion) + ")");
    }
    const auto n = integer(require(doc, "dimension", ""), "dimension");
    if (n < 2 || n > 16) fail("dimension", "must be in [2, 16]");
    const int dim = static_cast<int>(n);
    const Basis basis(dim);

    ExperimentSpec spec{parse_state(require(doc, "state", ""), dim, basis), parse_observable(doc.value("observable", json()), dim)};
    if (doc.contains("membrane")) spec.membrane = parse_membrane(doc.at("membrane"));
    if (doc.contains("trials")) spec.trials = positive_count(doc.at("trials"), "trials");
    if (doc.contains("seed")) {
        const json& s = doc.at("seed");
        if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<std::int64_t>() < 0)) fail("seed", "expected a non-negative integer");
        spec.seed = s.get<std::uint64_t>();
    }
    if (doc.contains("tolerance_sigmas")) {
        const double t = number(doc.at("tolerance_sigmas"), "tolerance_sigmas");
        if (!(t > 0.0)) fail("tolerance_sigmas", "must be positive");
        spec.tolerance_sigmas = t;
    }
    if (doc.contains("cells")) spec.cells = static_cast<int>(positive_count(doc.at("cells"), "cells"));
    if (doc.contains("membranes")) spec.membranes = static_cast<int>(positive_count(doc.at("membranes"), "membranes"));
    if (doc.contains("trials_per_membrane")) spec.trials_per_membrane = positive_count(doc.at("trials_per_membrane"), "trials_per_membrane");
    if (doc.contains("fixed_cell")) {
        const json& f = doc.at("fixed_cell");
        const int cells = spec.cells.value_or(50);
        if (f.is_string()) {
            if (f.get<std::string>() != "near_first_vertex") fail("fixed_cell", "expected an index or \"near_first_vertex\"");
            spec.fixed_cell = CellularPartition(cells, dim).cell_near_first_vertex();
        } else {
            const auto c = integer(f, "fixed_cell");
            if (c < 0 || c >= cells) fail("fixed_cell", "must be in [0, cells)");
            spec.fixed_cell = static_cast<int>(c);
        }
    }
    return spec;
}

ExperimentSpec parse_experiment_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_experiment(doc);
}

UniversalAverageConfig universal_average_config(const ExperimentSpec& spec, std::uint64_t seed, int workers) {
    UniversalAverageConfig cfg{spec.state, spec.observable};
    cfg.cell_count = spec.cells.value_or(50);
    cfg.membranes = spec.membranes.value_or(200);
    cfg.trials_per_membrane = spec.trials_per_membrane.value_or(2000);
    cfg.master_seed = seed;
    cfg.tolerance_sigmas = spec.tolerance_sigmas.value_or(4.0);
    cfg.workers = workers;
    cfg.fixed_cell = spec.fixed_cell;
    return cfg;
}

}  // namespace hmsim
