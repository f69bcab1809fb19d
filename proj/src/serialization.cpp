#include "hmsim/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace hmsim {

namespace {

json real_vector(const Vec& v) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(round_significant(v(i)));
    return arr;
}

json rounded(const std::vector<double>& v) {
    json arr = json::array();
    for (double x : v) arr.push_back(round_significant(x));
    return arr;
}

json matrix_part(const ComplexMatrix<double>& m, bool imag) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < m.cols(); ++k) row.push_back(round_significant(imag ? m(i, k).imag() : m(i, k).real()));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<double> number_list(const json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : j) {
        if (!x.is_number()) throw ConfigError(std::string(what) + ": expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

ComplexVector<double> complex_vector(const json& j, const char* what) {
    if (!j.is_object() || !j.contains("re")) throw ConfigError(std::string(what) + ": expected an object with \"re\" (and optional \"im\")");
    const auto re = number_list(j.at("re"), what);
    const auto im = j.contains("im") ? number_list(j.at("im"), what) : std::vector<double>(re.size(), 0.0);
    if (im.size() != re.size()) throw ConfigError(std::string(what) + ": \"re\" and \"im\" differ in length");
    ComplexVector<double> v(static_cast<int>(re.size()));
    for (std::size_t i = 0; i < re.size(); ++i) v(static_cast<int>(i)) = {re[i], im[i]};
    return v;
}

}  // namespace

double round_significant(double x, int digits) {
    if (x == 0.0 || !std::isfinite(x)) return x == 0.0 ? 0.0 : x;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return std::strtod(buf, nullptr);
}

std::string format_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", kSignificantDigits, x == 0.0 ? 0.0 : x);
    return buf;
}

json to_json(const Density& d) {
    return {{"dimension", d.dimension()}, {"re", matrix_part(d.matrix(), false)}, {"im", matrix_part(d.matrix(), true)}};
}

Density density_from_json(const json& j) {
    if (!j.is_object() || !j.contains("re")) throw ConfigError("density: expected an object with \"re\" and \"im\"");
    const json& re = j.at("re");
    if (!re.is_array() || re.empty()) throw ConfigError("density.re: expected a square array of rows");
    const int n = static_cast<int>(re.size());
    if (j.contains("dimension") && j.at("dimension") != n) throw ConfigError("density.dimension does not match the matrix size");
    ComplexMatrix<double> m(n, n);
    for (int i = 0; i < n; ++i) {
        const auto row_re = number_list(re.at(static_cast<std::size_t>(i)), "density.re");
        const auto row_im = j.contains("im") ? number_list(j.at("im").at(static_cast<std::size_t>(i)), "density.im") : std::vector<double>(row_re.size(), 0.0);
        if (static_cast<int>(row_re.size()) != n || static_cast<int>(row_im.size()) != n) throw ConfigError("density: matrix is not square");
        for (int k = 0; k < n; ++k) m(i, k) = {row_re[static_cast<std::size_t>(k)], row_im[static_cast<std::size_t>(k)]};
    }
    return Density::from_matrix(std::move(m));
}

json to_json(const PureState<double>& psi) {
    Vec re = psi.amplitudes().real();
    Vec im = psi.amplitudes().imag();
    return {{"re", real_vector(re)}, {"im", real_vector(im)}};
}

PureState<double> pure_state_from_json(const json& j) { return PureState<double>::normalized(complex_vector(j, "pure state")); }

json to_json(const Obs& o) {
    json states = json::array();
    for (const auto& e : o.eigenstates()) states.push_back(to_json(e));
    return {{"dimension", o.dimension()}, {"eigenstates", std::move(states)}, {"eigenvalue_labels", rounded(o.labels())}};
}

Obs observable_from_json(const json& j) {
    if (!j.is_object() || !j.contains("eigenstates")) throw ConfigError("observable: expected an object with \"eigenstates\"");
    const json& list = j.at("eigenstates");
    if (!list.is_array()) throw ConfigError("observable.eigenstates: expected an array");
    std::vector<PureState<double>> states;
    for (const auto& e : list) states.push_back(pure_state_from_json(e));
    std::vector<double> labels;
    if (j.contains("eigenvalue_labels")) {
        labels = number_list(j.at("eigenvalue_labels"), "observable.eigenvalue_labels");
    } else {
        for (std::size_t i = 0; i < states.size(); ++i) labels.push_back(static_cast<double>(i));
    }
    if (j.contains("dimension") && j.at("dimension") != static_cast<int>(states.size())) {
        throw ConfigError("observable.dimension does not match the number of eigenstates");
    }
    return Obs(std::move(states), std::move(labels));
}

json to_json(const Bloch& r) { return real_vector(r.coords()); }

json to_json(const CollapseTrace& t) {
    json j = {{"initial_state", to_json(t.initial_state)},
              {"on_membrane_point", to_json(t.on_membrane_point)},
              {"breaking_point", to_json(t.breaking_point)},
              {"elementary_outcome", t.elementary_outcome},
              {"outcome_block", t.outcome_block},
              {"outcome_label", round_significant(t.outcome_label)},
              {"intermediate_point", to_json(t.intermediate_point)},
              {"final_state", to_json(t.final_state)}};
    j["polar_angle"] = t.polar_angle ? json(round_significant(*t.polar_angle)) : json(nullptr);
    return j;
}

json to_json(const ConvergenceReport& r) {
    json j = {{"schema_version", kReportSchemaVersion},
              {"dimension", r.dimension},
              {"membrane", r.membrane},
              {"sigma_model", r.sigma_model},
              {"trials", r.trials},
              {"master_seed", r.master_seed},
              {"tolerance_sigmas", round_significant(r.tolerance_sigmas)},
              {"blocks", r.blocks},
              {"labels", rounded(r.labels)},
              {"counts", r.counts},
              {"empirical_frequencies", rounded(r.empirical_frequencies)},
              {"oracle_probabilities", rounded(r.oracle_probabilities)},
              {"per_block_deviation", rounded(r.per_block_deviation)},
              {"per_block_sigma", rounded(r.per_block_sigma)},
              {"oracle_discrepancy", round_significant(r.oracle_discrepancy)},
              {"chi_square",
               {{"statistic", round_significant(r.chi_square.statistic)},
                {"degrees_of_freedom", r.chi_square.degrees_of_freedom},
                {"critical_value", round_significant(r.chi_square.critical_value)},
                {"quantile", kChiSquareQuantile},
                {"retained_bins", r.chi_square.retained_bins},
                {"design_effect", round_significant(r.chi_square.design_effect)},
                {"pass", r.chi_square.pass}}},
              {"deviations_pass", r.deviations_pass},
              {"pass", r.pass}};
    if (r.membranes) j["membranes"] = *r.membranes;
    if (r.cells) j["cells"] = *r.cells;
    return j;
}

json to_json(const BornVerification& v) {
    json states = json::array();
    for (std::size_t s = 0; s < v.states.size(); ++s) {
        const auto& sv = v.states[s];
        json e = {{"index", s},
                  {"state", to_json(sv.state)},
                  {"identity_error", round_significant(sv.identity_error)},
                  {"volume_error", round_significant(sv.volume_error)},
                  {"pass", sv.pass}};
        e["monte_carlo"] = sv.monte_carlo ? to_json(*sv.monte_carlo) : json(nullptr);
        states.push_back(std::move(e));
    }
    return {{"schema_version", kReportSchemaVersion},
            {"dimension", v.dimension},
            {"master_seed", v.master_seed},
            {"identity_tolerance", v.identity_tolerance},
            {"max_identity_error", round_significant(v.max_identity_error)},
            {"states", std::move(states)},
            {"pass", v.pass}};
}

json to_json(const DieReport& d) {
    json j = to_json(d.report);
    j["repeat_frequency"] = round_significant(d.repeat_frequency);
    j["pass"] = d.pass;
    return j;
}

namespace {
void csv_rows(std::ostringstream& out, const ConvergenceReport& r, const std::string& prefix) {
    for (std::size_t b = 0; b < r.counts.size(); ++b) {
        out << prefix << format_number(r.labels[b]) << ',' << format_number(r.oracle_probabilities[b]) << ',' << format_number(r.empirical_frequencies[b]) << ','
            << format_number(r.per_block_deviation[b]) << ',' << format_number(r.per_block_sigma[b]) << '\n';
    }
}
}  // namespace

std::string to_csv(const ConvergenceReport& r) {
    std::ostringstream out;
    out << kReportCsvHeader << '\n';
    csv_rows(out, r, "");
    return out.str();
}

std::string to_csv(const BornVerification& v) {
    std::ostringstream out;
    out << "state," << kReportCsvHeader << '\n';
    for (std::size_t s = 0; s < v.states.size(); ++s) {
        if (v.states[s].monte_carlo) csv_rows(out, *v.states[s].monte_carlo, std::to_string(s) + ",");
    }
    return out.str();
}

}  // namespace hmsim
