#pragma once

// JSON and CSV encodings of states, observables, traces and reports.
// Every floating-point number is rounded to 12 significant digits before it
// is written, so identical runs produce byte-identical files.

#include <nlohmann/json.hpp>

#include <string>

#include "hmsim/membrane.hpp"
#include "hmsim/statistics.hpp"

namespace hmsim {

using json = nlohmann::json;

inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kSignificantDigits = 12;

double round_significant(double x, int digits = kSignificantDigits);

/// {"dimension", "re", "im"} with row-major nested arrays.
json to_json(const Density& d);
Density density_from_json(const json& j);

/// {"re": [...], "im": [...]}; amplitudes are normalized on read.
json to_json(const PureState<double>& psi);
PureState<double> pure_state_from_json(const json& j);

/// {"dimension", "eigenstates": [{"re", "im"}, ...], "eigenvalue_labels"}.
json to_json(const Obs& o);
Obs observable_from_json(const json& j);

json to_json(const Bloch& r);
json to_json(const CollapseTrace& t);
json to_json(const ConvergenceReport& r);
json to_json(const BornVerification& v);
json to_json(const DieReport& d);

/// Header: label,expected,observed,deviation,sigma (one row per block).
inline constexpr const char* kReportCsvHeader = "label,expected,observed,deviation,sigma";
std::string to_csv(const ConvergenceReport& r);
/// Same columns prefixed with the state index.
std::string to_csv(const BornVerification& v);

/// Number formatted with 12 significant digits, as used in CSV output.
std::string format_number(double x);

}  // namespace hmsim
