#pragma once

// JSON experiment configuration. Example:
//
//   {
//     "dimension": 3,
//     "state": {"pure": {"re": [1, 1, 0], "im": [0, 0, 1]}},
//     "observable": {"preset": "canonical", "eigenvalue_labels": [1, 1, 2]},
//     "membrane": {"kind": "uniform"},
//     "trials": 100000,
//     "seed": 45324
//   }
//
// Universal-average runs use "cells", "membranes", "trials_per_membrane" and
// optionally "fixed_cell" (an index or "near_first_vertex").

#include <cstdint>
#include <optional>
#include <string>

#include "hmsim/serialization.hpp"
#include "hmsim/statistics.hpp"

namespace hmsim {

struct ExperimentSpec {
    Density state;
    Obs observable;
    std::optional<MembraneModel> membrane{};
    std::optional<std::uint64_t> trials{};
    std::optional<std::uint64_t> seed{};
    std::optional<double> tolerance_sigmas{};
    std::optional<int> cells{};
    std::optional<int> membranes{};
    std::optional<std::uint64_t> trials_per_membrane{};
    std::optional<int> fixed_cell{};

    int dimension() const { return observable.dimension(); }
};

/// Throws ConfigError naming the offending field.
ExperimentSpec parse_experiment(const json& doc);
/// Parses text; JSON syntax errors carry line and column.
ExperimentSpec parse_experiment_text(const std::string& text);

/// Universal-average settings; m = 50, K = 200 and 2000 trials per membrane when omitted.
UniversalAverageConfig universal_average_config(const ExperimentSpec& spec, std::uint64_t seed, int workers);

}  // namespace hmsim
