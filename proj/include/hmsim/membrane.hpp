#pragma once

// Stochastic measurement engine. A measurement runs in three stages:
//   1. the state point falls orthogonally onto the membrane (r -> r_par);
//   2. the membrane breaks at a sampled point, which selects an elementary
//      outcome and hence a degeneracy block M;
//   3. the state is purified to the Lüders posterior P_M D P_M / Tr(P_M D P_M).

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "hmsim/bloch.hpp"
#include "hmsim/geometry.hpp"
#include "hmsim/random.hpp"

namespace hmsim {

using Basis = GeneratorBasis<double>;
using Density = DensityOperator<double>;
using Bloch = BlochVector<double>;
using Obs = Observable<double>;
using Simplex = MeasurementSimplex<double>;
using Weights = BarycentricCoordinates<double>;
using Vec = RealVector<double>;

/// Partition of the (N-1)-simplex into m cells of equal uniform measure.
///
/// Cells are boxes of a mixed-radix grid over the stick-breaking coordinates
/// u in [0,1)^(N-1), which map the unit cube onto the simplex with uniform
/// measure preserved:
///     w_k = R_k (1 - (1 - u_k)^(1/(N-1-k))),  R_{k+1} = R_k - w_k,  R_0 = 1.
/// Coordinate 0 measures the distance from the face opposite vertex 0.
class CellularPartition {
public:
    CellularPartition(int cell_count, int n);

    int cell_count() const { return cell_count_; }
    int simplex_dimension() const { return n_; }
    /// Number of grid slots along each stick-breaking coordinate.
    const std::vector<int>& grid() const { return grid_; }

    /// The cell touching vertex 0 (highest slot along coordinate 0, lowest elsewhere).
    int cell_near_first_vertex() const { return grid_.front() - 1; }

    /// Uniformly distributed barycentric weights inside `cell`.
    Vec sample_in_cell(int cell, TrialStream& stream) const;
    int cell_of(const Vec& weights) const;

    Vec weights_from_cube(const Vec& u) const;
    Vec cube_from_weights(const Vec& w) const;

private:
    int cell_count_;
    int n_;
    std::vector<int> grid_;
};

class MembraneModel {
public:
    enum class Kind { uniform, solipsistic, cellular };

    static MembraneModel uniform();
    static MembraneModel solipsistic();
    /// Non-negative weights summing to 1 within 1e-12, one per cell.
    static MembraneModel cellular(std::vector<double> cell_weights);
    /// Breaks only inside one cell: the finite stand-in for a pure measurement.
    static MembraneModel pure(int cell_count, int cell);

    Kind kind() const { return kind_; }
    std::string name() const;
    int cell_count() const { return static_cast<int>(cell_weights_.size()); }
    const std::vector<double>& cell_weights() const { return cell_weights_; }
    int pick_cell(TrialStream& stream) const;

private:
    explicit MembraneModel(Kind kind) : kind_(kind) {}

    Kind kind_;
    std::vector<double> cell_weights_;
    std::vector<double> cumulative_;
};

/// Breaking point in barycentric coordinates; `vertex` is set when the
/// membrane tore at one of its anchor points.
struct MembranePoint {
    Vec weights;
    std::optional<int> vertex;
};

MembranePoint sample_breaking_point(const Simplex& simplex, const MembraneModel& model, TrialStream& stream);

struct CollapseTrace {
    Bloch initial_state;
    Bloch on_membrane_point;
    Bloch breaking_point;
    int elementary_outcome;
    int block_index;
    std::vector<int> outcome_block;
    double outcome_label;
    Bloch intermediate_point;
    Bloch final_state;
    /// Angle between the initial state and the first eigenvector; N = 2 only.
    std::optional<double> polar_angle;
};

struct SampledOutcome {
    MembranePoint breaking;
    int elementary;
    int block;
    MembraneModel::Kind model;
};

struct MeasurementResult {
    double label;
    CollapseTrace trace;
    Density posterior;
};

/// Stages 1 and 2 precomputed for a fixed (state, observable) pair, so the
/// per-trial work is sampling and classification only.
class PreparedMeasurement {
public:
    PreparedMeasurement(Density state, Obs observable);
    PreparedMeasurement(Density state, Obs observable, const Basis& basis);

    int dimension() const { return observable_.dimension(); }
    const Density& state() const { return state_; }
    const Obs& observable() const { return observable_; }
    const Basis& basis() const { return basis_; }
    const Simplex& simplex() const { return simplex_; }
    const Bloch& initial_state() const { return initial_; }
    const Bloch& on_membrane_point() const { return on_membrane_; }
    const Weights& membrane_weights() const { return weights_; }
    /// Block containing the whole state, when the state is an eigenstate of
    /// the observable; the outcome is then certain under every membrane.
    std::optional<int> forced_block() const { return forced_block_; }

    /// Geometric outcome probabilities, one per degeneracy block.
    Vec block_probabilities() const;

    SampledOutcome sample(const MembraneModel& model, TrialStream& stream) const;
    MeasurementResult collapse(const SampledOutcome& outcome) const;
    MeasurementResult run(const MembraneModel& model, TrialStream& stream) const { return collapse(sample(model, stream)); }

private:
    PreparedMeasurement(Density state, Obs observable, const Basis* basis);
    int classify(const MembranePoint& point, MembraneModel::Kind kind) const;

    Basis basis_;
    Density state_;
    Obs observable_;
    Simplex simplex_;
    Bloch initial_;
    Bloch on_membrane_;
    Weights weights_;
    std::optional<int> forced_block_;
};

MeasurementResult run_measurement(const Density& state, const Obs& observable, const MembraneModel& model, TrialStream& stream);

struct SpinMachineResult {
    int outcome;  // +1 for n, -1 for -n
    CollapseTrace trace;
};

/// Elastic band stretched between n and -n; r is a point of the unit ball.
SpinMachineResult spin_machine_measure(const Eigen::Vector3d& r, const Eigen::Vector3d& axis, const MembraneModel& model, TrialStream& stream);

/// Pure state at polar angle theta from |0>, i.e. Bloch vector (sin t, 0, cos t).
PureState<double> spin_state_at_angle(double theta);

class DieState {
public:
    static DieState off_table() { return DieState(0); }
    static DieState on_table(int face);

    bool is_on_table() const { return face_ != 0; }
    int face() const { return face_; }

private:
    explicit DieState(int face) : face_(face) {}
    int face_;
};

struct DieRoll {
    int face;
    DieState after;
};

inline constexpr int kDieFaces = 6;

/// Six-outcome canonical observable with face labels 1..6.
Obs die_observable();
/// off_table is the centre of the ball, on_table(k) the k-th vertex.
Density die_density(const DieState& state);
DieRoll die_measure(const DieState& state, TrialStream& stream);

}  // namespace hmsim
