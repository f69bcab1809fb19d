#include "hmsim/membrane.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace hmsim {

namespace {

std::vector<int> prime_factors(int m) {
    std::vector<int> out;
    for (int p = 2; p * p <= m; ++p) {
        while (m % p == 0) {
            out.push_back(p);
            m /= p;
        }
    }
    if (m > 1) out.push_back(m);
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

}  // namespace

CellularPartition::CellularPartition(int cell_count, int n) : cell_count_(cell_count), n_(n) {
    if (cell_count < 1) throw InvalidMembrane("cell count must be >= 1");
    if (n < 2) throw InvalidDimension("cellular partition needs dimension >= 2");
    grid_.assign(static_cast<std::size_t>(n - 1), 1);
    // Largest primes first, each into the currently smallest slot count.
    for (int p : prime_factors(cell_count)) {
        auto smallest = std::min_element(grid_.begin(), grid_.end());
        *smallest *= p;
    }
}

Vec CellularPartition::weights_from_cube(const Vec& u) const {
    Vec w(n_);
    double remaining = 1.0;
    for (int k = 0; k < n_ - 1; ++k) {
        const double share = 1.0 - std::pow(1.0 - u(k), 1.0 / (n_ - 1 - k));
        w(k) = remaining * share;
        remaining -= w(k);
    }
    w(n_ - 1) = std::max(remaining, 0.0);
    return w;
}

Vec CellularPartition::cube_from_weights(const Vec& w) const {
    Vec u(n_ - 1);
    double remaining = 1.0;
    for (int k = 0; k < n_ - 1; ++k) {
        const double share = remaining > 0.0 ? std::clamp(w(k) / remaining, 0.0, 1.0) : 0.0;
        u(k) = 1.0 - std::pow(1.0 - share, n_ - 1 - k);
        remaining -= w(k);
    }
    return u;
}

Vec CellularPartition::sample_in_cell(int cell, TrialStream& stream) const {
    if (cell < 0 || cell >= cell_count_) throw InvalidMembrane("cell index out of range");
    Vec u(n_ - 1);
    int rest = cell;
    for (int k = 0; k < n_ - 1; ++k) {
        const int slot = rest % grid_[k];
        rest /= grid_[k];
        u(k) = (slot + stream.uniform()) / grid_[k];
    }
    return weights_from_cube(u);
}

int CellularPartition::cell_of(const Vec& weights) const {
    const Vec u = cube_from_weights(weights);
    int cell = 0;
    int stride = 1;
    for (int k = 0; k < n_ - 1; ++k) {
        const int slot = std::clamp(static_cast<int>(std::floor(u(k) * grid_[k])), 0, grid_[k] - 1);
        cell += slot * stride;
        stride *= grid_[k];
    }
    return cell;
}

MembraneModel MembraneModel::uniform() { return MembraneModel(Kind::uniform); }

MembraneModel MembraneModel::solipsistic() { return MembraneModel(Kind::solipsistic); }

MembraneModel MembraneModel::cellular(std::vector<double> cell_weights) {
    if (cell_weights.empty()) throw InvalidMembrane("cellular membrane needs at least one cell");
    double total = 0.0;
    for (double w : cell_weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidMembrane("cell weights must be finite and non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > tol::algebraic) throw InvalidMembrane("cell weights sum to " + std::to_string(total) + ", expected 1");
    MembraneModel m(Kind::cellular);
    m.cumulative_.resize(cell_weights.size());
    std::partial_sum(cell_weights.begin(), cell_weights.end(), m.cumulative_.begin());
    for (double& c : m.cumulative_) c /= total;
    m.cumulative_.back() = 1.0;
    m.cell_weights_ = std::move(cell_weights);
    return m;
}

MembraneModel MembraneModel::pure(int cell_count, int cell) {
    if (cell_count < 1 || cell < 0 || cell >= cell_count) throw InvalidMembrane("pure membrane cell out of range");
    std::vector<double> w(static_cast<std::size_t>(cell_count), 0.0);
    w[static_cast<std::size_t>(cell)] = 1.0;
    return cellular(std::move(w));
}

std::string MembraneModel::name() const {
    switch (kind_) {
        case Kind::uniform: return "uniform";
        case Kind::solipsistic: return "solipsistic";
        case Kind::cellular: return "cellular";
    }
    return "unknown";
}

int MembraneModel::pick_cell(TrialStream& stream) const {
    const double u = stream.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative_.begin(), static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
}

MembranePoint sample_breaking_point(const Simplex& simplex, const MembraneModel& model, TrialStream& stream) {
    const int n = simplex.dimension();
    switch (model.kind()) {
        case MembraneModel::Kind::uniform: {
            // Normalized unit-rate exponentials are uniform on the simplex.
            Vec w(n);
            for (int i = 0; i < n; ++i) w(i) = stream.exponential();
            w /= w.sum();
            return {std::move(w), std::nullopt};
        }
        case MembraneModel::Kind::solipsistic: {
            const int k = stream.below(n);
            Vec w = Vec::Zero(n);
            w(k) = 1.0;
            return {std::move(w), k};
        }
        case MembraneModel::Kind::cellular: {
            const CellularPartition partition(model.cell_count(), n);
            const int cell = model.pick_cell(stream);
            return {partition.sample_in_cell(cell, stream), std::nullopt};
        }
    }
    throw InvalidMembrane("unknown membrane kind");
}

PreparedMeasurement::PreparedMeasurement(Density state, Obs observable)
    : PreparedMeasurement(std::move(state), std::move(observable), nullptr) {}

PreparedMeasurement::PreparedMeasurement(Density state, Obs observable, const Basis& basis)
    : PreparedMeasurement(std::move(state), std::move(observable), &basis) {}

PreparedMeasurement::PreparedMeasurement(Density state, Obs observable, const Basis* basis)
    : basis_(basis ? *basis : Basis(observable.dimension())),
      state_(std::move(state)),
      observable_(std::move(observable)),
      simplex_(build_measurement_simplex(observable_, basis_)),
      initial_(density_to_bloch(state_, basis_)),
      on_membrane_(project_onto_membrane(initial_, simplex_)),
      weights_(barycentric_coordinates(on_membrane_, simplex_)) {
    if (state_.dimension() != observable_.dimension() || basis_.dimension() != observable_.dimension()) {
        throw DimensionMismatch("state, observable and basis dimensions differ");
    }
    const Vec blocks = block_probabilities();
    for (int b = 0; b < blocks.size(); ++b) {
        if (blocks(b) >= 1.0 - tol::spectral) {
            forced_block_ = b;
            break;
        }
    }
}

Vec PreparedMeasurement::block_probabilities() const { return block_weights(weights_, observable_); }

int PreparedMeasurement::classify(const MembranePoint& point, MembraneModel::Kind kind) const {
    const int n = dimension();
    int elementary;
    if (kind == MembraneModel::Kind::solipsistic && point.vertex) {
        // Tearing at an anchor detaches it; the band contracts to the next anchor.
        elementary = (*point.vertex + 1) % n;
    } else {
        elementary = classify_breaking_point(Weights::clamped(point.weights), weights_);
    }
    if (forced_block_ && observable_.block_of(elementary) != *forced_block_) {
        const auto& members = observable_.blocks()[*forced_block_];
        elementary = *std::max_element(members.begin(), members.end(), [&](int a, int b) { return weights_[a] < weights_[b]; });
    }
    return elementary;
}

SampledOutcome PreparedMeasurement::sample(const MembraneModel& model, TrialStream& stream) const {
    MembranePoint point = sample_breaking_point(simplex_, model, stream);
    const int elementary = classify(point, model.kind());
    return {std::move(point), elementary, observable_.block_of(elementary), model.kind()};
}

MeasurementResult PreparedMeasurement::collapse(const SampledOutcome& outcome) const {
    const int n = dimension();
    const auto& members = observable_.blocks()[outcome.block];

    RealMatrix<double> block_vertices(simplex_.vertices().rows(), static_cast<int>(members.size()));
    for (std::size_t j = 0; j < members.size(); ++j) block_vertices.col(static_cast<int>(j)) = simplex_.vertex(members[j]);
    Vec intermediate = members.size() == 1 ? Vec(block_vertices.col(0)) : AffineFrame<double>(block_vertices).project(on_membrane_.coords());

    const ComplexMatrix<double> p = observable_.block_projector(outcome.block);
    const ComplexMatrix<double> projected = p * state_.matrix() * p;
    const double weight = projected.trace().real();
    ComplexMatrix<double> posterior;
    if (weight > 1e-14) {
        posterior = projected / weight;
    } else if (outcome.model != MembraneModel::Kind::uniform) {
        // Non-Born membranes can select outcomes the state has no weight on;
        // the particle then ends at the anchor it was drawn to.
        posterior = observable_.projector(outcome.elementary);
    } else {
        throw ImpossibleOutcome("outcome block " + std::to_string(outcome.block) + " has Lüders weight " + std::to_string(weight));
    }
    Density post = Density::from_matrix(std::move(posterior));
    Bloch final_state = density_to_bloch(post, basis_);

    std::optional<double> polar;
    if (n == 2) {
        const Vec axis = simplex_.vertex(0);
        const Vec& r = initial_.coords();
        const double along = r.dot(axis);
        polar = std::atan2((r - along * axis).norm(), along);
    }

    CollapseTrace trace{initial_,
                        on_membrane_,
                        Bloch(n, simplex_.point(outcome.breaking.weights)),
                        outcome.elementary,
                        outcome.block,
                        members,
                        observable_.block_label(outcome.block),
                        Bloch(n, std::move(intermediate)),
                        std::move(final_state),
                        polar};
    return {trace.outcome_label, std::move(trace), std::move(post)};
}

MeasurementResult run_measurement(const Density& state, const Obs& observable, const MembraneModel& model, TrialStream& stream) {
    return PreparedMeasurement(state, observable).run(model, stream);
}

SpinMachineResult spin_machine_measure(const Eigen::Vector3d& r, const Eigen::Vector3d& axis, const MembraneModel& model, TrialStream& stream) {
    const Basis basis(2);
    const Density state = bloch_to_density(Bloch(2, r), basis);
    PreparedMeasurement prepared(state, spin_observable<double>(axis), basis);
    MeasurementResult result = prepared.run(model, stream);
    return {result.label > 0 ? +1 : -1, std::move(result.trace)};
}

PureState<double> spin_state_at_angle(double theta) {
    ComplexVector<double> v(2);
    v << std::cos(theta / 2), std::sin(theta / 2);
    return PureState<double>::normalized(std::move(v));
}

DieState DieState::on_table(int face) {
    if (face < 1 || face > kDieFaces) throw InvalidState("die face must be in 1..6, got " + std::to_string(face));
    return DieState(face);
}

Obs die_observable() { return Obs::canonical(kDieFaces, {1, 2, 3, 4, 5, 6}); }

Density die_density(const DieState& state) {
    if (!state.is_on_table()) return Density::maximally_mixed(kDieFaces);
    return pure_to_density(PureState<double>::basis(kDieFaces, state.face() - 1));
}

DieRoll die_measure(const DieState& state, TrialStream& stream) {
    const MeasurementResult result = run_measurement(die_density(state), die_observable(), MembraneModel::solipsistic(), stream);
    const int face = static_cast<int>(result.label);
    return {face, DieState::on_table(face)};
}

}  // namespace hmsim
