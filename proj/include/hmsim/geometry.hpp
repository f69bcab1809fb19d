#pragma once

// Measurement geometry: the regular simplex spanned by the Bloch images of an
// observable's eigenstates, orthogonal projection onto it, barycentric
// coordinates, sub-simplex volumes and breaking-point classification.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "hmsim/bloch.hpp"

namespace hmsim {

/// Orthonormal eigenbasis plus eigenvalue labels. Equal labels define the
/// degeneracy blocks, ordered by their smallest member index.
template <typename Scalar = double>
class Observable {
public:
    Observable(std::vector<PureState<Scalar>> eigenstates, std::vector<double> labels)
        : eigenstates_(std::move(eigenstates)), labels_(std::move(labels)) {
        const int n = static_cast<int>(eigenstates_.size());
        if (n < 2) throw InvalidObservable("observable needs at least two eigenstates");
        if (static_cast<int>(labels_.size()) != n) {
            throw InvalidObservable("observable has " + std::to_string(n) + " eigenstates but " + std::to_string(labels_.size()) + " labels");
        }
        for (const auto& e : eigenstates_) {
            if (e.dimension() != n) {
                throw InvalidObservable("eigenstate dimension " + std::to_string(e.dimension()) + " does not match eigenstate count " + std::to_string(n));
            }
        }
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double ov = static_cast<double>(std::abs(eigenstates_[i].overlap(eigenstates_[j])));
                if (ov > tol::spectral) {
                    throw InvalidObservable("eigenstates " + std::to_string(i) + " and " + std::to_string(j) + " are not orthogonal (|<i|j>| = " +
                                            std::to_string(ov) + ")");
                }
            }
        }
        block_of_.assign(static_cast<std::size_t>(n), -1);
        for (int i = 0; i < n; ++i) {
            if (block_of_[i] >= 0) continue;
            const int b = static_cast<int>(blocks_.size());
            blocks_.push_back({});
            for (int j = i; j < n; ++j) {
                if (block_of_[j] < 0 && labels_[j] == labels_[i]) {
                    block_of_[j] = b;
                    blocks_.back().push_back(j);
                }
            }
        }
    }

    /// Computational basis; labels default to 0, 1, ..., N-1.
    static Observable canonical(int n, std::vector<double> labels = {}) {
        if (n < 2) throw InvalidDimension("observable needs dimension >= 2");
        std::vector<PureState<Scalar>> states;
        for (int k = 0; k < n; ++k) states.push_back(PureState<Scalar>::basis(n, k));
        if (labels.empty()) {
            labels.resize(static_cast<std::size_t>(n));
            std::iota(labels.begin(), labels.end(), 0.0);
        }
        return Observable(std::move(states), std::move(labels));
    }

    /// Columns of `u` are the eigenstates.
    static Observable from_unitary(const ComplexMatrix<Scalar>& u, std::vector<double> labels) {
        std::vector<PureState<Scalar>> states;
        for (int k = 0; k < u.cols(); ++k) states.push_back(PureState<Scalar>::from_amplitudes(u.col(k)));
        return Observable(std::move(states), std::move(labels));
    }

    int dimension() const { return static_cast<int>(eigenstates_.size()); }
    const std::vector<PureState<Scalar>>& eigenstates() const { return eigenstates_; }
    const std::vector<double>& labels() const { return labels_; }
    const std::vector<std::vector<int>>& blocks() const { return blocks_; }
    int block_count() const { return static_cast<int>(blocks_.size()); }
    int block_of(int i) const { return block_of_[static_cast<std::size_t>(i)]; }
    double block_label(int b) const { return labels_[static_cast<std::size_t>(blocks_[b].front())]; }
    bool is_degenerate() const { return block_count() < dimension(); }

    ComplexMatrix<Scalar> projector(int i) const { return hmsim::projector(eigenstates_[i]); }

    ComplexMatrix<Scalar> block_projector(int b) const {
        ComplexMatrix<Scalar> p = ComplexMatrix<Scalar>::Zero(dimension(), dimension());
        for (int i : blocks_[b]) p += projector(i);
        return p;
    }

private:
    std::vector<PureState<Scalar>> eigenstates_;
    std::vector<double> labels_;
    std::vector<std::vector<int>> blocks_;
    std::vector<int> block_of_;
};

/// Spin observable along the unit axis `n` for N = 2: eigenstates |+n>, |-n>
/// with labels +1/2 and -1/2 (hbar = 1). The Bloch image of |+n> is n itself.
template <typename Scalar = double>
Observable<Scalar> spin_observable(const Eigen::Matrix<Scalar, 3, 1>& axis) {
    using std::acos;
    using std::atan2;
    using std::cos;
    using std::sin;
    const Scalar len = axis.norm();
    if (!(len > Scalar(0))) throw InvalidObservable("spin axis must be non-zero");
    const Eigen::Matrix<Scalar, 3, 1> n = axis / len;
    const Scalar theta = acos(std::clamp(n.z(), Scalar(-1), Scalar(1)));
    const Scalar phi = atan2(n.y(), n.x());
    const Complex<Scalar> phase = std::polar(Scalar(1), phi);
    ComplexVector<Scalar> up(2), down(2);
    up << Complex<Scalar>(cos(theta / 2)), phase * sin(theta / 2);
    down << -std::conj(phase) * sin(theta / 2), Complex<Scalar>(cos(theta / 2));
    return Observable<Scalar>({PureState<Scalar>::normalized(up), PureState<Scalar>::normalized(down)}, {0.5, -0.5});
}

/// Orthonormal frame of the affine hull of a set of points (columns),
/// built by Gram-Schmidt over the edges p_k - p_0 in index order.
template <typename Scalar = double>
class AffineFrame {
public:
    explicit AffineFrame(const RealMatrix<Scalar>& points) : origin_(points.col(0)) {
        const int count = static_cast<int>(points.cols());
        basis_.resize(points.rows(), count - 1);
        for (int k = 1; k < count; ++k) {
            RealVector<Scalar> e = points.col(k) - origin_;
            const Scalar edge_len = e.norm();
            // Two passes of modified Gram-Schmidt keep the frame orthonormal to ~eps.
            for (int pass = 0; pass < 2; ++pass) {
                for (int j = 0; j < k - 1; ++j) e -= basis_.col(j).dot(e) * basis_.col(j);
            }
            const Scalar len = e.norm();
            if (!(static_cast<double>(len) > 1e-8 * std::max(1.0, static_cast<double>(edge_len)))) {
                throw GeometryError("points are not affinely independent");
            }
            basis_.col(k - 1) = e / len;
        }
    }

    const RealVector<Scalar>& origin() const { return origin_; }
    const RealMatrix<Scalar>& basis() const { return basis_; }
    int rank() const { return static_cast<int>(basis_.cols()); }

    RealVector<Scalar> to_local(const RealVector<Scalar>& x) const { return basis_.transpose() * (x - origin_); }
    RealVector<Scalar> project(const RealVector<Scalar>& x) const { return origin_ + basis_ * to_local(x); }

private:
    RealVector<Scalar> origin_;
    RealMatrix<Scalar> basis_;
};

/// Weights of a point with respect to simplex vertices: non-negative, sum 1.
template <typename Scalar = double>
class BarycentricCoordinates {
public:
    /// Clamps to [0, 1] and renormalizes.
    static BarycentricCoordinates clamped(RealVector<Scalar> w) {
        w = w.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
        const Scalar s = w.sum();
        if (!(s > Scalar(0))) throw GeometryError("barycentric weights vanish");
        return BarycentricCoordinates(w / s);
    }

    static BarycentricCoordinates vertex(int n, int i) {
        RealVector<Scalar> w = RealVector<Scalar>::Zero(n);
        w(i) = 1;
        return BarycentricCoordinates(std::move(w));
    }

    const RealVector<Scalar>& weights() const { return weights_; }
    int size() const { return static_cast<int>(weights_.size()); }
    Scalar operator[](int i) const { return weights_(i); }

private:
    explicit BarycentricCoordinates(RealVector<Scalar> w) : weights_(std::move(w)) {}
    RealVector<Scalar> weights_;
};

/// Regular (N-1)-simplex inscribed in the unit ball: N unit vertices with
/// pairwise inner product -1/(N-1). The membrane frame and the barycentric
/// least-squares factorization are computed once at construction.
template <typename Scalar = double>
class MeasurementSimplex {
public:
    explicit MeasurementSimplex(const std::vector<BlochVector<Scalar>>& vertices)
        : n_(static_cast<int>(vertices.size())), vertices_(validated_vertex_matrix(vertices)), frame_(vertices_) {
        RealMatrix<Scalar> system(vertices_.rows() + 1, n_);
        system.topRows(vertices_.rows()) = vertices_;
        system.bottomRows(1).setOnes();
        solver_.compute(system);
        local_vertices_.resize(n_ - 1, n_);
        for (int i = 0; i < n_; ++i) local_vertices_.col(i) = frame_.to_local(vertices_.col(i));
    }

    int dimension() const { return n_; }
    const RealMatrix<Scalar>& vertices() const { return vertices_; }
    RealVector<Scalar> vertex(int i) const { return vertices_.col(i); }
    BlochVector<Scalar> vertex_state(int i) const { return BlochVector<Scalar>(n_, vertices_.col(i)); }
    RealVector<Scalar> centroid() const { return vertices_.rowwise().mean(); }
    const AffineFrame<Scalar>& frame() const { return frame_; }
    /// Vertices in the membrane's own (N-1)-dimensional coordinates.
    const RealMatrix<Scalar>& local_vertices() const { return local_vertices_; }

    RealVector<Scalar> point(const RealVector<Scalar>& weights) const { return vertices_ * weights; }

    /// Unclamped least-squares solution of p = sum w_i n_i, sum w_i = 1.
    RealVector<Scalar> raw_barycentric(const RealVector<Scalar>& p) const {
        RealVector<Scalar> rhs(p.size() + 1);
        rhs.head(p.size()) = p;
        rhs(p.size()) = 1;
        return solver_.solve(rhs);
    }

    Scalar distance_to_hull(const RealVector<Scalar>& p) const { return (p - frame_.project(p)).norm(); }

private:
    static RealMatrix<Scalar> validated_vertex_matrix(const std::vector<BlochVector<Scalar>>& vertices) {
        const int n = static_cast<int>(vertices.size());
        if (n < 2) throw GeometryError("measurement simplex needs at least two vertices");
        RealMatrix<Scalar> v(bloch_dimension(n), n);
        for (int i = 0; i < n; ++i) {
            if (vertices[i].dimension() != n) throw DimensionMismatch("simplex vertex dimension does not match vertex count");
            v.col(i) = vertices[i].coords();
            if (std::abs(static_cast<double>(vertices[i].norm()) - 1.0) > tol::spectral) {
                throw GeometryError("simplex vertex " + std::to_string(i) + " is not a unit vector");
            }
        }
        const double expected = -1.0 / (n - 1);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double ip = static_cast<double>(v.col(i).dot(v.col(j)));
                if (std::abs(ip - expected) > tol::spectral) {
                    throw GeometryError("simplex vertices " + std::to_string(i) + ", " + std::to_string(j) + " have inner product " + std::to_string(ip) +
                                        ", expected " + std::to_string(expected));
                }
            }
        }
        return v;
    }

    int n_;
    RealMatrix<Scalar> vertices_;
    AffineFrame<Scalar> frame_;
    RealMatrix<Scalar> local_vertices_;
    Eigen::ColPivHouseholderQR<RealMatrix<Scalar>> solver_;
};

template <typename Scalar>
MeasurementSimplex<Scalar> build_measurement_simplex(const Observable<Scalar>& obs, const GeneratorBasis<Scalar>& basis) {
    detail::require_same_dimension<Scalar>(obs.dimension(), basis.dimension(), "build_measurement_simplex");
    std::vector<BlochVector<Scalar>> vertices;
    vertices.reserve(static_cast<std::size_t>(obs.dimension()));
    for (const auto& e : obs.eigenstates()) vertices.push_back(density_to_bloch(pure_to_density(e), basis));
    return MeasurementSimplex<Scalar>(vertices);
}

/// Orthogonal projection onto the affine hull of the simplex.
template <typename Scalar>
BlochVector<Scalar> project_onto_membrane(const BlochVector<Scalar>& r, const MeasurementSimplex<Scalar>& simplex) {
    detail::require_same_dimension<Scalar>(r.dimension(), simplex.dimension(), "project_onto_membrane");
    return BlochVector<Scalar>(r.dimension(), simplex.frame().project(r.coords()));
}

/// Barycentric weights of a membrane point. Points farther than 1e-8 from
/// the membrane raise GeometryError; weights below -1e-6 raise
/// InvalidMembranePoint; smaller violations are clamped.
template <typename Scalar>
BarycentricCoordinates<Scalar> barycentric_coordinates(const BlochVector<Scalar>& p, const MeasurementSimplex<Scalar>& simplex) {
    detail::require_same_dimension<Scalar>(p.dimension(), simplex.dimension(), "barycentric_coordinates");
    const double off = static_cast<double>(simplex.distance_to_hull(p.coords()));
    if (off > 1e-8) throw GeometryError("point lies off the membrane (distance " + std::to_string(off) + ")");
    const RealVector<Scalar> w = simplex.raw_barycentric(p.coords());
    const double min_w = static_cast<double>(w.minCoeff());
    if (min_w < -1e-6) throw InvalidMembranePoint("membrane point lies outside the simplex (min weight " + std::to_string(min_w) + ")");
    return BarycentricCoordinates<Scalar>::clamped(w);
}

/// Hilbert-space route: p_i = Tr(D P_i).
template <typename Scalar>
BarycentricCoordinates<Scalar> born_probabilities(const DensityOperator<Scalar>& d, const Observable<Scalar>& obs) {
    detail::require_same_dimension<Scalar>(d.dimension(), obs.dimension(), "born_probabilities");
    RealVector<Scalar> p(obs.dimension());
    for (int i = 0; i < obs.dimension(); ++i) {
        const auto& v = obs.eigenstates()[i].amplitudes();
        p(i) = v.dot(d.matrix() * v).real();
    }
    return BarycentricCoordinates<Scalar>::clamped(std::move(p));
}

/// Sums elementary weights over the observable's degeneracy blocks.
template <typename Scalar>
RealVector<Scalar> block_weights(const BarycentricCoordinates<Scalar>& w, const Observable<Scalar>& obs) {
    RealVector<Scalar> out = RealVector<Scalar>::Zero(obs.block_count());
    for (int i = 0; i < obs.dimension(); ++i) out(obs.block_of(i)) += w[i];
    return out;
}

namespace detail {
template <typename Scalar>
Scalar simplex_volume(const RealMatrix<Scalar>& local_points) {
    const int d = static_cast<int>(local_points.cols()) - 1;
    RealMatrix<Scalar> edges(local_points.rows(), d);
    for (int k = 0; k < d; ++k) edges.col(k) = local_points.col(k + 1) - local_points.col(0);
    using std::abs;
    using std::sqrt;
    // Square in membrane coordinates; |det E| avoids the square root of a near-zero Gram determinant.
    if (edges.rows() == edges.cols()) return abs(edges.determinant());
    const Scalar det = (edges.transpose() * edges).determinant();
    return det > Scalar(0) ? sqrt(det) : Scalar(0);
}
}  // namespace detail

/// vol(conv({r_par} U {n_j : j != i})) / vol(simplex), via edge determinants
/// in membrane coordinates. Independent of the least-squares route.
template <typename Scalar>
BarycentricCoordinates<Scalar> subsimplex_volume_fractions(const BlochVector<Scalar>& on_membrane, const MeasurementSimplex<Scalar>& simplex) {
    detail::require_same_dimension<Scalar>(on_membrane.dimension(), simplex.dimension(), "subsimplex_volume_fractions");
    const RealMatrix<Scalar>& local = simplex.local_vertices();
    const Scalar total = detail::simplex_volume<Scalar>(local);
    if (!(static_cast<double>(total) > 1e-12)) throw GeometryError("degenerate simplex");
    const RealVector<Scalar> y = simplex.frame().to_local(on_membrane.coords());
    RealVector<Scalar> fractions(simplex.dimension());
    for (int i = 0; i < simplex.dimension(); ++i) {
        RealMatrix<Scalar> pts = local;
        pts.col(i) = y;
        fractions(i) = detail::simplex_volume<Scalar>(pts) / total;
    }
    const double excess = std::abs(static_cast<double>(fractions.sum()) - 1.0);
    if (excess > 1e-9) throw GeometryError("point lies outside the simplex (volume fractions miss 1 by " + std::to_string(excess) + ")");
    return BarycentricCoordinates<Scalar>::clamped(std::move(fractions));
}

/// Outcome i such that the breaking point lies in conv({r_par} U {n_j : j != i}).
/// In barycentric terms that is argmin_i beta_i / w_i; ties on tension lines go
/// to the lowest index and outcomes with w_i = 0 are never returned.
template <typename Scalar>
int classify_breaking_point(const BarycentricCoordinates<Scalar>& breaking, const BarycentricCoordinates<Scalar>& on_membrane) {
    if (breaking.size() != on_membrane.size()) throw DimensionMismatch("classify_breaking_point: weight vectors differ in size");
    constexpr double negligible = 1e-14;
    int best = -1;
    for (int i = 0; i < breaking.size(); ++i) {
        if (static_cast<double>(on_membrane[i]) <= negligible) continue;
        // beta_i / w_i < beta_best / w_best, cross-multiplied.
        if (best < 0 || breaking[i] * on_membrane[best] < breaking[best] * on_membrane[i]) best = i;
    }
    if (best < 0) throw GeometryError("on-membrane point has no positive weight");
    return best;
}

template <typename Scalar>
int classify_breaking_point(const BlochVector<Scalar>& breaking, const BlochVector<Scalar>& on_membrane, const MeasurementSimplex<Scalar>& simplex) {
    detail::require_same_dimension<Scalar>(breaking.dimension(), simplex.dimension(), "classify_breaking_point");
    if (static_cast<double>(simplex.distance_to_hull(breaking.coords())) > 1e-8) throw GeometryError("breaking point lies off the membrane");
    const RealVector<Scalar> beta = simplex.raw_barycentric(breaking.coords());
    if (static_cast<double>(beta.minCoeff()) < -1e-9) throw GeometryError("breaking point lies outside the simplex");
    return classify_breaking_point(BarycentricCoordinates<Scalar>::clamped(beta), barycentric_coordinates(on_membrane, simplex));
}

}  // namespace hmsim
