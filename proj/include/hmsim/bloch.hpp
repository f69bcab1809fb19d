#pragma once

// Extended Bloch representation: SU(N) generator bases, density operators and
// the linear map between N x N density operators and real vectors of the
// (N^2 - 1)-dimensional unit ball,
//
//     D(r) = (1/N) (I + c_N r . Lambda),   c_N = sqrt(N (N - 1) / 2).
//
// Everything here is templated on the real scalar type; `double` is the type
// used by the rest of the library.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "hmsim/errors.hpp"

namespace hmsim {

template <typename Scalar>
using Complex = std::complex<Scalar>;
template <typename Scalar>
using ComplexMatrix = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using ComplexVector = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using RealVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RealMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace tol {
// Identities on exact constructions.
inline constexpr double algebraic = 1e-12;
// Quantities that pass through an eigendecomposition or a solve.
inline constexpr double spectral = 1e-10;
}  // namespace tol

/// Number of real coordinates of a Bloch vector for an N-level system.
constexpr int bloch_dimension(int n) { return n * n - 1; }

/// Normalization constant c_N; c_2 = 1, c_3 = sqrt(3).
template <typename Scalar = double>
Scalar bloch_normalization(int n) {
    using std::sqrt;
    return sqrt(Scalar(n) * Scalar(n - 1) / Scalar(2));
}

/// Tr(A B) without forming the product.
template <typename DerivedA, typename DerivedB>
auto trace_of_product(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    return (a.array() * b.transpose().array()).sum();
}

template <typename Scalar>
Scalar max_abs_entry(const ComplexMatrix<Scalar>& m) {
    return m.size() == 0 ? Scalar(0) : m.cwiseAbs().maxCoeff();
}

template <typename Scalar>
Scalar min_hermitian_eigenvalue(const ComplexMatrix<Scalar>& m) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix<Scalar>> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

/// Generalized Gell-Mann basis of su(N): the N(N-1)/2 symmetric off-diagonal
/// generators in lexicographic (j, k) order, then the antisymmetric ones in the
/// same order, then the N - 1 diagonal generators. Tr(L_i L_j) = 2 delta_ij.
/// For N = 2 this is (sigma_x, sigma_y, sigma_z).
template <typename Scalar = double>
class GeneratorBasis {
public:
    using Matrix = ComplexMatrix<Scalar>;

    explicit GeneratorBasis(int n) : n_(n) {
        if (n < 2) {
            throw InvalidDimension("generator basis needs dimension >= 2, got " + std::to_string(n));
        }
        using std::sqrt;
        const Complex<Scalar> i_unit(0, 1);
        generators_.reserve(static_cast<std::size_t>(bloch_dimension(n)));
        for (int j = 0; j < n; ++j) {
            for (int k = j + 1; k < n; ++k) {
                Matrix g = Matrix::Zero(n, n);
                g(j, k) = 1;
                g(k, j) = 1;
                generators_.push_back(std::move(g));
            }
        }
        for (int j = 0; j < n; ++j) {
            for (int k = j + 1; k < n; ++k) {
                Matrix g = Matrix::Zero(n, n);
                g(j, k) = -i_unit;
                g(k, j) = i_unit;
                generators_.push_back(std::move(g));
            }
        }
        for (int l = 1; l < n; ++l) {
            Matrix g = Matrix::Zero(n, n);
            const Scalar scale = sqrt(Scalar(2) / (Scalar(l) * Scalar(l + 1)));
            for (int j = 0; j < l; ++j) g(j, j) = scale;
            g(l, l) = -Scalar(l) * scale;
            generators_.push_back(std::move(g));
        }
        normalization_ = bloch_normalization<Scalar>(n);
    }

    int dimension() const { return n_; }
    int size() const { return static_cast<int>(generators_.size()); }
    Scalar normalization() const { return normalization_; }
    const std::vector<Matrix>& generators() const { return generators_; }
    const Matrix& operator[](int i) const { return generators_[static_cast<std::size_t>(i)]; }

private:
    int n_;
    Scalar normalization_;
    std::vector<Matrix> generators_;
};

template <typename Scalar = double>
GeneratorBasis<Scalar> build_generator_basis(int n) {
    return GeneratorBasis<Scalar>(n);
}

/// Unit-norm state vector. Comparison is modulo a global phase.
template <typename Scalar = double>
class PureState {
public:
    using Vector = ComplexVector<Scalar>;

    /// Requires | |psi|^2 - 1 | <= 1e-12.
    static PureState from_amplitudes(Vector amplitudes) {
        check_dimension(amplitudes);
        const Scalar norm2 = amplitudes.squaredNorm();
        if (std::abs(static_cast<double>(norm2) - 1.0) > tol::algebraic) {
            throw InvalidState("pure state amplitudes are not normalized (|psi|^2 = " + std::to_string(static_cast<double>(norm2)) + ")");
        }
        return PureState(std::move(amplitudes));
    }

    static PureState normalized(Vector amplitudes) {
        check_dimension(amplitudes);
        const Scalar norm = amplitudes.norm();
        if (!(norm > Scalar(0))) throw InvalidState("cannot normalize the zero vector");
        amplitudes /= norm;
        return PureState(std::move(amplitudes));
    }

    static PureState basis(int n, int k) {
        Vector v = Vector::Zero(n);
        if (k < 0 || k >= n) throw InvalidState("basis index out of range");
        v(k) = 1;
        return from_amplitudes(std::move(v));
    }

    int dimension() const { return static_cast<int>(amplitudes_.size()); }
    const Vector& amplitudes() const { return amplitudes_; }

    /// <this|other>
    Complex<Scalar> overlap(const PureState& other) const { return amplitudes_.dot(other.amplitudes_); }

    bool equals_up_to_phase(const PureState& other, double tolerance = tol::spectral) const {
        if (dimension() != other.dimension()) return false;
        return std::abs(1.0 - static_cast<double>(std::abs(overlap(other)))) <= tolerance;
    }

private:
    explicit PureState(Vector amplitudes) : amplitudes_(std::move(amplitudes)) {}

    static void check_dimension(const Vector& v) {
        if (v.size() < 2) throw InvalidDimension("pure state needs dimension >= 2");
    }

    Vector amplitudes_;
};

/// Hermitian, unit-trace, positive-semidefinite N x N matrix.
template <typename Scalar = double>
class DensityOperator {
public:
    using Matrix = ComplexMatrix<Scalar>;

    /// Validates the invariants; negative eigenvalues down to -1e-10 count as zero.
    static DensityOperator from_matrix(Matrix m) {
        if (m.rows() != m.cols()) throw InvalidState("density operator must be square");
        if (m.rows() < 2) throw InvalidDimension("density operator needs dimension >= 2");
        const Scalar asym = max_abs_entry<Scalar>(m - m.adjoint());
        if (static_cast<double>(asym) > tol::algebraic) {
            throw InvalidState("density operator is not Hermitian (max |D - D^H| = " + std::to_string(static_cast<double>(asym)) + ")");
        }
        const Complex<Scalar> tr = m.trace();
        if (std::abs(static_cast<double>(tr.real()) - 1.0) > tol::algebraic || std::abs(static_cast<double>(tr.imag())) > tol::algebraic) {
            throw InvalidState("density operator trace is not 1 (Tr = " + std::to_string(static_cast<double>(tr.real())) + ")");
        }
        const Scalar min_eig = min_hermitian_eigenvalue<Scalar>(m);
        if (static_cast<double>(min_eig) < -tol::spectral) {
            std::ostringstream msg;
            msg << "density operator is not positive semidefinite (min eigenvalue " << static_cast<double>(min_eig) << ")";
            throw InvalidState(msg.str(), static_cast<double>(min_eig));
        }
        return DensityOperator(std::move(m));
    }

    static DensityOperator maximally_mixed(int n) {
        if (n < 2) throw InvalidDimension("density operator needs dimension >= 2");
        return DensityOperator(Matrix::Identity(n, n) / Scalar(n));
    }

    int dimension() const { return static_cast<int>(matrix_.rows()); }
    const Matrix& matrix() const { return matrix_; }

    Scalar purity() const { return trace_of_product(matrix_, matrix_).real(); }
    Scalar min_eigenvalue() const { return min_hermitian_eigenvalue<Scalar>(matrix_); }

    /// Convex combination t D1 + (1 - t) D2.
    static DensityOperator mix(Scalar t, const DensityOperator& a, const DensityOperator& b) {
        if (a.dimension() != b.dimension()) throw DimensionMismatch("cannot mix density operators of different dimension");
        if (t < Scalar(0) || t > Scalar(1)) throw InvalidState("mixing weight outside [0, 1]");
        return from_matrix(t * a.matrix_ + (Scalar(1) - t) * b.matrix_);
    }

private:
    explicit DensityOperator(Matrix m) : matrix_(std::move(m)) {}

    Matrix matrix_;
};

/// Point of the closed unit ball in R^(N^2 - 1). Not every such point is a
/// state for N >= 3; see is_valid_state.
template <typename Scalar = double>
class BlochVector {
public:
    using Vector = RealVector<Scalar>;

    BlochVector(int n, Vector coords) : n_(n), coords_(std::move(coords)) {
        if (n < 2) throw InvalidDimension("Bloch vector needs dimension >= 2");
        if (coords_.size() != bloch_dimension(n)) {
            throw DimensionMismatch("Bloch vector for N = " + std::to_string(n) + " needs " + std::to_string(bloch_dimension(n)) + " coordinates, got " +
                                    std::to_string(coords_.size()));
        }
        const Scalar norm = coords_.norm();
        if (!(static_cast<double>(norm) <= 1.0 + tol::spectral)) {
            throw InvalidState("Bloch vector lies outside the unit ball (norm " + std::to_string(static_cast<double>(norm)) + ")");
        }
    }

    static BlochVector center(int n) { return BlochVector(n, Vector::Zero(bloch_dimension(n))); }

    int dimension() const { return n_; }
    const Vector& coords() const { return coords_; }
    Scalar norm() const { return coords_.norm(); }

private:
    int n_;
    Vector coords_;
};

namespace detail {
template <typename Scalar>
void require_same_dimension(int a, int b, const char* what) {
    if (a != b) {
        throw DimensionMismatch(std::string(what) + ": dimension " + std::to_string(a) + " vs " + std::to_string(b));
    }
}
}  // namespace detail

/// r_i = (N / (2 c_N)) Re Tr(D L_i).
template <typename Scalar>
BlochVector<Scalar> density_to_bloch(const DensityOperator<Scalar>& d, const GeneratorBasis<Scalar>& basis) {
    detail::require_same_dimension<Scalar>(d.dimension(), basis.dimension(), "density_to_bloch");
    const int n = basis.dimension();
    const Scalar scale = Scalar(n) / (Scalar(2) * basis.normalization());
    RealVector<Scalar> r(basis.size());
    for (int i = 0; i < basis.size(); ++i) {
        r(i) = scale * trace_of_product(d.matrix(), basis[i]).real();
    }
    return BlochVector<Scalar>(n, std::move(r));
}

/// (1/N) (I + c_N r . Lambda), without any positivity check.
template <typename Scalar>
ComplexMatrix<Scalar> bloch_operator(const BlochVector<Scalar>& r, const GeneratorBasis<Scalar>& basis) {
    detail::require_same_dimension<Scalar>(r.dimension(), basis.dimension(), "bloch_to_density");
    const int n = basis.dimension();
    ComplexMatrix<Scalar> m = ComplexMatrix<Scalar>::Identity(n, n);
    const Scalar c = basis.normalization();
    for (int i = 0; i < basis.size(); ++i) {
        if (r.coords()(i) != Scalar(0)) m += (c * r.coords()(i)) * basis[i];
    }
    m /= Scalar(n);
    return m;
}

/// Throws InvalidState (carrying the minimum eigenvalue) when D(r) is not positive.
template <typename Scalar>
DensityOperator<Scalar> bloch_to_density(const BlochVector<Scalar>& r, const GeneratorBasis<Scalar>& basis) {
    return DensityOperator<Scalar>::from_matrix(bloch_operator(r, basis));
}

template <typename Scalar = double>
struct StateValidity {
    bool valid;
    Scalar min_eigenvalue;
};

template <typename Scalar>
StateValidity<Scalar> is_valid_state(const BlochVector<Scalar>& r, const GeneratorBasis<Scalar>& basis) {
    const Scalar min_eig = min_hermitian_eigenvalue<Scalar>(bloch_operator(r, basis));
    return {static_cast<double>(min_eig) >= -tol::spectral, min_eig};
}

template <typename Scalar>
DensityOperator<Scalar> pure_to_density(const PureState<Scalar>& psi) {
    const auto& v = psi.amplitudes();
    return DensityOperator<Scalar>::from_matrix(v * v.adjoint());
}

/// Orthogonal projector onto span{psi}.
template <typename Scalar>
ComplexMatrix<Scalar> projector(const PureState<Scalar>& psi) {
    return psi.amplitudes() * psi.amplitudes().adjoint();
}

}  // namespace hmsim
