#pragma once

#include <Eigen/Dense>
#include <complex>

#include "rim/errors.hpp"

namespace rim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kStateNormTol = 1e-12;
// Eigenvalue pairs closer than this use the confluent divided difference
// in the fidelity gradient.
inline constexpr double kDegeneracyTol = 1e-9;

/// Dense complex Hermitian matrix (units of energy, hbar = 1).
/// Construction validates hermiticity to kHermitianTol and dim >= 2.
class HermitianOperator {
public:
    explicit HermitianOperator(Matrix entries);

    int dim() const { return static_cast<int>(entries_.rows()); }
    const Matrix& matrix() const { return entries_; }

private:
    Matrix entries_;
};

/// Spectral decomposition H = V diag(lambda) V^dagger with eigenvalues
/// ascending and orthonormal eigenvector columns.
struct EigenSystem {
    RealVector eigenvalues;
    Matrix eigenvectors;
};

/// Unit-norm complex amplitude vector.
class StateVector {
public:
    explicit StateVector(Vector amplitudes);

    /// Basis ket |index> (1-based) of the given dimension.
    static StateVector basis(int dim, int index);

    int dim() const { return static_cast<int>(amplitudes_.rows()); }
    const Vector& amplitudes() const { return amplitudes_; }

private:
    Vector amplitudes_;
};

/// Gradient of the transfer fidelity with respect to the diagonal bias
/// vector and the readout time.
struct FidelityGradient {
    RealVector d_bias;
    double d_time = 0.0;
};

/// Spectral decomposition of a Hermitian operator, eigenvalues ascending.
/// Throws NumericalError if the solver fails to converge.
EigenSystem eig_hermitian(const HermitianOperator& h);

/// Propagator U(t) = exp(-i H t) assembled from a decomposition of H.
Matrix propagator(const EigenSystem& es, double t);

/// Evolve psi0 for time t >= 0 under time-independent H.
StateVector propagate(const HermitianOperator& h, double t, const StateVector& psi0);

/// F = |<b| exp(-i H t) |a>|^2 for 1-based basis indices a, b.
/// Clamped to [0, 1] to absorb rounding at the boundaries.
double transfer_fidelity(const HermitianOperator& h, double t, int a, int b);

/// Same fidelity, reusing an existing decomposition of H.
double transfer_fidelity(const EigenSystem& es, double t, int a, int b);

/// Exact gradient of transfer_fidelity(h_base + diag(bias), t, a, b)
/// via the eigendecomposition divided-difference (Daleckii-Krein) form.
/// Degenerate eigenvalue pairs fall back to the confluent limit
/// -i t exp(-i lambda t).
FidelityGradient fidelity_gradient(const HermitianOperator& h_base,
                                   const RealVector& bias, double t,
                                   int a, int b);

} // namespace rim
