#include "rim/quantum.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

namespace rim {

namespace {

const Complex kI(0.0, 1.0);

void check_index(int idx, int dim, const char* name) {
    if (idx < 1 || idx > dim)
        throw ValidationError(std::string(name) + " index " + std::to_string(idx) +
                              " outside 1.." + std::to_string(dim));
}

Vector phases(const RealVector& eigenvalues, double t) {
    return ((-kI * t) * eigenvalues.cast<Complex>().array()).exp();
}

} // namespace

HermitianOperator::HermitianOperator(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols())
        throw ValidationError("HermitianOperator: matrix is not square");
    if (entries_.rows() < 2)
        throw ValidationError("HermitianOperator: dim must be >= 2");
    const double asym = (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
    if (asym > kHermitianTol)
        throw ValidationError("HermitianOperator: not Hermitian (max |H - H^dagger| = " +
                              std::to_string(asym) + ")");
}

StateVector::StateVector(Vector amplitudes) : amplitudes_(std::move(amplitudes)) {
    if (amplitudes_.size() < 1)
        throw ValidationError("StateVector: empty amplitude vector");
    if (std::abs(amplitudes_.norm() - 1.0) > kStateNormTol)
        throw ValidationError("StateVector: norm deviates from 1 by more than tolerance");
}

StateVector StateVector::basis(int dim, int index) {
    check_index(index, dim, "basis");
    Vector v = Vector::Zero(dim);
    v(index - 1) = Complex(1.0, 0.0);
    return StateVector(std::move(v));
}

EigenSystem eig_hermitian(const HermitianOperator& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h.matrix());
    if (solver.info() != Eigen::Success)
        throw NumericalError("eig_hermitian: eigensolver failed to converge");
    return EigenSystem{solver.eigenvalues(), solver.eigenvectors()};
}

Matrix propagator(const EigenSystem& es, double t) {
    const Vector ph = phases(es.eigenvalues, t);
    return es.eigenvectors * ph.asDiagonal() * es.eigenvectors.adjoint();
}

StateVector propagate(const HermitianOperator& h, double t, const StateVector& psi0) {
    if (t < 0.0)
        throw ValidationError("propagate: negative time");
    if (psi0.dim() != h.dim())
        throw ValidationError("propagate: state dimension does not match operator");
    const EigenSystem es = eig_hermitian(h);
    const Vector ph = phases(es.eigenvalues, t);
    Vector coeffs = es.eigenvectors.adjoint() * psi0.amplitudes();
    coeffs.array() *= ph.array();
    return StateVector(es.eigenvectors * coeffs);
}

double transfer_fidelity(const EigenSystem& es, double t, int a, int b) {
    const int dim = static_cast<int>(es.eigenvalues.size());
    check_index(a, dim, "source");
    check_index(b, dim, "target");
    const Vector ph = phases(es.eigenvalues, t);
    // <b| U |a> = sum_k V(b,k) e^{-i lambda_k t} conj(V(a,k))
    const Complex amp =
        (es.eigenvectors.row(b - 1).array() * ph.transpose().array() *
         es.eigenvectors.row(a - 1).conjugate().array())
            .sum();
    return std::clamp(std::norm(amp), 0.0, 1.0);
}

double transfer_fidelity(const HermitianOperator& h, double t, int a, int b) {
    return transfer_fidelity(eig_hermitian(h), t, a, b);
}

FidelityGradient fidelity_gradient(const HermitianOperator& h_base,
                                   const RealVector& bias, double t,
                                   int a, int b) {
    const int dim = h_base.dim();
    if (bias.size() != dim)
        throw ValidationError("fidelity_gradient: bias length does not match operator");
    check_index(a, dim, "source");
    check_index(b, dim, "target");

    Matrix h = h_base.matrix();
    h.diagonal() += bias.cast<Complex>();
    const EigenSystem es = eig_hermitian(HermitianOperator(h));
    const Matrix& v = es.eigenvectors;
    const RealVector& lam = es.eigenvalues;
    const Vector ph = phases(lam, t);

    const Complex amp =
        (v.row(b - 1).array() * ph.transpose().array() *
         v.row(a - 1).conjugate().array())
            .sum();

    // First-order change of exp(-iHt) under dH, in the eigenbasis:
    // d(exp)_{jk} = phi_{jk} (V^dag dH V)_{jk} with the divided difference
    // phi_{jk} = (e_j - e_k)/(lambda_j - lambda_k), e_j = exp(-i lambda_j t),
    // and the confluent limit phi_{jj} = -i t e_j.
    Matrix phi(dim, dim);
    for (int j = 0; j < dim; ++j) {
        for (int k = 0; k < dim; ++k) {
            const double gap = lam(j) - lam(k);
            phi(j, k) = std::abs(gap) < kDegeneracyTol
                            ? -kI * t * ph(j)
                            : (ph(j) - ph(k)) / gap;
        }
    }

    // Weight matrix G_{jk} = V(b,j) conj(V(a,k)) phi_{jk}; then for the
    // bias on site l (dH = e_l e_l^T):
    //   dA/dDelta_l = conj(V(l,:)) G V(l,:)^T.
    Matrix g = (v.row(b - 1).transpose() * v.row(a - 1).conjugate()).cwiseProduct(phi);

    FidelityGradient grad;
    grad.d_bias.resize(dim);
    const Complex amp_conj = std::conj(amp);
    for (int l = 0; l < dim; ++l) {
        const Complex da = (v.row(l).conjugate() * g * v.row(l).transpose())(0, 0);
        grad.d_bias(l) = 2.0 * std::real(amp_conj * da);
    }

    const Complex damp_dt =
        (v.row(b - 1).array() *
         (-kI * lam.cast<Complex>().array().transpose()) * ph.transpose().array() *
         v.row(a - 1).conjugate().array())
            .sum();
    grad.d_time = 2.0 * std::real(amp_conj * damp_dt);
    return grad;
}

} // namespace rim
