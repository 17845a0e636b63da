#include <doctest.h>

#include <cmath>
#include <complex>

#include "oracles.hpp"
#include "rim/quantum.hpp"

using namespace rim;
using oracle::expm_taylor;

namespace {

const Complex kI(0.0, 1.0);

Matrix pauli_x() {
    Matrix h(2, 2);
    h << 0.0, 1.0, 1.0, 0.0;
    return h;
}

} // namespace

TEST_CASE("hermitian operator rejects bad input") {
    Matrix lop(2, 2);
    lop << 0.0, 1.0, 0.0, 0.0; // not Hermitian
    CHECK_THROWS_AS(HermitianOperator{lop}, ValidationError);

    Matrix tiny(1, 1);
    tiny << 1.0;
    CHECK_THROWS_AS(HermitianOperator{tiny}, ValidationError);

    Matrix rect(2, 3);
    rect.setZero();
    CHECK_THROWS_AS(HermitianOperator{rect}, ValidationError);

    Matrix complex_diag(2, 2);
    complex_diag << Complex(0.0, 1e-6), 0.0, 0.0, 0.0;
    CHECK_THROWS_AS(HermitianOperator{complex_diag}, ValidationError);
}

TEST_CASE("state vector enforces unit norm and valid basis index") {
    Vector v(2);
    v << 1.0, 1.0;
    CHECK_THROWS_AS(StateVector{v}, ValidationError);

    const StateVector e2 = StateVector::basis(3, 2);
    CHECK(e2.amplitudes()(1) == Complex(1.0, 0.0));
    CHECK(e2.amplitudes()(0) == Complex(0.0, 0.0));
    CHECK_THROWS_AS(StateVector::basis(3, 0), ValidationError);
    CHECK_THROWS_AS(StateVector::basis(3, 4), ValidationError);
}

TEST_CASE("spectrum of the two-site hopping matrix is {-1, +1}") {
    const HermitianOperator h(pauli_x());
    const EigenSystem es = eig_hermitian(h);
    CHECK(es.eigenvalues(0) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(es.eigenvalues(1) == doctest::Approx(1.0).epsilon(1e-14));
    // Columns orthonormal.
    const Matrix gram = es.eigenvectors.adjoint() * es.eigenvectors;
    CHECK((gram - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("decomposition reconstructs the operator") {
    RngStream rng(11, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const int dim = 2 + static_cast<int>(rng.next_below(7));
        const Matrix a = oracle::random_hermitian(dim, rng);
        const HermitianOperator h(a);
        const EigenSystem es = eig_hermitian(h);
        const Matrix back = es.eigenvectors *
                            es.eigenvalues.asDiagonal().toDenseMatrix()
                                .cast<Complex>() *
                            es.eigenvectors.adjoint();
        CHECK((back - a).cwiseAbs().maxCoeff() < 1e-10);
        // Ascending eigenvalues.
        for (int i = 1; i < dim; ++i) {
            CHECK(es.eigenvalues(i - 1) <= es.eigenvalues(i));
        }
    }
}

TEST_CASE("propagator at t = 0 is the identity") {
    RngStream rng(12, 0);
    const HermitianOperator h(oracle::random_hermitian(5, rng));
    const Matrix u = propagator(eig_hermitian(h), 0.0);
    CHECK((u - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("propagator of the identity is a global phase") {
    const HermitianOperator h(Matrix::Identity(5, 5));
    const double t = 0.73;
    const Matrix u = propagator(eig_hermitian(h), t);
    const Matrix want = std::exp(-kI * t) * Matrix::Identity(5, 5);
    CHECK((u - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("two-site propagator has the cosine/sine closed form") {
    const HermitianOperator h(pauli_x());
    const double t = 1.3;
    const Matrix u = propagator(eig_hermitian(h), t);
    Matrix want(2, 2);
    want << std::cos(t), -kI * std::sin(t), -kI * std::sin(t), std::cos(t);
    CHECK((u - want).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("propagator agrees with a series matrix exponential") {
    RngStream rng(13, 0);
    for (int trial = 0; trial < 25; ++trial) {
        const int dim = 2 + static_cast<int>(rng.next_below(5));
        const Matrix a = oracle::random_hermitian(dim, rng);
        const double t = 3.0 * rng.next_double();
        const Matrix u = propagator(eig_hermitian(HermitianOperator(a)), t);
        const Matrix want = expm_taylor(-kI * t * a);
        CHECK((u - want).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("propagator is unitary and composes over time") {
    RngStream rng(14, 0);
    const Matrix a = oracle::random_hermitian(6, rng);
    const EigenSystem es = eig_hermitian(HermitianOperator(a));
    const double t1 = 0.9;
    const double t2 = 2.4;
    const Matrix u1 = propagator(es, t1);
    const Matrix u2 = propagator(es, t2);
    CHECK((u1 * u1.adjoint() - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <
          1e-13);
    CHECK((u1 * u2 - propagator(es, t1 + t2)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("propagate evolves states and preserves the norm") {
    RngStream rng(15, 0);
    const Matrix a = oracle::random_hermitian(4, rng);
    const HermitianOperator h(a);
    const StateVector psi0 = StateVector::basis(4, 1);
    const StateVector psi = propagate(h, 1.7, psi0);
    CHECK(psi.amplitudes().norm() == doctest::Approx(1.0).epsilon(1e-13));
    const Vector want =
        propagator(eig_hermitian(h), 1.7) * psi0.amplitudes();
    CHECK((psi.amplitudes() - want).cwiseAbs().maxCoeff() < 1e-13);
    CHECK_THROWS_AS(propagate(h, -0.1, psi0), ValidationError);
}

TEST_CASE("two-site transfer fidelity is sin^2(t)") {
    const HermitianOperator h(pauli_x());
    for (double t : {0.0, 0.4, 1.0, 1.5707963267948966, 3.0}) {
        const double f = transfer_fidelity(h, t, 1, 2);
        CHECK(f == doctest::Approx(std::sin(t) * std::sin(t)).epsilon(1e-13));
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
    }
}

TEST_CASE("fidelity indices are validated and results clamped") {
    const HermitianOperator h(pauli_x());
    CHECK_THROWS_AS(transfer_fidelity(h, 1.0, 0, 2), ValidationError);
    CHECK_THROWS_AS(transfer_fidelity(h, 1.0, 1, 3), ValidationError);
    // At the analytic maximum the amplitude is 1 up to rounding; clamping
    // keeps the value inside [0, 1].
    const double f = transfer_fidelity(h, 1.5707963267948966, 1, 2);
    CHECK(f <= 1.0);
    CHECK(f == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("both fidelity overloads agree") {
    RngStream rng(16, 0);
    const Matrix a = oracle::random_hermitian(5, rng);
    const HermitianOperator h(a);
    const EigenSystem es = eig_hermitian(h);
    for (int t10 = 0; t10 <= 30; t10 += 7) {
        const double t = t10 / 10.0;
        CHECK(transfer_fidelity(h, t, 1, 4) ==
              transfer_fidelity(es, t, 1, 4));
    }
}

TEST_CASE("two-site time gradient is 2 sin t cos t") {
    const HermitianOperator h(pauli_x());
    const RealVector zero = RealVector::Zero(2);
    for (double t : {0.3, 1.0, 2.2}) {
        const FidelityGradient g = fidelity_gradient(h, zero, t, 1, 2);
        CHECK(g.d_time ==
              doctest::Approx(2.0 * std::sin(t) * std::cos(t)).epsilon(1e-11));
    }
}

TEST_CASE("bias gradients sum to zero") {
    // Adding a constant to every site shifts H by c * I, which only
    // changes a global phase, so F is invariant along (1, ..., 1).
    RngStream rng(17, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const int dim = 3 + static_cast<int>(rng.next_below(4));
        Matrix hop = Matrix::Zero(dim, dim);
        for (int l = 0; l + 1 < dim; ++l) {
            hop(l, l + 1) = 1.0;
            hop(l + 1, l) = 1.0;
        }
        RealVector bias(dim);
        for (int l = 0; l < dim; ++l) bias(l) = rng.next_gaussian(2.0);
        const double t = 0.5 + 2.0 * rng.next_double();
        const FidelityGradient g =
            fidelity_gradient(HermitianOperator(hop), bias, t, 1, dim);
        CHECK(std::fabs(g.d_bias.sum()) < 1e-10);
    }
}

TEST_CASE("gradient matches central differences on random cases") {
    RngStream rng(18, 0);
    const double h_step = 1e-6;
    for (int trial = 0; trial < 12; ++trial) {
        const int dim = 2 + static_cast<int>(rng.next_below(5));
        const Matrix base = oracle::random_hermitian(dim, rng);
        // Zero the diagonal so the bias vector is the whole diagonal.
        Matrix hop = base;
        hop.diagonal().setZero();
        const HermitianOperator h0(hop);
        RealVector bias(dim);
        for (int l = 0; l < dim; ++l) bias(l) = rng.next_gaussian();
        const double t = 0.3 + 2.5 * rng.next_double();
        const int a = 1;
        const int b = dim;

        const FidelityGradient g = fidelity_gradient(h0, bias, t, a, b);

        auto f_of_t = [&](double tt) {
            Matrix m = hop;
            m.diagonal() = bias.cast<Complex>();
            return transfer_fidelity(HermitianOperator(m), tt, a, b);
        };
        CHECK(g.d_time ==
              doctest::Approx(oracle::central_diff(f_of_t, t, h_step))
                  .epsilon(1e-6));

        for (int l = 0; l < dim; ++l) {
            auto f_of_bias = [&](double v) {
                RealVector bl = bias;
                bl(l) = v;
                Matrix m = hop;
                m.diagonal() = bl.cast<Complex>();
                return transfer_fidelity(HermitianOperator(m), t, a, b);
            };
            const double want =
                oracle::central_diff(f_of_bias, bias(l), h_step);
            CHECK(g.d_bias(l) == doctest::Approx(want).epsilon(1e-5));
        }
    }
}

TEST_CASE("gradient handles exactly degenerate spectra") {
    // Two decoupled identical blocks give doubly degenerate eigenvalues,
    // exercising the confluent divided-difference branch.
    Matrix blocks = Matrix::Zero(4, 4);
    blocks(0, 1) = blocks(1, 0) = 1.0;
    blocks(2, 3) = blocks(3, 2) = 1.0;
    const HermitianOperator h(blocks);
    RealVector bias = RealVector::Zero(4);
    const double t = 1.1;

    const FidelityGradient g = fidelity_gradient(h, bias, t, 1, 2);

    auto f_of_t = [&](double tt) { return transfer_fidelity(h, tt, 1, 2); };
    CHECK(g.d_time ==
          doctest::Approx(oracle::central_diff(f_of_t, t, 1e-6))
              .epsilon(1e-7));
    for (int l = 0; l < 4; ++l) {
        auto f_of_bias = [&](double v) {
            RealVector bl = bias;
            bl(l) = v;
            Matrix m = blocks;
            m.diagonal() = bl.cast<Complex>();
            return transfer_fidelity(HermitianOperator(m), t, 1, 2);
        };
        CHECK(g.d_bias(l) ==
              doctest::Approx(oracle::central_diff(f_of_bias, 0.0, 1e-6))
                  .epsilon(1e-7));
    }
}
