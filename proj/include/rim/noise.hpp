#pragma once

#include "rim/quantum.hpp"
#include "rim/rng.hpp"
#include "rim/spin_chain.hpp"
#include "rim/stats.hpp"

namespace rim {

/// Multiplicative i.i.d. Gaussian uncertainty on every coupling and every
/// on-site bias of the chain.
struct NoiseModel {
    double sigma = 0.0;

    void validate() const;
};

/// One realization of the relative perturbations: gamma_couplings(k)
/// scales the bond (k, k+1), gamma_biases(l) scales site l.
struct NoiseDraw {
    RealVector gamma_couplings;
    RealVector gamma_biases;
};

/// Draws gamma ~ N(0, sigma^2) for M-1 bonds and M sites. sigma = 0
/// returns exact zeros without consuming any randomness, so noiseless
/// results are bit-identical regardless of stream state.
NoiseDraw sample_noise(const NoiseModel& model, int length, RngStream& rng);

/// Applies the draw to the controller's Hamiltonian: bond k becomes
/// J (1 + gamma_k) on both symmetric off-diagonal entries, site l becomes
/// Delta_l (1 + gamma_l). Hermiticity is preserved by construction.
Matrix perturbed_hamiltonian(const ChainSpec& spec, const Controller& ctrl,
                             const NoiseDraw& draw);

/// Transfer fidelity of one perturbed realization.
double perturbed_fidelity(const ChainSpec& spec, const Controller& ctrl,
                          const NoiseDraw& draw);

/// n fidelity draws for a controller under the model. Sample s uses the
/// derived stream rng.child(s), so the set is independent of evaluation
/// order and thread count. sigma = 0 short-circuits to n copies of the
/// noiseless fidelity.
FidelitySampleSet sample_fidelities(const ChainSpec& spec,
                                    const Controller& ctrl,
                                    const NoiseModel& model, int n,
                                    RngStream rng);

} // namespace rim
