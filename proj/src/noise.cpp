#include "rim/noise.hpp"

#include <cmath>

namespace rim {

void NoiseModel::validate() const {
    if (!std::isfinite(sigma) || sigma < 0.0) {
        throw ValidationError("noise level sigma must be >= 0");
    }
}

NoiseDraw sample_noise(const NoiseModel& model, int length, RngStream& rng) {
    model.validate();
    if (length < 2) {
        throw ValidationError("chain length must be at least 2");
    }
    NoiseDraw draw;
    draw.gamma_couplings = RealVector::Zero(length - 1);
    draw.gamma_biases = RealVector::Zero(length);
    if (model.sigma == 0.0) {
        return draw;
    }
    for (int k = 0; k < length - 1; ++k) {
        draw.gamma_couplings(k) = rng.next_gaussian(model.sigma);
    }
    for (int l = 0; l < length; ++l) {
        draw.gamma_biases(l) = rng.next_gaussian(model.sigma);
    }
    return draw;
}

Matrix perturbed_hamiltonian(const ChainSpec& spec, const Controller& ctrl,
                             const NoiseDraw& draw) {
    spec.validate();
    if (ctrl.biases.size() != spec.length) {
        throw ValidationError("bias vector length must match chain length");
    }
    if (draw.gamma_couplings.size() != spec.length - 1 ||
        draw.gamma_biases.size() != spec.length) {
        throw ValidationError("noise draw shape does not match chain");
    }
    Matrix h = Matrix::Zero(spec.length, spec.length);
    for (int l = 0; l < spec.length; ++l) {
        h(l, l) = ctrl.biases(l) * (1.0 + draw.gamma_biases(l));
    }
    for (int k = 0; k + 1 < spec.length; ++k) {
        const double j = spec.coupling * (1.0 + draw.gamma_couplings(k));
        h(k, k + 1) = j;
        h(k + 1, k) = j;
    }
    return h;
}

double perturbed_fidelity(const ChainSpec& spec, const Controller& ctrl,
                          const NoiseDraw& draw) {
    const Matrix h = perturbed_hamiltonian(spec, ctrl, draw);
    return transfer_fidelity(HermitianOperator(h), ctrl.time, spec.source,
                             spec.target);
}

FidelitySampleSet sample_fidelities(const ChainSpec& spec,
                                    const Controller& ctrl,
                                    const NoiseModel& model, int n,
                                    RngStream rng) {
    model.validate();
    if (n < 1) {
        throw ValidationError("sample count must be >= 1");
    }
    SampleProvenance prov;
    prov.sigma = model.sigma;
    prov.seed = rng.seed();

    if (model.sigma == 0.0) {
        const double f = controller_fidelity(spec, ctrl);
        return FidelitySampleSet(std::vector<double>(n, f), prov);
    }
    std::vector<double> samples(n);
    for (int s = 0; s < n; ++s) {
        RngStream draw_rng = rng.child(static_cast<std::uint64_t>(s));
        const NoiseDraw draw = sample_noise(model, spec.length, draw_rng);
        samples[s] = perturbed_fidelity(spec, ctrl, draw);
    }
    return FidelitySampleSet(std::move(samples), prov);
}

} // namespace rim
