#pragma once

#include <nlohmann/json_fwd.hpp>

#include "rim/quantum.hpp"

namespace rim {

/// XX chain in the single-excitation subspace: M sites with uniform
/// nearest-neighbour coupling J, transferring |source> -> |target>.
/// Spin indices are 1-based everywhere in the public interface.
struct ChainSpec {
    int length = 2;
    double coupling = 1.0;
    int source = 1;
    int target = 2;

    void validate() const;
};

/// "End-to-middle" target site: ceil(M / 2).
int middle_target(int length);

/// Static controller: one energy bias per site plus the readout time.
struct Controller {
    RealVector biases;
    double time = 0.0;
};

/// Box constraints on controllers. Defaults match the campaign bounds
/// used throughout: biases in [-10, 10], time in [0, 70].
struct ControlBounds {
    double delta_min = -10.0;
    double delta_max = 10.0;
    double t_min = 0.0;
    double t_max = 70.0;

    void validate() const;
    bool contains(const Controller& ctrl) const;
    Controller clamp(Controller ctrl) const;
};

/// Single-excitation XX Hamiltonian: off-diagonals J, diagonal = biases.
/// Exactly tridiagonal; all |l - m| >= 2 entries are exactly zero.
HermitianOperator build_hamiltonian(const ChainSpec& spec, const Controller& ctrl);

/// Transfer fidelity of the controller on its chain at its readout time.
double controller_fidelity(const ChainSpec& spec, const Controller& ctrl);

/// Persistence format for a controller and its chain:
/// {"M", "J", "source", "target", "biases", "time"}.
nlohmann::json controller_to_json(const ChainSpec& spec, const Controller& ctrl);
std::pair<ChainSpec, Controller> controller_from_json(const nlohmann::json& j);

} // namespace rim
