#include "rim/spin_chain.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace rim {

void ChainSpec::validate() const {
    if (length < 2)
        throw ValidationError("ChainSpec: chain length must be >= 2");
    if (!(coupling > 0.0) || !std::isfinite(coupling))
        throw ValidationError("ChainSpec: coupling must be positive");
    if (source < 1 || source > length)
        throw ValidationError("ChainSpec: source outside 1..M");
    if (target < 1 || target > length)
        throw ValidationError("ChainSpec: target outside 1..M");
    if (source == target)
        throw ValidationError("ChainSpec: source and target coincide");
}

int middle_target(int length) {
    return (length + 1) / 2;
}

void ControlBounds::validate() const {
    if (!(delta_min < delta_max))
        throw ValidationError("ControlBounds: delta_min must be < delta_max");
    if (!(0.0 <= t_min && t_min < t_max))
        throw ValidationError("ControlBounds: need 0 <= t_min < t_max");
}

bool ControlBounds::contains(const Controller& ctrl) const {
    if (ctrl.time < t_min || ctrl.time > t_max)
        return false;
    return (ctrl.biases.array() >= delta_min).all() &&
           (ctrl.biases.array() <= delta_max).all();
}

Controller ControlBounds::clamp(Controller ctrl) const {
    ctrl.biases = ctrl.biases.cwiseMax(delta_min).cwiseMin(delta_max);
    ctrl.time = std::clamp(ctrl.time, t_min, t_max);
    return ctrl;
}

HermitianOperator build_hamiltonian(const ChainSpec& spec, const Controller& ctrl) {
    spec.validate();
    if (ctrl.biases.size() != spec.length)
        throw ValidationError("build_hamiltonian: bias vector length " +
                              std::to_string(ctrl.biases.size()) +
                              " does not match chain length " +
                              std::to_string(spec.length));
    Matrix h = Matrix::Zero(spec.length, spec.length);
    for (int l = 0; l < spec.length; ++l) {
        h(l, l) = ctrl.biases(l);
        if (l + 1 < spec.length) {
            h(l, l + 1) = spec.coupling;
            h(l + 1, l) = spec.coupling;
        }
    }
    return HermitianOperator(std::move(h));
}

double controller_fidelity(const ChainSpec& spec, const Controller& ctrl) {
    return transfer_fidelity(build_hamiltonian(spec, ctrl), ctrl.time,
                             spec.source, spec.target);
}

nlohmann::json controller_to_json(const ChainSpec& spec, const Controller& ctrl) {
    nlohmann::json j;
    j["M"] = spec.length;
    j["J"] = spec.coupling;
    j["source"] = spec.source;
    j["target"] = spec.target;
    j["biases"] = std::vector<double>(ctrl.biases.begin(), ctrl.biases.end());
    j["time"] = ctrl.time;
    return j;
}

std::pair<ChainSpec, Controller> controller_from_json(const nlohmann::json& j) {
    ChainSpec spec;
    Controller ctrl;
    try {
        spec.length = j.at("M").get<int>();
        spec.coupling = j.at("J").get<double>();
        spec.source = j.at("source").get<int>();
        spec.target = j.at("target").get<int>();
        const auto biases = j.at("biases").get<std::vector<double>>();
        ctrl.biases = Eigen::Map<const RealVector>(biases.data(),
                                                   static_cast<Eigen::Index>(biases.size()));
        ctrl.time = j.at("time").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("controller record: ") + e.what());
    }
    spec.validate();
    if (ctrl.biases.size() != spec.length)
        throw ValidationError("controller record: biases length does not match M");
    return {spec, ctrl};
}

} // namespace rim
