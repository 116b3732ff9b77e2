// model.cpp: frame algebra and parameter checks

#include "fluxspec/model.hpp"

#include <cmath>
#include <string>

#include "fluxspec/errors.hpp"

namespace fluxspec {

const char* frame_name(Frame f) {
    switch (f) {
    case Frame::lab: return "lab";
    case Frame::qubit: return "qubit";
    case Frame::rotating: return "rotating";
    }
    return "?";
}

double BlochState::norm() const { return std::sqrt(x * x + y * y + z * z); }

double QubitParams::theta() const { return std::atan2(epsilon, delta); }

double QubitParams::nu_q() const { return std::hypot(epsilon, delta); }

void QubitParams::validate() const {
    if (!(delta > 0.0)) throw DomainError("qubit delta must be > 0");
    if (!(gamma1 >= 0.0)) throw DomainError("qubit gamma1 must be >= 0");
    if (!(temperature > 0.0)) throw DomainError("qubit temperature must be > 0");
    if (!std::isfinite(epsilon)) throw DomainError("qubit epsilon must be finite");
}

DerivedSummary derived_params(const QubitParams& params, const DriveParams& drive) {
    DerivedSummary d;
    d.theta = params.theta();
    d.nu_q = params.nu_q();
    d.nu_r = 0.5 * drive.amplitude * std::cos(d.theta);
    d.detuning = d.nu_q - drive.carrier;
    d.eta = d.nu_r > 0.0 ? std::atan(d.detuning / d.nu_r) : 0.0;
    d.nu_r_eff = std::hypot(d.nu_r, d.detuning);
    return d;
}

double thermal_factor(double f, double temperature) {
    return std::tanh(planck * f / (2.0 * boltzmann * temperature));
}

double thermal_polarization(const QubitParams& params) {
    return -thermal_factor(params.nu_q(), params.temperature);
}

static void require_frame(const BlochState& s, Frame expected) {
    if (s.frame != expected) {
        throw FrameMismatch(std::string("expected a ") + frame_name(expected) + "-frame state, got " +
                            frame_name(s.frame));
    }
}

BlochState to_qubit_frame(const BlochState& s, const QubitParams& params) {
    require_frame(s, Frame::lab);
    const double c = std::cos(params.theta());
    const double sn = std::sin(params.theta());
    return {c * s.x - sn * s.z, s.y, c * s.z + sn * s.x, Frame::qubit};
}

BlochState from_qubit_frame(const BlochState& s, const QubitParams& params) {
    require_frame(s, Frame::qubit);
    const double c = std::cos(params.theta());
    const double sn = std::sin(params.theta());
    return {c * s.x + sn * s.z, s.y, c * s.z - sn * s.x, Frame::lab};
}

BlochState to_rotating_frame(const BlochState& s, double carrier, double t) {
    require_frame(s, Frame::qubit);
    const double a = two_pi * carrier * t;
    const double c = std::cos(a);
    const double sn = std::sin(a);
    return {c * s.x + sn * s.y, c * s.y - sn * s.x, s.z, Frame::rotating};
}

BlochState from_rotating_frame(const BlochState& s, double carrier, double t) {
    require_frame(s, Frame::rotating);
    const double a = two_pi * carrier * t;
    const double c = std::cos(a);
    const double sn = std::sin(a);
    return {c * s.x - sn * s.y, c * s.y + sn * s.x, s.z, Frame::qubit};
}

FieldVector lab_hamiltonian(const QubitParams& params, const DriveParams& drive, double t) {
    const double rf = drive.amplitude * std::cos(two_pi * drive.carrier * t + drive.phase);
    return {params.epsilon + rf, 0.0, params.delta};
}

FieldVector qubit_hamiltonian(const QubitParams& params, const DriveParams& drive, double t) {
    const double th = params.theta();
    const double rf = drive.amplitude * std::cos(two_pi * drive.carrier * t + drive.phase);
    return {rf * std::cos(th), 0.0, params.nu_q() + rf * std::sin(th)};
}

FieldVector rwa_hamiltonian(const QubitParams& params, const DriveParams& drive) {
    const auto d = derived_params(params, drive);
    return {d.nu_r * std::cos(drive.phase), d.nu_r * std::sin(drive.phase), d.detuning};
}

FieldVector rotate_to_qubit_axes(const FieldVector& v, double theta) {
    const double c = std::cos(theta);
    const double sn = std::sin(theta);
    return {c * v[0] - sn * v[2], v[1], c * v[2] + sn * v[0]};
}

} // namespace fluxspec
