#include "eatem/device.hpp"

#include <cmath>
#include <sstream>

#include "eatem/error.hpp"
#include "eatem/io.hpp"
#include "eatem/phase.hpp"

namespace eatem {

using K = PhysicalConstants;

BeamSpec beam_from_energy(double kinetic_energy_ev, double waist) {
    if (!(kinetic_energy_ev > 0.0) || !std::isfinite(kinetic_energy_ev)) {
        throw Error(ErrorKind::invalid_argument, "beam kinetic energy must be positive");
    }
    if (!(waist > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "beam waist must be positive");
    }
    const double ek = kinetic_energy_ev * K::e;
    const double rest = K::m_e * K::c * K::c;
    const double pc = std::sqrt(ek * (ek + 2.0 * rest));
    BeamSpec b;
    b.kinetic_energy_ev = kinetic_energy_ev;
    b.momentum = pc / K::c;
    b.velocity = pc * K::c / (ek + rest);
    b.wavelength = K::h / b.momentum;
    b.waist = waist;
    return b;
}

namespace {

void require_waist(const BeamSpec& beam) {
    if (!(beam.waist > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "beam waist must be positive");
    }
    if (!(beam.momentum > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "beam momentum must be positive");
    }
}

}  // namespace

FluxDeflection flux_deflection(const BeamSpec& beam) {
    require_waist(beam);
    FluxDeflection f;
    f.theta_d = K::h / (2.0 * beam.momentum * beam.waist);
    f.theta_b = beam.wavelength / beam.waist;
    f.ratio = f.theta_d / f.theta_b;
    return f;
}

double lorentz_consistency(const BeamSpec& beam, double flux_path_length) {
    require_waist(beam);
    if (!(flux_path_length > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "flux path length must be positive");
    }
    const double force = K::e * beam.velocity * K::phi0 / (beam.waist * flux_path_length);
    const double duration = flux_path_length / beam.velocity;
    return force * duration / beam.momentum;
}

double charge_deflection(const BeamSpec& beam) {
    require_waist(beam);
    if (!(beam.velocity > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "beam velocity must be positive");
    }
    return K::e * K::e / (K::epsilon0 * beam.waist * beam.velocity * beam.momentum);
}

SquidSpec squid_sizing(double wafer_thickness, double permeability, double log_factor) {
    if (!(wafer_thickness > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "wafer thickness must be positive");
    }
    if (!(permeability > 0.0) || !(log_factor > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "permeability and log factor must be positive");
    }
    SquidSpec s;
    s.wafer_thickness = wafer_thickness;
    s.flux_path_length = wafer_thickness;
    s.permeability = permeability;
    s.inductance = log_factor * permeability * wafer_thickness;
    s.critical_current = K::phi0 / s.inductance;
    s.lateral_size = 10e-6;
    return s;
}

double ab_phase(double flux_fraction, int turns) {
    if (!(flux_fraction >= 0.0) || turns < 1) {
        throw Error(ErrorKind::invalid_argument, "ab_phase needs flux_fraction >= 0 and turns >= 1");
    }
    return pi * flux_fraction * static_cast<double>(turns);
}

DesignReport design_report(const BeamSpec& beam, const SquidSpec& squid, const GroupTiming& timing) {
    DesignReport r;
    auto add = [&](std::string name, double value, std::string unit) {
        r.quantities.push_back({std::move(name), value, std::move(unit)});
    };
    const FluxDeflection flux = flux_deflection(beam);
    const double lorentz = lorentz_consistency(beam, squid.flux_path_length);
    const double charge = charge_deflection(beam);

    add("beam.kinetic_energy", beam.kinetic_energy_ev, "eV");
    add("beam.wavelength", beam.wavelength, "m");
    add("beam.momentum", beam.momentum, "kg*m/s");
    add("beam.velocity", beam.velocity, "m/s");
    add("beam.velocity_over_c", beam.velocity / K::c, "1");
    add("beam.waist", beam.waist, "m");
    add("deflection.theta_d_flux", flux.theta_d, "rad");
    add("deflection.theta_b", flux.theta_b, "rad");
    add("deflection.ratio", flux.ratio, "1");
    add("deflection.theta_d_lorentz", lorentz, "rad");
    add("deflection.theta_d_charge", charge, "rad");
    add("deflection.charge_over_flux", charge / flux.theta_d, "1");
    add("squid.wafer_thickness", squid.wafer_thickness, "m");
    add("squid.flux_path_length", squid.flux_path_length, "m");
    add("squid.permeability", squid.permeability, "H/m");
    add("squid.inductance", squid.inductance, "H");
    add("squid.critical_current", squid.critical_current, "A");
    add("squid.L_ic_over_phi0", squid.inductance * squid.critical_current / K::phi0, "1");
    add("squid.lateral_size", squid.lateral_size, "m");
    add("squid.turns", squid.turns, "1");
    add("timing.group_duration", timing.group_duration, "s");
    add("timing.mqc_frequency", timing.mqc_frequency, "Hz");

    r.timing_margin = 1.0 / (timing.mqc_frequency * timing.group_duration);
    r.timing_ok = r.timing_margin >= timing.required_margin;
    add("timing.margin", r.timing_margin, "1");
    add("coherence.width", timing.coherence_width, "m");
    r.coherence_ok = squid.lateral_size <= timing.coherence_width;

    if (!r.timing_ok) {
        r.warnings.push_back("group duration " + format_double(timing.group_duration) +
                             " s is not well below the MQC period " + format_double(1.0 / timing.mqc_frequency) +
                             " s (margin " + format_double(r.timing_margin) + ")");
    }
    if (!r.coherence_ok) {
        r.warnings.push_back("qubit lateral size " + format_double(squid.lateral_size) +
                             " m exceeds the beam coherence width " + format_double(timing.coherence_width) + " m");
    }
    if (charge >= 0.1 * flux.theta_d) {
        r.warnings.push_back("electrostatic deflection is not negligible against the flux deflection");
    }
    return r;
}

std::string DesignReport::csv() const {
    CsvWriter w;
    w.row({"quantity", "value", "unit"});
    for (const auto& q : quantities) {
        w.row({q.name, format_double(q.value), q.unit});
    }
    return w.str();
}

std::string DesignReport::text() const {
    std::ostringstream out;
    out << "flux-qubit device design\n";
    for (const auto& q : quantities) {
        out << "  " << q.name;
        for (std::size_t pad = q.name.size(); pad < 30; ++pad) {
            out << ' ';
        }
        out << format_double(q.value) << ' ' << q.unit << '\n';
    }
    out << "timing: " << (timing_ok ? "pass" : "FLAGGED") << '\n';
    out << "coherence: " << (coherence_ok ? "pass" : "WARNING") << '\n';
    for (const auto& w : warnings) {
        out << "warning: " << w << '\n';
    }
    return out.str();
}

}  // namespace eatem
