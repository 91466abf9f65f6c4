#pragma once

#include <string>
#include <vector>

namespace eatem {

/// CODATA 2018 values (SI); h, e and c are exact.
struct PhysicalConstants {
    static constexpr double h = 6.62607015e-34;
    static constexpr double e = 1.602176634e-19;
    static constexpr double c = 299792458.0;
    static constexpr double m_e = 9.1093837015e-31;
    static constexpr double epsilon0 = 8.8541878128e-12;
    static constexpr double mu0 = 1.25663706212e-6;
    static constexpr double phi0 = h / (2.0 * e);
};

struct BeamSpec {
    double kinetic_energy_ev = 0.0;
    double wavelength = 0.0;
    double momentum = 0.0;
    double velocity = 0.0;
    double waist = 0.0;
};

struct SquidSpec {
    double wafer_thickness = 0.0;
    double flux_path_length = 0.0;
    double permeability = 0.0;
    double inductance = 0.0;
    double critical_current = 0.0;
    double lateral_size = 0.0;
    int turns = 1;
};

/// Relativistic electron kinematics; lambda = h / p.
BeamSpec beam_from_energy(double kinetic_energy_ev, double waist = 10e-6);

struct FluxDeflection {
    double theta_d = 0.0;
    double theta_b = 0.0;
    double ratio = 0.0;
};

/// theta_d = h / (2 p a), theta_b = lambda / a.
FluxDeflection flux_deflection(const BeamSpec& beam);

/// Deflection from the Lorentz impulse F * dt = (e v phi0 / (a l)) (l / v).
double lorentz_consistency(const BeamSpec& beam, double flux_path_length);

/// Electrostatic (charge-qubit) deflection e^2 / (eps0 a v p).
double charge_deflection(const BeamSpec& beam);

/// L = log_factor * mu * d and i_c = phi0 / L.
SquidSpec squid_sizing(double wafer_thickness, double permeability = PhysicalConstants::mu0, double log_factor = 1.0);

/// pi per flux quantum per turn.
double ab_phase(double flux_fraction, int turns);

struct GroupTiming {
    double group_duration = 10e-9;
    double mqc_frequency = 1e6;
    /// Required ratio of the MQC period to the group duration.
    double required_margin = 10.0;
    double coherence_width = 10e-6;
};

struct DesignQuantity {
    std::string name;
    double value = 0.0;
    std::string unit;
};

struct DesignReport {
    std::vector<DesignQuantity> quantities;
    std::vector<std::string> warnings;
    double timing_margin = 0.0;
    bool timing_ok = false;
    bool coherence_ok = false;

    std::string text() const;
    std::string csv() const;
};

DesignReport design_report(const BeamSpec& beam, const SquidSpec& squid, const GroupTiming& timing);

}  // namespace eatem
