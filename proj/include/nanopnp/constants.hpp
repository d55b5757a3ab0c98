#pragma once

#include <string_view>

namespace nanopnp {

inline constexpr std::string_view version_string = "0.1.0";

// SI throughout. Defaults are the values used for every worked number in the
// docs; scenarios may override temperature, permittivity and the thermal
// voltage explicitly.
struct PhysicalConstants {
    double boltzmann = 1.3806504e-23;        // J/K
    double temperature = 300.0;              // K
    double vacuum_permittivity = 8.854187817e-12; // C/(V m)
    double relative_permittivity = 78.4;     // water
    double elementary_charge = 1.602176e-19; // C
    double avogadro = 6.02214076e23;         // 1/mol

    // Thermal voltage actually used for scaling. The conventional round value;
    // k_B T / e at the defaults is 0.02585 V and is reported alongside.
    double thermal_voltage = 0.025;          // V

    double faraday() const { return elementary_charge * avogadro; } // C/mol
    double permittivity() const { return vacuum_permittivity * relative_permittivity; }
    double thermal_voltage_from_kT() const {
        return boltzmann * temperature / elementary_charge;
    }
    // 1 e/nm^2 in C/m^2.
    double charge_per_nm2() const { return elementary_charge * 1.0e18; }
};

} // namespace nanopnp
