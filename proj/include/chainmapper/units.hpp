// units.hpp - unit convention: hbar = 1, energies in cm^-1, time in (cm^-1)^-1, T in kelvin

#pragma once

#include <limits>
#include <string>

#include "chainmapper/error.hpp"

namespace chainmapper::units {

// Boltzmann constant in cm^-1 / K.
inline constexpr double k_boltzmann = 0.6950348;

// Inverse temperature in cm. Zero temperature maps to +infinity.
inline double beta(double temperature_K)
{
    if (!(temperature_K >= 0.0)) {
        throw ParameterError("temperature must be nonnegative, got " + std::to_string(temperature_K));
    }
    if (temperature_K == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 1.0 / (k_boltzmann * temperature_K);
}

} // namespace chainmapper::units
