#pragma once

// System-strength indices seen by the HVDC terminal.

#include "blackstart/errors.hpp"
#include "blackstart/grid_model.hpp"

#include <complex>
#include <optional>
#include <span>

namespace blackstart {

struct StrengthSnapshot {
    double t = 0.0;              ///< minutes
    double scc_mva = 0.0;        ///< short-circuit capacity at the HVDC node
    double frc_mw_per_hz = 0.0;  ///< frequency regulation capability
    std::optional<double> scr;   ///< present only while DC power flows
};

/// Short-circuit capacity U^2 / |z_dd| in MVA.
inline double scc(std::complex<double> z_dd, double u_d, double s_base) {
    if (u_d == 0.0) return 0.0;
    const double mag = std::abs(z_dd);
    if (mag == 0.0) throw ZeroImpedance();
    return u_d * u_d / mag * s_base;
}

/// Frequency regulation capability of the grid-connected generators.
inline double frc(std::span<const Generator* const> connected) {
    double total = 0.0;
    for (const Generator* g : connected) total += g->frc_contribution();
    return total;
}

inline double scr(double scc_mva, double p_d_mw) {
    if (p_d_mw <= 0.0) throw ZeroDcPower();
    return scc_mva / p_d_mw;
}

}  // namespace blackstart
