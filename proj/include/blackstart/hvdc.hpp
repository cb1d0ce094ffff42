#pragma once

// LCC-HVDC inverter during restoration: start-up gating on system strength,
// the SCR-limited power ceiling and the steady-state converter equations
//
//   P_D = N_r [1.35 E_LL cos(gamma) I_D - (3/pi) X_r I_D^2]      (per-unit on P_DN)
//   Q_D = P_D sqrt((U_D0 / U_D)^2 - 1)

#include "blackstart/errors.hpp"
#include "blackstart/grid_model.hpp"
#include "blackstart/strength.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace blackstart {

enum class HvdcStatus { offline, charging, started };

struct HvdcState {
    HvdcStatus status = HvdcStatus::offline;
    double charge_start = 0.0;  ///< minutes; valid once charging
    double start_time = 0.0;    ///< minutes; valid once started
    double p_d_mw = 0.0;
    double q_d_mvar = 0.0;
    double i_d = 0.0;
    double u_d = 0.0;
    double q_filter_mvar = 0.0;

    [[nodiscard]] bool started() const { return status == HvdcStatus::started; }
};

/// True once the energized grid is strong enough for the converter to start.
inline bool startup_gate(const StrengthSnapshot& snapshot, const StartupFloors& floors, bool node_energized) {
    return node_energized && snapshot.scc_mva >= floors.scc_mva && snapshot.frc_mw_per_hz >= floors.frc_mw_per_hz;
}

/// Upper limit on DC power that keeps SCR at or above the floor.
inline double dc_ceiling(double scc_mva, double scr_floor) { return scc_mva / scr_floor; }

struct DcOperatingPoint {
    double p_d_mw = 0.0;
    double q_d_mvar = 0.0;
    double i_d = 0.0;  ///< per-unit
    double u_d = 0.0;  ///< per-unit
};

/// DC active power (MW) delivered at current `i_d`; `ac_voltage` scales the
/// converter transformer EMF.
inline double converter_power(const HvdcTerminal& term, double i_d, double ac_voltage = 1.0) {
    const double gamma = term.extinction_angle_deg * std::numbers::pi / 180.0;
    const double e = term.transformer_emf * ac_voltage;
    const double pu = term.bridges * (1.35 * e * std::cos(gamma) * i_d -
                                      3.0 / std::numbers::pi * term.transformer_reactance * i_d * i_d);
    return pu * term.rated_power_mw;
}

/// Solves the converter current for a given DC power and derives voltage and
/// reactive demand. Takes the smaller root of the current quadratic.
inline DcOperatingPoint converter_operating_point(const HvdcTerminal& term, double p_d_mw, double ac_voltage = 1.0) {
    DcOperatingPoint op;
    op.p_d_mw = p_d_mw;
    if (p_d_mw <= 0.0) return op;
    const double gamma = term.extinction_angle_deg * std::numbers::pi / 180.0;
    const double a = 1.35 * term.transformer_emf * ac_voltage * std::cos(gamma);
    const double b = 3.0 / std::numbers::pi * term.transformer_reactance;
    const double p = p_d_mw / term.rated_power_mw / term.bridges;
    if (b == 0.0) {
        if (a <= 0.0) throw NoRealRoot("converter EMF term is not positive");
        op.i_d = p / a;
    } else {
        const double disc = a * a - 4.0 * b * p;
        if (disc < 0.0 || a <= 0.0)
            throw NoRealRoot("no converter current delivers " + std::to_string(p_d_mw) + " MW");
        // numerically stable form of (a - sqrt(disc)) / (2b)
        op.i_d = 2.0 * p / (a + std::sqrt(disc));
    }
    op.u_d = p_d_mw / term.rated_power_mw / op.i_d;
    op.q_d_mvar = converter_reactive_power(p_d_mw, term.ideal_no_load_voltage * ac_voltage, op.u_d);
    return op;
}

/// DC power setting for the current strength: the smallest of rating, SCR
/// ceiling and what the energized grid can absorb, never below the minimum.
inline DcOperatingPoint dispatch(const HvdcTerminal& term, double scc_mva, bool started, double balance_cap_mw) {
    if (!started) return {};
    const double ceiling = dc_ceiling(scc_mva, term.scr_floor);
    if (ceiling < term.min_power_mw)
        throw InfeasibleDispatch("SCR ceiling " + std::to_string(ceiling) + " MW is below the minimum DC power");
    double p = std::min({term.rated_power_mw, ceiling, balance_cap_mw});
    p = std::max(p, term.min_power_mw);
    return converter_operating_point(term, p);
}

/// Installed filter output for a converter reactive demand. Without an explicit
/// schedule, banks of filter_min are added until they cover the demand.
inline double filter_output(const HvdcTerminal& term, double q_d_mvar) {
    double q = term.filter_min_mvar;
    if (term.filter_schedule.empty()) {
        if (q_d_mvar > q) q = term.filter_min_mvar * std::ceil(q_d_mvar / term.filter_min_mvar);
        return q;
    }
    for (const auto& stage : term.filter_schedule)
        if (q_d_mvar > stage.q_d_above) q += stage.added_mvar;
    return q;
}

// -----------------------------------------------------------------------------
// Step-wise DC power ceiling over a restoration
// -----------------------------------------------------------------------------

struct ProfileStep {
    double t = 0.0;
    double ceiling_mw = 0.0;
    friend bool operator==(const ProfileStep&, const ProfileStep&) = default;
};

struct DcPowerProfile {
    std::vector<ProfileStep> steps;
};

struct ProfileSample {
    double t = 0.0;
    bool started = false;
    double ceiling_mw = 0.0;
};

/// Collapses per-step ceilings into the step function, one step per change.
inline DcPowerProfile build_profile(std::span<const ProfileSample> samples) {
    DcPowerProfile profile;
    profile.steps.push_back({0.0, 0.0});
    for (const auto& s : samples) {
        if (!s.started) continue;
        if (s.ceiling_mw != profile.steps.back().ceiling_mw) profile.steps.push_back({s.t, s.ceiling_mw});
    }
    return profile;
}

}  // namespace blackstart
