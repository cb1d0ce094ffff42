#pragma once

// AC-DC power flow of the energized subnetwork and the operating-limit checks
// applied at every restoration step.
//
// The AC side is a polar Newton-Raphson solve. The DC side couples through the
// inverter: after each AC solve the converter reactive demand is recomputed at
// the solved AC voltage of the HVDC bus (the transformer EMF follows the AC
// voltage) and the AC solve is repeated until the demand settles.

#include "blackstart/errors.hpp"
#include "blackstart/grid_model.hpp"
#include "blackstart/hvdc.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace blackstart {

enum class BusType { pq, pv, slack };

/// Inputs of one power flow, indexed by model node. Nodes with `energized == 0`
/// are ignored.
struct PowerFlowCase {
    std::vector<char> energized;
    std::vector<int> branches;  ///< restored branch indices
    std::vector<BusType> type;
    std::vector<double> p_gen_mw;  ///< scheduled generation at PV buses
    std::vector<double> v_set;     ///< voltage magnitude at PV and slack buses
    std::vector<double> p_load_mw;
    std::vector<double> q_load_mvar;

    explicit PowerFlowCase(std::size_t n_nodes = 0)
        : energized(n_nodes, 0), type(n_nodes, BusType::pq), p_gen_mw(n_nodes, 0.0), v_set(n_nodes, 1.0),
          p_load_mw(n_nodes, 0.0), q_load_mvar(n_nodes, 0.0) {}
};

/// Converter injection at the HVDC bus. Inactive unless the converter is started.
struct DcInjection {
    bool active = false;
    double p_d_mw = 0.0;
    double q_d_mvar = 0.0;  ///< starting estimate; updated by the alternating iteration
    double q_filter_mvar = 0.0;
};

struct PowerFlowOptions {
    double tolerance_pu = 1e-6;
    int max_newton_iterations = 20;
    int max_outer_iterations = 50;
    double q_d_tolerance_mvar = 0.1;
};

struct PowerFlowSolution {
    std::vector<double> vm;  ///< per node, p.u. (0 when de-energized)
    std::vector<double> va;  ///< per node, radians
    std::vector<double> p_inj_mw;   ///< net computed injection per node
    std::vector<double> q_inj_mvar;
    std::vector<double> p_from_mw;  ///< per branch, measured at the from end
    std::vector<double> p_to_mw;
    std::vector<double> q_from_mvar;
    std::vector<double> q_to_mvar;
    double slack_p_mw = 0.0;
    double slack_q_mvar = 0.0;
    double q_d_mvar = 0.0;
    double losses_mw = 0.0;
    double max_mismatch_pu = 0.0;
    int outer_iterations = 0;
    int newton_iterations = 0;
    bool converged = false;

    /// Generation at `node` implied by the solved injection, the local load and the converter.
    [[nodiscard]] double node_generation_p(const PowerFlowCase& c, int node, double dc_p_mw = 0.0) const {
        return p_inj_mw[node] + c.p_load_mw[node] - dc_p_mw;
    }
    [[nodiscard]] double node_generation_q(const PowerFlowCase& c, int node, double dc_q_mvar = 0.0) const {
        return q_inj_mvar[node] + c.q_load_mvar[node] - dc_q_mvar;
    }

    /// Sending-end flow in from-to sign convention.
    [[nodiscard]] double sending_flow_mw(int branch) const {
        return p_from_mw[branch] >= 0.0 ? p_from_mw[branch] : -p_to_mw[branch];
    }
};

namespace detail {

struct AcNetwork {
    std::vector<int> buses;  ///< model node of each local bus
    std::vector<int> local;  ///< model node -> local bus or -1
    Eigen::MatrixXcd y;
};

inline AcNetwork assemble(const GridModel& model, const PowerFlowCase& c) {
    AcNetwork net;
    net.local.assign(model.node_count(), -1);
    for (std::size_t i = 0; i < model.node_count(); ++i) {
        if (!c.energized[i]) continue;
        net.local[i] = static_cast<int>(net.buses.size());
        net.buses.push_back(static_cast<int>(i));
    }
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    net.y = Eigen::MatrixXcd::Zero(n, n);
    const double s_base = model.params.s_base;
    for (int b : c.branches) {
        const auto& br = model.branches[b];
        const int f = net.local[br.from];
        const int t = net.local[br.to];
        if (f < 0 || t < 0) throw ValidationError("branch " + std::to_string(br.id) + " has a de-energized endpoint");
        const std::complex<double> ys = 1.0 / br.impedance;
        const std::complex<double> ysh(0.0, 0.5 * br.charging_mvar / s_base);
        net.y(f, f) += ys + ysh;
        net.y(t, t) += ys + ysh;
        net.y(f, t) -= ys;
        net.y(t, f) -= ys;
    }
    return net;
}

struct NewtonResult {
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
};

// Polar Newton-Raphson on the local network. vm/va hold the initial guess and
// receive the solution. p_spec/q_spec are net scheduled injections in p.u.
inline NewtonResult newton(const AcNetwork& net, std::span<const BusType> type, std::span<const double> p_spec,
                           std::span<const double> q_spec, Eigen::VectorXd& vm, Eigen::VectorXd& va,
                           const PowerFlowOptions& opt) {
    const auto n = static_cast<int>(net.buses.size());
    std::vector<int> ang_idx(n, -1);
    std::vector<int> mag_idx(n, -1);
    int dim = 0;
    for (int i = 0; i < n; ++i)
        if (type[i] != BusType::slack) ang_idx[i] = dim++;
    for (int i = 0; i < n; ++i)
        if (type[i] == BusType::pq) mag_idx[i] = dim++;

    const Eigen::MatrixXd g = net.y.real();
    const Eigen::MatrixXd bm = net.y.imag();
    Eigen::VectorXd p_calc(n);
    Eigen::VectorXd q_calc(n);
    Eigen::VectorXd mismatch(dim);

    auto evaluate = [&] {
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            double p = 0.0;
            double q = 0.0;
            for (int k = 0; k < n; ++k) {
                const double gik = g(i, k);
                const double bik = bm(i, k);
                if (gik == 0.0 && bik == 0.0) continue;
                const double th = va(i) - va(k);
                const double c = std::cos(th);
                const double s = std::sin(th);
                p += vm(k) * (gik * c + bik * s);
                q += vm(k) * (gik * s - bik * c);
            }
            p_calc(i) = vm(i) * p;
            q_calc(i) = vm(i) * q;
            if (ang_idx[i] >= 0) {
                mismatch(ang_idx[i]) = p_spec[i] - p_calc(i);
                worst = std::max(worst, std::abs(mismatch(ang_idx[i])));
            }
            if (mag_idx[i] >= 0) {
                mismatch(mag_idx[i]) = q_spec[i] - q_calc(i);
                worst = std::max(worst, std::abs(mismatch(mag_idx[i])));
            }
        }
        return worst;
    };

    NewtonResult res;
    res.max_mismatch = evaluate();
    if (dim == 0) {
        res.converged = true;
        return res;
    }
    Eigen::MatrixXd jac(dim, dim);
    for (int it = 0; it < opt.max_newton_iterations; ++it) {
        if (res.max_mismatch < opt.tolerance_pu) {
            res.converged = true;
            return res;
        }
        jac.setZero();
        for (int i = 0; i < n; ++i) {
            const int ri_p = ang_idx[i];
            const int ri_q = mag_idx[i];
            if (ri_p < 0 && ri_q < 0) continue;
            for (int k = 0; k < n; ++k) {
                const double gik = g(i, k);
                const double bik = bm(i, k);
                if (i != k && gik == 0.0 && bik == 0.0) continue;
                const int ck_a = ang_idx[k];
                const int ck_m = mag_idx[k];
                if (i == k) {
                    const double v = vm(i);
                    if (ri_p >= 0) {
                        if (ck_a >= 0) jac(ri_p, ck_a) = -q_calc(i) - bik * v * v;
                        if (ck_m >= 0) jac(ri_p, ck_m) = p_calc(i) / v + gik * v;
                    }
                    if (ri_q >= 0) {
                        if (ck_a >= 0) jac(ri_q, ck_a) = p_calc(i) - gik * v * v;
                        if (ck_m >= 0) jac(ri_q, ck_m) = q_calc(i) / v - bik * v;
                    }
                    continue;
                }
                const double th = va(i) - va(k);
                const double c = std::cos(th);
                const double s = std::sin(th);
                const double gs_bc = gik * s - bik * c;
                const double gc_bs = gik * c + bik * s;
                if (ri_p >= 0) {
                    if (ck_a >= 0) jac(ri_p, ck_a) = vm(i) * vm(k) * gs_bc;
                    if (ck_m >= 0) jac(ri_p, ck_m) = vm(i) * gc_bs;
                }
                if (ri_q >= 0) {
                    if (ck_a >= 0) jac(ri_q, ck_a) = -vm(i) * vm(k) * gc_bs;
                    if (ck_m >= 0) jac(ri_q, ck_m) = vm(i) * gs_bc;
                }
            }
        }
        const Eigen::VectorXd dx = jac.partialPivLu().solve(mismatch);
        if (!dx.allFinite()) return res;
        for (int i = 0; i < n; ++i) {
            if (ang_idx[i] >= 0) va(i) += dx(ang_idx[i]);
            if (mag_idx[i] >= 0) vm(i) += dx(mag_idx[i]);
        }
        ++res.iterations;
        res.max_mismatch = evaluate();
    }
    res.converged = res.max_mismatch < opt.tolerance_pu;
    return res;
}

}  // namespace detail

/// Alternating AC-DC power flow. `warm_start`, when given, seeds the AC
/// voltages (per model node); otherwise the solve starts flat. Throws Diverged.
inline PowerFlowSolution solve_acdc(const GridModel& model, const PowerFlowCase& c, const DcInjection& dc,
                                    const PowerFlowOptions& opt = {},
                                    const PowerFlowSolution* warm_start = nullptr) {
    const auto net = detail::assemble(model, c);
    const int n = static_cast<int>(net.buses.size());
    const double s_base = model.params.s_base;
    const int d_node = model.hvdc_node();
    const int d_local = d_node >= 0 ? net.local[d_node] : -1;
    const bool dc_on = dc.active && d_local >= 0;
    const HvdcTerminal* term = model.hvdc ? &*model.hvdc : nullptr;

    std::vector<BusType> type(n);
    std::vector<double> p_spec(n);
    std::vector<double> q_spec(n);
    Eigen::VectorXd vm(n);
    Eigen::VectorXd va(n);
    int slack_count = 0;
    for (int i = 0; i < n; ++i) {
        const int node = net.buses[i];
        type[i] = c.type[node];
        if (type[i] == BusType::slack) ++slack_count;
        p_spec[i] = ((type[i] == BusType::pv ? c.p_gen_mw[node] : 0.0) - c.p_load_mw[node]) / s_base;
        q_spec[i] = -c.q_load_mvar[node] / s_base;
        const bool has_guess = warm_start && warm_start->vm.size() == c.energized.size() && warm_start->vm[node] > 0;
        vm(i) = type[i] == BusType::pq ? (has_guess ? warm_start->vm[node] : 1.0) : c.v_set[node];
        va(i) = has_guess ? warm_start->va[node] : 0.0;
    }
    if (warm_start && warm_start->vm.size() == c.energized.size()) {
        // buses new since the previous solution start from a solved neighbour
        std::vector<char> seeded(n, 0);
        for (int i = 0; i < n; ++i) seeded[i] = warm_start->vm[net.buses[i]] > 0;
        for (bool grew = true; grew;) {
            grew = false;
            for (int b : c.branches) {
                const int f = net.local[model.branches[b].from];
                const int t = net.local[model.branches[b].to];
                if (seeded[f] == seeded[t]) continue;
                const int from = seeded[f] ? f : t;
                const int to = seeded[f] ? t : f;
                if (type[to] == BusType::pq) vm(to) = vm(from);
                va(to) = va(from);
                seeded[to] = 1;
                grew = true;
            }
        }
    }
    if (slack_count != 1) throw ValidationError("power flow needs exactly one slack bus in the energized network");
    if (dc_on) {
        p_spec[d_local] += (dc.p_d_mw - term->station_loss_mw) / s_base;
    }
    for (int i = 0; i < n; ++i)
        if (type[i] == BusType::slack) va(i) = 0.0;

    PowerFlowSolution sol;
    double q_d = dc_on ? dc.q_d_mvar : 0.0;
    const std::vector<double> q_spec_ac = q_spec;
    for (int outer = 1; outer <= opt.max_outer_iterations; ++outer) {
        q_spec = q_spec_ac;
        // converter reactive exchange enters the bus balance as (Q_D - Q_filter)
        if (dc_on) q_spec[d_local] += (q_d - dc.q_filter_mvar) / s_base;
        const auto res = detail::newton(net, type, p_spec, q_spec, vm, va, opt);
        sol.newton_iterations += res.iterations;
        sol.max_mismatch_pu = res.max_mismatch;
        sol.outer_iterations = outer;
        if (!res.converged)
            throw Diverged("Newton iteration did not converge (mismatch " + std::to_string(res.max_mismatch) + " p.u.)");
        if (!dc_on) {
            sol.converged = true;
            break;
        }
        const double q_new = converter_operating_point(*term, dc.p_d_mw, vm(d_local)).q_d_mvar;
        if (std::abs(q_new - q_d) < opt.q_d_tolerance_mvar) {
            sol.converged = true;
            break;
        }
        q_d = q_new;
    }
    if (!sol.converged) throw Diverged("AC-DC alternating iteration reached its iteration cap");
    sol.q_d_mvar = q_d;

    const std::size_t n_nodes = model.node_count();
    sol.vm.assign(n_nodes, 0.0);
    sol.va.assign(n_nodes, 0.0);
    sol.p_inj_mw.assign(n_nodes, 0.0);
    sol.q_inj_mvar.assign(n_nodes, 0.0);
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) {
        v(i) = std::polar(vm(i), va(i));
        sol.vm[net.buses[i]] = vm(i);
        sol.va[net.buses[i]] = va(i);
    }
    const Eigen::VectorXcd s_inj = v.cwiseProduct((net.y * v).conjugate());
    for (int i = 0; i < n; ++i) {
        sol.p_inj_mw[net.buses[i]] = s_inj(i).real() * s_base;
        sol.q_inj_mvar[net.buses[i]] = s_inj(i).imag() * s_base;
        if (type[i] == BusType::slack) {
            sol.slack_p_mw = s_inj(i).real() * s_base + c.p_load_mw[net.buses[i]];
            sol.slack_q_mvar = s_inj(i).imag() * s_base + c.q_load_mvar[net.buses[i]];
        }
    }
    const std::size_t n_br = model.branch_count();
    sol.p_from_mw.assign(n_br, 0.0);
    sol.p_to_mw.assign(n_br, 0.0);
    sol.q_from_mvar.assign(n_br, 0.0);
    sol.q_to_mvar.assign(n_br, 0.0);
    for (int b : c.branches) {
        const auto& br = model.branches[b];
        const auto vf = v(net.local[br.from]);
        const auto vt = v(net.local[br.to]);
        const std::complex<double> ys = 1.0 / br.impedance;
        const std::complex<double> ysh(0.0, 0.5 * br.charging_mvar / s_base);
        const auto s_f = vf * std::conj((vf - vt) * ys + vf * ysh) * s_base;
        const auto s_t = vt * std::conj((vt - vf) * ys + vt * ysh) * s_base;
        sol.p_from_mw[b] = s_f.real();
        sol.p_to_mw[b] = s_t.real();
        sol.q_from_mvar[b] = s_f.imag();
        sol.q_to_mvar[b] = s_t.imag();
        sol.losses_mw += s_f.real() + s_t.real();
    }
    return sol;
}

// =============================================================================
// Operating limits
// =============================================================================

enum class Constraint {
    generator_active,   ///< generator active-power bounds
    generator_reactive, ///< generator reactive-power bounds
    start_window,       ///< hot/cold start-up time windows
    active_balance,     ///< sources cover cranking power and restored load
    reactive_balance,   ///< surplus reactive power within absorption capability
    branch_flow,        ///< branch active-power capacity
    bus_voltage,        ///< bus voltage band
    power_flow,         ///< power flow did not converge
    hvdc_startup,       ///< converter strength gate or SCR ceiling not met
};

inline const char* to_string(Constraint c) {
    switch (c) {
        case Constraint::generator_active: return "generator_active";
        case Constraint::generator_reactive: return "generator_reactive";
        case Constraint::start_window: return "start_window";
        case Constraint::active_balance: return "active_balance";
        case Constraint::reactive_balance: return "reactive_balance";
        case Constraint::branch_flow: return "branch_flow";
        case Constraint::bus_voltage: return "bus_voltage";
        case Constraint::power_flow: return "power_flow";
        case Constraint::hvdc_startup: return "hvdc_startup";
    }
    return "unknown";
}

struct Violation {
    Constraint constraint{};
    std::string entity;
    double value = 0.0;
    double bound = 0.0;
};

struct LimitReport {
    std::vector<Violation> violations;
    [[nodiscard]] bool feasible() const { return violations.empty(); }
    [[nodiscard]] std::string summary() const {
        std::string out;
        for (const auto& v : violations) {
            if (!out.empty()) out += "; ";
            out += std::string(to_string(v.constraint)) + " at " + v.entity + " (value " + std::to_string(v.value) +
                   ", bound " + std::to_string(v.bound) + ")";
        }
        return out;
    }
};

struct GeneratorStatus {
    bool started = false;
    bool connected = false;
    double start_time = 0.0;
    double available_mw = 0.0;  ///< ramp capability at this instant
};

/// Restoration state a power-flow solution belongs to.
struct RestorationState {
    double t = 0.0;
    std::vector<char> energized;           ///< per node
    std::vector<int> restored_branches;
    std::vector<GeneratorStatus> generators;
    HvdcState hvdc;
    double restored_load_p_mw = 0.0;
    double restored_load_q_mvar = 0.0;

    /// Left-hand side of the active balance: DC net of station loss plus
    /// online generation, less cranking power of units still starting.
    [[nodiscard]] double active_supply(const GridModel& model) const {
        double supply = 0.0;
        if (hvdc.started() && model.hvdc) supply += hvdc.p_d_mw - model.hvdc->station_loss_mw;
        for (std::size_t g = 0; g < generators.size(); ++g) {
            const auto& s = generators[g];
            if (s.connected)
                supply += s.available_mw;
            else if (s.started)
                supply -= model.generators[g].cranking_power_mw;
        }
        return supply;
    }
};

/// Slack on MW / MVar limits; well above the power-flow mismatch tolerance.
constexpr double power_tolerance = 1e-2;
/// Slack on per-unit voltage limits.
constexpr double voltage_tolerance = 1e-6;

/// Evaluates every operating limit; an empty report means the state is feasible.
inline LimitReport check_limits(const PowerFlowSolution& sol, const PowerFlowCase& pf_case, const GridModel& model,
                                const RestorationState& state) {
    LimitReport rep;
    auto add = [&](Constraint c, std::string entity, double value, double bound) {
        rep.violations.push_back({c, std::move(entity), value, bound});
    };
    const bool dc_on = state.hvdc.started();

    double q_absorb = 0.0;
    double q_scr = 0.0;
    for (std::size_t g = 0; g < model.generators.size(); ++g) {
        const auto& gen = model.generators[g];
        const auto& st = state.generators[g];
        const auto name = "generator " + std::to_string(gen.id);
        if (st.connected) {
            q_absorb += gen.max_absorb_mvar;
            q_scr += gen.scr_coeff * gen.rated_capacity_mva;
            const double p = sol.node_generation_p(pf_case, gen.node);
            const double q = sol.node_generation_q(pf_case, gen.node);
            if (p < gen.active_limits.lo - power_tolerance) add(Constraint::generator_active, name, p, gen.active_limits.lo);
            if (p > gen.active_limits.hi + power_tolerance) add(Constraint::generator_active, name, p, gen.active_limits.hi);
            if (q < gen.reactive_limits.lo - power_tolerance)
                add(Constraint::generator_reactive, name, q, gen.reactive_limits.lo);
            if (q > gen.reactive_limits.hi + power_tolerance)
                add(Constraint::generator_reactive, name, q, gen.reactive_limits.hi);
        }
        if (st.started && !gen.is_black_start && gen.hot_start_deadline && gen.cold_start_earliest) {
            if (st.start_time > *gen.hot_start_deadline && st.start_time < *gen.cold_start_earliest)
                add(Constraint::start_window, name, st.start_time, *gen.cold_start_earliest);
        }
    }

    const double supply = state.active_supply(model);
    if (supply < state.restored_load_p_mw - power_tolerance)
        add(Constraint::active_balance, "system", supply, state.restored_load_p_mw);

    double q_charging = 0.0;
    for (int b : state.restored_branches) q_charging += model.branches[b].charging_mvar;
    const double q_surplus = q_charging - state.restored_load_q_mvar +
                             (dc_on ? state.hvdc.q_filter_mvar - state.hvdc.q_d_mvar : 0.0);
    const double q_cap = std::min(q_absorb, q_scr);
    if (q_surplus > q_cap + power_tolerance) add(Constraint::reactive_balance, "system", q_surplus, q_cap);

    for (int b : state.restored_branches) {
        const auto& br = model.branches[b];
        const double f = sol.sending_flow_mw(b);
        const auto name = "branch " + std::to_string(br.id);
        if (f < br.flow_limits.lo - power_tolerance) add(Constraint::branch_flow, name, f, br.flow_limits.lo);
        if (f > br.flow_limits.hi + power_tolerance) add(Constraint::branch_flow, name, f, br.flow_limits.hi);
    }
    for (std::size_t i = 0; i < model.node_count(); ++i) {
        if (!state.energized[i]) continue;
        const auto& node = model.nodes[i];
        const double v = sol.vm[i];
        const auto name = "node " + std::to_string(node.id);
        if (v < node.voltage_limits.lo - voltage_tolerance) add(Constraint::bus_voltage, name, v, node.voltage_limits.lo);
        if (v > node.voltage_limits.hi + voltage_tolerance) add(Constraint::bus_voltage, name, v, node.voltage_limits.hi);
    }
    return rep;
}

}  // namespace blackstart
