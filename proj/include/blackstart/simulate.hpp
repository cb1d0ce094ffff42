#pragma once

// Time-stepped replay of a path restoration scheme.
//
// One crew restores the scheme's branches in order, one at a time. When a
// branch energizes a source node the source begins its start-up: a thermal
// unit once its cranking power can be supplied, the HVDC terminal by charging.
// With `hold_crew_during_startup` the crew stays with the source until it is
// grid connected (or, for the HVDC, until charging completes). Each step then
//   - applies branch restorations and grid connections to the impedance matrix,
//   - starts the HVDC once charged and the strength gate passes,
//   - dispatches DC power, picks up load, solves the AC-DC power flow,
//   - checks every operating limit.
// The objective is the negative mean supplied power over [0, T], T being the
// grid connection of the last source.

#include "blackstart/errors.hpp"
#include "blackstart/grid_model.hpp"
#include "blackstart/hvdc.hpp"
#include "blackstart/impedance.hpp"
#include "blackstart/powerflow.hpp"
#include "blackstart/strength.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace blackstart {

struct RestorationScheme {
    std::vector<int> order;          ///< branch indices in restoration order
    std::vector<char> include_link;  ///< per branch; empty means "derive from order"

    friend bool operator==(const RestorationScheme&, const RestorationScheme&) = default;
};

class InfeasibleScheme : public Error {
public:
    InfeasibleScheme(double t, LimitReport report)
        : Error("infeasible at t=" + std::to_string(t) + " min: " + report.summary()), t_(t),
          report_(std::move(report)) {}
    [[nodiscard]] double time() const noexcept { return t_; }
    [[nodiscard]] const LimitReport& report() const noexcept { return report_; }

private:
    double t_;
    LimitReport report_;
};

/// Available output of a generator connected at `connect_time`: linear ramp
/// from zero at connection to rated power.
inline double ramp_power(const Generator& gen, double connect_time, double t) {
    if (t < connect_time) return 0.0;
    return std::min(gen.rated_power_mw, gen.ramp_rate_mw_per_h / 60.0 * (t - connect_time));
}

/// Integral of ramp_power over [0, horizon], MW·min.
inline double ramp_energy(const Generator& gen, double connect_time, double horizon) {
    if (horizon <= connect_time) return 0.0;
    const double rate = gen.ramp_rate_mw_per_h / 60.0;
    const double ramp_end = connect_time + gen.ramp_minutes();
    const double span = horizon - connect_time;
    if (horizon <= ramp_end) return 0.5 * rate * span * span;
    return 0.5 * gen.rated_power_mw * gen.ramp_minutes() + gen.rated_power_mw * (horizon - ramp_end);
}

struct StartupDeviation {
    double voltage_pu = 0.0;
    double frequency_hz = 0.0;
};

/// Voltage and frequency excursions caused by starting the converter with
/// the given committed filter, converter reactive demand and DC voltage.
inline StartupDeviation startup_deviation(const HvdcTerminal& term, const StrengthSnapshot& snap,
                                          double q_filter_mvar, double q_d_mvar, double u_d) {
    StartupDeviation dev;
    const double p_start = 0.7 * 0.1 * term.rated_power_mw;
    dev.voltage_pu = snap.scc_mva > 0 ? u_d * std::abs(q_filter_mvar - q_d_mvar) / snap.scc_mva
                                      : std::numeric_limits<double>::infinity();
    dev.frequency_hz = snap.frc_mw_per_hz > 0 ? p_start / (2.0 * snap.frc_mw_per_hz)
                                              : std::numeric_limits<double>::infinity();
    return dev;
}

/// Excursions at start-up with the minimum filter and start-up operating point.
inline StartupDeviation startup_deviation(const GridModel& model, const StrengthSnapshot& snap) {
    const auto& term = *model.hvdc;
    const auto mode = startup_mode_quantities(term);
    return startup_deviation(term, snap, term.filter_min_mvar, mode.q_d_mvar, mode.u_d);
}

// -----------------------------------------------------------------------------
// Timeline
// -----------------------------------------------------------------------------

enum class SourceKind { generator, hvdc };

struct SourceRecord {
    SourceKind kind = SourceKind::generator;
    int index = -1;  ///< generator index (generators only)
    int node = -1;
    double energized_time = 0.0;
    std::optional<double> start_time;    ///< start-up (HVDC: charging start)
    std::optional<double> connect_time;  ///< grid connection (HVDC: converter start)
    std::optional<double> rated_time;    ///< generators: rated output reached
};

struct BranchRecord {
    int branch = -1;
    double t = 0.0;
    bool link = false;  ///< closed a loop
};

struct TimelineStep {
    double t = 0.0;
    int energized_nodes = 0;
    int restored_branches = 0;
    std::vector<double> gen_available_mw;
    std::vector<double> gen_dispatch_mw;
    HvdcState hvdc;
    StrengthSnapshot strength;
    double ceiling_mw = 0.0;
    double restored_load_mw = 0.0;
    double sum_p_mw = 0.0;  ///< generator capability plus DC power
    double hvdc_voltage_pu = 0.0;
    double v_min_pu = 0.0;  ///< over energized buses
    double v_max_pu = 0.0;
    double pf_max_mismatch_pu = 0.0;
    double pf_balance_residual_mw = 0.0;
    int pf_newton_iterations = 0;
    LimitReport limits;
};

struct Timeline {
    std::vector<TimelineStep> steps;
    std::vector<BranchRecord> branches;
    std::vector<SourceRecord> sources;
    StartupFloors floors;
    std::optional<StartupDeviation> startup_deviation;
    double total_time = 0.0;  ///< T
    double objective = 0.0;   ///< F, MW
    bool feasible = true;
    double violation_time = 0.0;
    LimitReport violation;

    [[nodiscard]] std::optional<double> hvdc_start() const {
        for (const auto& s : sources)
            if (s.kind == SourceKind::hvdc) return s.connect_time;
        return std::nullopt;
    }
    [[nodiscard]] double final_p_d() const { return steps.empty() ? 0.0 : steps.back().hvdc.p_d_mw; }
    /// DC power in force at time t.
    [[nodiscard]] double p_d_at(double t) const {
        double p = 0.0;
        for (const auto& s : steps) {
            if (s.t > t + 1e-9) break;
            p = s.hvdc.p_d_mw;
        }
        return p;
    }
};

struct SimulationOptions {
    PowerFlowOptions power_flow;
    bool warm_start = true;
    bool stop_on_violation = true;
};

/// Branch impedance seen by the strength calculation. Resistance is dropped,
/// as in the usual short-circuit simplification; with reactances alone every
/// loop closure or grounding can only lower a driving-point impedance.
inline Complex short_circuit_impedance(const Branch& br) { return {0.0, br.impedance.imag()}; }

// -----------------------------------------------------------------------------
// Scheme structure
// -----------------------------------------------------------------------------

/// Walks the order on the graph alone: every branch must touch the energized
/// set when its turn comes and every source must end up energized. Returns the
/// per-branch loop flags of the order. Throws Unreachable / ValidationError.
inline std::vector<char> check_scheme_structure(const GridModel& model, const RestorationScheme& scheme) {
    const std::size_t nb = model.branch_count();
    std::vector<char> used(nb, 0);
    std::vector<char> energized(model.node_count(), 0);
    std::vector<char> links(nb, 0);
    energized[model.black_start_node()] = 1;
    for (int b : scheme.order) {
        if (b < 0 || static_cast<std::size_t>(b) >= nb) throw ValidationError("scheme references unknown branch");
        if (used[b]) throw ValidationError("branch " + std::to_string(model.branches[b].id) + " repeats in the order");
        used[b] = 1;
        const auto& br = model.branches[b];
        const bool ef = energized[br.from] != 0;
        const bool et = energized[br.to] != 0;
        if (!ef && !et)
            throw Unreachable("branch " + std::to_string(br.id) + " is restored before either endpoint is energized");
        if (ef && et) links[b] = 1;
        energized[br.from] = energized[br.to] = 1;
    }
    for (int node : model.source_nodes())
        if (!energized[node])
            throw Unreachable("source at node " + std::to_string(model.nodes[node].id) + " is never reached");
    if (!scheme.include_link.empty()) {
        if (scheme.include_link.size() != nb) throw ValidationError("include_link must have one flag per branch");
        for (std::size_t b = 0; b < nb; ++b)
            if (links[b] && !scheme.include_link[b])
                throw ValidationError("branch " + std::to_string(model.branches[b].id) +
                                      " closes a loop but is not flagged as an included link");
    }
    return links;
}

// -----------------------------------------------------------------------------
// simulate
// -----------------------------------------------------------------------------

namespace detail {

class Simulator {
public:
    Simulator(const GridModel& model, const RestorationScheme& scheme, const SimulationOptions& opt)
        : m_(model), scheme_(scheme), opt_(opt), dt_(model.params.time_step) {}

    Timeline run() {
        check_scheme_structure(m_, scheme_);
        const std::size_t n = m_.node_count();
        const std::size_t ng = m_.generators.size();
        tl_.floors = derive_floors(m_);
        energized_.assign(n, 0);
        energized_at_.assign(n, 0.0);
        share_.assign(n, 0.0);
        gens_.assign(ng, {});
        connect_at_.assign(ng, inf);
        source_rec_.assign(n, -1);

        const int bs = m_.black_start_generator();
        const auto& bs_gen = m_.generators[bs];
        energize(bs_gen.node, 0.0);
        z_ = ImpedanceMatrix::init_with_source(bs_gen.node, {0.0, bs_gen.transient_reactance}, n);
        start_generator(bs, 0.0);

        for (int step = 0;; ++step) {
            const double t = step * dt_;
            advance_crew(t);
            connect_generators(t);
            gate_hvdc(t);
            TimelineStep rec = evaluate(t);
            const bool ok = rec.limits.feasible();
            tl_.steps.push_back(std::move(rec));
            if (!ok) {
                tl_.feasible = false;
                tl_.violation_time = t;
                tl_.violation = tl_.steps.back().limits;
                if (opt_.stop_on_violation) break;
            }
            if (finished(t)) break;
        }
        finalize();
        return std::move(tl_);
    }

private:
    static constexpr double inf = std::numeric_limits<double>::infinity();
    static constexpr double eps = 1e-9;

    enum class Task { idle, restoring, holding, cranking };

    void energize(int node, double t) {
        energized_[node] = 1;
        ++energized_count_;
        energized_at_[node] = t;
        if (!m_.is_source_node(node)) return;
        SourceRecord rec;
        rec.node = node;
        rec.energized_time = t;
        const int g = m_.generator_at(node);
        if (g >= 0) {
            rec.kind = SourceKind::generator;
            rec.index = g;
        } else {
            rec.kind = SourceKind::hvdc;
        }
        source_rec_[node] = static_cast<int>(tl_.sources.size());
        tl_.sources.push_back(rec);
    }

    void start_generator(int g, double t) {
        const auto& gen = m_.generators[g];
        gens_[g].started = true;
        gens_[g].start_time = t;
        connect_at_[g] = t + gen.connect_duration;
        auto& rec = tl_.sources[source_rec_[gen.node]];
        rec.start_time = t;
        rec.connect_time = connect_at_[g];
        rec.rated_time = connect_at_[g] + gen.ramp_minutes();
        if (m_.params.hold_crew_during_startup && gen.connect_duration > 0) {
            task_ = Task::holding;
            task_end_ = connect_at_[g];
        } else {
            task_ = Task::idle;
            crew_free_ = t;
        }
    }

    void restore_branch(int b, double t) {
        const auto& br = m_.branches[b];
        const bool ef = energized_[br.from] != 0;
        const bool et = energized_[br.to] != 0;
        restored_.push_back(b);
        tl_.branches.push_back({b, t, ef && et});
        if (ef && et) {
            z_.add_link_ungrounded(br.from, br.to, short_circuit_impedance(br));
            return;
        }
        const int p = ef ? br.from : br.to;
        const int q = br.other(p);
        z_.add_tree_branch(p, q, short_circuit_impedance(br));
        energize(q, t);
        const int g = m_.generator_at(q);
        if (g >= 0) {
            task_ = Task::cranking;
            cranking_gen_ = g;
            return;
        }
        if (q == m_.hvdc_node()) {
            hvdc_.status = HvdcStatus::charging;
            hvdc_.charge_start = t;
            tl_.sources[source_rec_[q]].start_time = t;
            const double dur = m_.hvdc->connect_duration;
            if (m_.params.hold_crew_during_startup && dur > 0) {
                task_ = Task::holding;
                task_end_ = t + dur;
            }
        }
    }

    // Crew bookkeeping for everything that completes at or before t. Branch
    // completions cascade when restore durations are shorter than a step.
    void advance_crew(double t) {
        for (;;) {
            if (task_ == Task::restoring && task_end_ <= t + eps) {
                task_ = Task::idle;
                crew_free_ = task_end_;
                restore_branch(scheme_.order[next_branch_++], task_end_);
                continue;
            }
            if (task_ == Task::holding && task_end_ <= t + eps) {
                task_ = Task::idle;
                crew_free_ = task_end_;
                continue;
            }
            if (task_ == Task::cranking) return;  // resolved in evaluate()
            if (task_ == Task::idle && next_branch_ < scheme_.order.size()) {
                const auto& br = m_.branches[scheme_.order[next_branch_]];
                task_ = Task::restoring;
                task_end_ = std::max(crew_free_, 0.0) + br.restore_duration;
                continue;
            }
            return;
        }
    }

    void connect_generators(double t) {
        for (std::size_t g = 0; g < gens_.size(); ++g) {
            auto& st = gens_[g];
            if (!st.started || st.connected || connect_at_[g] > t + eps) continue;
            st.connected = true;
            const auto& gen = m_.generators[g];
            if (!gen.is_black_start) z_.add_link_grounded(gen.node, {0.0, gen.transient_reactance});
        }
    }

    StrengthSnapshot snapshot(double t) const {
        StrengthSnapshot s;
        s.t = t;
        const int d = m_.hvdc_node();
        if (d >= 0 && energized_[d]) s.scc_mva = scc(z_.thevenin(d), 1.0, m_.params.s_base);
        for (std::size_t g = 0; g < gens_.size(); ++g)
            if (gens_[g].connected) s.frc_mw_per_hz += m_.generators[g].frc_contribution();
        return s;
    }

    void gate_hvdc(double t) {
        if (hvdc_.status != HvdcStatus::charging) return;
        if (hvdc_.charge_start + m_.hvdc->connect_duration > t + eps) return;
        const auto snap = snapshot(t);
        if (!startup_gate(snap, tl_.floors, true)) return;
        hvdc_.status = HvdcStatus::started;
        hvdc_.start_time = t;
        auto& rec = tl_.sources[source_rec_[m_.hvdc_node()]];
        rec.connect_time = t;
        tl_.startup_deviation = startup_deviation(m_, snap);
    }

    double cranking_load() const {
        double p = 0.0;
        for (std::size_t g = 0; g < gens_.size(); ++g)
            if (gens_[g].started && !gens_[g].connected) p += m_.generators[g].cranking_power_mw;
        return p;
    }

    TimelineStep evaluate(double t) {
        const std::size_t ng = gens_.size();
        TimelineStep rec;
        rec.t = t;
        for (std::size_t g = 0; g < ng; ++g)
            gens_[g].available_mw = gens_[g].connected ? ramp_power(m_.generators[g], connect_at_[g], t) : 0.0;

        rec.strength = snapshot(t);
        // restorable load: each node's share grows at the pickup rate after energization
        double load_max = 0.0;
        for (std::size_t i = 0; i < m_.node_count(); ++i) {
            share_[i] = energized_[i]
                            ? std::min(m_.params.load_pickup_limit,
                                       m_.params.load_pickup_rate * (t - energized_at_[i] + dt_))
                            : 0.0;
            load_max += share_[i] * m_.nodes[i].load_p_mw;
        }
        LimitReport early;
        if (hvdc_.started()) {
            const auto& term = *m_.hvdc;
            double min_gen = 0.0;
            for (std::size_t g = 0; g < ng; ++g)
                if (gens_[g].connected) min_gen += m_.generators[g].active_limits.lo;
            const double cap = term.station_loss_mw + cranking_load() + load_max - min_gen;
            try {
                const auto op = dispatch(term, rec.strength.scc_mva, true, cap);
                hvdc_.p_d_mw = op.p_d_mw;
                hvdc_.q_d_mvar = op.q_d_mvar;
                hvdc_.i_d = op.i_d;
                hvdc_.u_d = op.u_d;
                hvdc_.q_filter_mvar = filter_output(term, op.q_d_mvar);
            } catch (const InfeasibleDispatch&) {
                early.violations.push_back(
                    {Constraint::hvdc_startup, "hvdc", dc_ceiling(rec.strength.scc_mva, term.scr_floor), term.min_power_mw});
            } catch (const NoRealRoot&) {
                early.violations.push_back({Constraint::hvdc_startup, "hvdc", hvdc_.p_d_mw, 0.0});
            }
            rec.ceiling_mw = dc_ceiling(rec.strength.scc_mva, term.scr_floor);
            if (hvdc_.p_d_mw > 0) rec.strength.scr = scr(rec.strength.scc_mva, hvdc_.p_d_mw);
        }

        RestorationState state;
        state.t = t;
        state.hvdc = hvdc_;
        state.generators = gens_;

        // a unit waiting for cranking power starts as soon as the supply covers it
        if (task_ == Task::cranking) {
            const auto& gen = m_.generators[cranking_gen_];
            if (state.active_supply(m_) >= gen.cranking_power_mw - power_tolerance) {
                start_generator(cranking_gen_, t);
                state.generators = gens_;
            } else if (!supply_can_grow(t)) {
                early.violations.push_back({Constraint::active_balance, "generator " + std::to_string(gen.id),
                                            state.active_supply(m_), gen.cranking_power_mw});
            }
        }
        // schedule the next branch now so that crew_free_ is consistent
        advance_crew(t);

        const double supply = state.active_supply(m_);
        const double load = std::clamp(supply, 0.0, load_max);
        const double alpha = load_max > 0 ? load / load_max : 0.0;
        double load_q = 0.0;
        for (std::size_t i = 0; i < m_.node_count(); ++i) load_q += alpha * share_[i] * m_.nodes[i].load_q_mvar;
        state.restored_load_p_mw = load;
        state.restored_load_q_mvar = load_q;
        state.energized = energized_;
        state.restored_branches = restored_;

        double sum_avail = 0.0;
        for (std::size_t g = 0; g < ng; ++g) sum_avail += gens_[g].available_mw;
        rec.gen_available_mw.resize(ng);
        for (std::size_t g = 0; g < ng; ++g) rec.gen_available_mw[g] = gens_[g].available_mw;
        rec.sum_p_mw = sum_avail + hvdc_.p_d_mw;
        rec.restored_load_mw = load;
        rec.hvdc = hvdc_;
        rec.energized_nodes = energized_count_;
        rec.restored_branches = static_cast<int>(restored_.size());

        if (!early.feasible()) {
            rec.limits = std::move(early);
            return rec;
        }

        // --- power flow -----------------------------------------------------
        PowerFlowCase pf(m_.node_count());
        pf.energized = energized_;
        pf.branches = restored_;
        double needed = load + cranking_load();
        if (hvdc_.started()) needed += m_.hvdc->station_loss_mw - hvdc_.p_d_mw;
        const double beta = sum_avail > 0 ? std::clamp(needed / sum_avail, 0.0, 1.0) : 0.0;
        for (std::size_t i = 0; i < m_.node_count(); ++i) {
            if (!energized_[i]) continue;
            pf.p_load_mw[i] = alpha * share_[i] * m_.nodes[i].load_p_mw;
            pf.q_load_mvar[i] = alpha * share_[i] * m_.nodes[i].load_q_mvar;
        }
        for (std::size_t g = 0; g < ng; ++g) {
            const auto& gen = m_.generators[g];
            if (gen.is_black_start) {
                // the black-start unit holds voltage and angle from the first step
                pf.type[gen.node] = BusType::slack;
                pf.v_set[gen.node] = gen.voltage_setpoint;
            } else if (gens_[g].connected) {
                pf.type[gen.node] = BusType::pv;
                pf.v_set[gen.node] = gen.voltage_setpoint;
                pf.p_gen_mw[gen.node] = beta * gens_[g].available_mw;
            } else if (gens_[g].started) {
                pf.p_load_mw[gen.node] += gen.cranking_power_mw;
            }
        }
        DcInjection dc;
        if (hvdc_.started()) {
            dc.active = true;
            dc.p_d_mw = hvdc_.p_d_mw;
            dc.q_d_mvar = hvdc_.q_d_mvar;
            dc.q_filter_mvar = hvdc_.q_filter_mvar;
        }
        PowerFlowSolution sol;
        try {
            sol = solve_acdc(m_, pf, dc, opt_.power_flow, opt_.warm_start && have_prev_ ? &prev_ : nullptr);
        } catch (const Diverged&) {
            rec.limits.violations.push_back({Constraint::power_flow, "system", 0.0, 0.0});
            return rec;
        } catch (const NoRealRoot&) {
            // AC voltage at the converter too low to carry the set DC power
            rec.limits.violations.push_back({Constraint::hvdc_startup, "hvdc", hvdc_.p_d_mw, 0.0});
            return rec;
        }
        if (hvdc_.started()) {
            hvdc_.q_d_mvar = sol.q_d_mvar;
            rec.hvdc.q_d_mvar = sol.q_d_mvar;
            state.hvdc.q_d_mvar = sol.q_d_mvar;
            rec.hvdc_voltage_pu = sol.vm[m_.hvdc_node()];
        } else if (m_.hvdc_node() >= 0 && energized_[m_.hvdc_node()]) {
            rec.hvdc_voltage_pu = sol.vm[m_.hvdc_node()];
        }
        rec.gen_dispatch_mw.assign(ng, 0.0);
        double gen_total = 0.0;
        for (std::size_t g = 0; g < ng; ++g) {
            if (!gens_[g].connected) continue;
            rec.gen_dispatch_mw[g] = sol.node_generation_p(pf, m_.generators[g].node);
            gen_total += rec.gen_dispatch_mw[g];
        }
        double load_total = 0.0;
        for (std::size_t i = 0; i < m_.node_count(); ++i) load_total += pf.p_load_mw[i];
        const double dc_net = hvdc_.started() ? hvdc_.p_d_mw - m_.hvdc->station_loss_mw : 0.0;
        rec.pf_balance_residual_mw = gen_total + dc_net - load_total - sol.losses_mw;
        rec.v_min_pu = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m_.node_count(); ++i) {
            if (!energized_[i]) continue;
            rec.v_min_pu = std::min(rec.v_min_pu, sol.vm[i]);
            rec.v_max_pu = std::max(rec.v_max_pu, sol.vm[i]);
        }
        rec.pf_max_mismatch_pu = sol.max_mismatch_pu;
        rec.pf_newton_iterations = sol.newton_iterations;
        rec.limits = check_limits(sol, pf, m_, state);
        prev_ = std::move(sol);
        have_prev_ = true;
        return rec;
    }

    // Whether the active supply can still increase without crew action.
    bool supply_can_grow(double t) const {
        for (std::size_t g = 0; g < gens_.size(); ++g) {
            if (gens_[g].started && !gens_[g].connected) return true;
            if (gens_[g].connected && ramp_power(m_.generators[g], connect_at_[g], t) < m_.generators[g].rated_power_mw)
                return true;
        }
        if (hvdc_.status == HvdcStatus::charging) return true;
        return false;
    }

    bool finished(double t) const {
        if (next_branch_ < scheme_.order.size() || task_ != Task::idle) return false;
        for (std::size_t g = 0; g < gens_.size(); ++g)
            if (gens_[g].started && !gens_[g].connected) return false;
        if (hvdc_.status == HvdcStatus::charging && hvdc_.charge_start + m_.hvdc->connect_duration > t + eps)
            return false;
        return true;
    }

    void finalize() {
        // a charged converter whose gate still fails can no longer start: strength
        // only changes through crew actions and grid connections, all finished
        if (tl_.feasible && hvdc_.status == HvdcStatus::charging) {
            const auto snap = snapshot(tl_.steps.back().t);
            LimitReport rep;
            rep.violations.push_back({Constraint::hvdc_startup, "hvdc", snap.scc_mva, tl_.floors.scc_mva});
            tl_.feasible = false;
            tl_.violation_time = snap.t;
            tl_.violation = rep;
            tl_.steps.back().limits = std::move(rep);
        }
        double horizon = 0.0;
        for (const auto& s : tl_.sources)
            if (s.connect_time) horizon = std::max(horizon, *s.connect_time);
        tl_.total_time = horizon;
        if (!(horizon > 0)) {
            tl_.objective = 0.0;
            return;
        }
        double energy = 0.0;
        for (std::size_t g = 0; g < gens_.size(); ++g)
            if (gens_[g].connected) energy += ramp_energy(m_.generators[g], connect_at_[g], horizon);
        for (const auto& s : tl_.steps) {
            if (s.t >= horizon) break;
            energy += s.hvdc.p_d_mw * (std::min(s.t + dt_, horizon) - s.t);
        }
        tl_.objective = -energy / horizon;
    }

    const GridModel& m_;
    const RestorationScheme& scheme_;
    SimulationOptions opt_;
    double dt_;

    Timeline tl_;
    ImpedanceMatrix z_;
    std::vector<char> energized_;
    int energized_count_ = 0;
    std::vector<double> energized_at_;
    std::vector<double> share_;  ///< restorable fraction of each node's peak load
    std::vector<int> restored_;
    std::vector<GeneratorStatus> gens_;
    std::vector<double> connect_at_;
    std::vector<int> source_rec_;
    HvdcState hvdc_;

    Task task_ = Task::idle;
    double task_end_ = 0.0;
    double crew_free_ = 0.0;
    std::size_t next_branch_ = 0;
    int cranking_gen_ = -1;

    PowerFlowSolution prev_;
    bool have_prev_ = false;
};

}  // namespace detail

/// Replays `scheme` and returns the timeline, feasible or not. Structural
/// defects still throw (Unreachable, ValidationError).
inline Timeline run_simulation(const GridModel& model, const RestorationScheme& scheme,
                               const SimulationOptions& opt = {}) {
    return detail::Simulator(model, scheme, opt).run();
}

/// Replays `scheme`; throws InfeasibleScheme at the first violated limit.
inline Timeline simulate(const GridModel& model, const RestorationScheme& scheme, const SimulationOptions& opt = {}) {
    auto tl = run_simulation(model, scheme, opt);
    if (!tl.feasible) throw InfeasibleScheme(tl.violation_time, tl.violation);
    return tl;
}

/// Step function of the DC power ceiling over a simulated restoration.
inline DcPowerProfile build_profile(const Timeline& tl) {
    std::vector<ProfileSample> samples;
    samples.reserve(tl.steps.size());
    for (const auto& s : tl.steps) samples.push_back({s.t, s.hvdc.started(), s.ceiling_mw});
    return build_profile(samples);
}

// -----------------------------------------------------------------------------
// Stage table: one row per source start-up or loop closure
// -----------------------------------------------------------------------------

struct StageRow {
    int stage = 0;
    std::optional<int> source_node;  ///< external node id; empty for loop stages
    std::optional<double> start_time;
    double connect_time = 0.0;
    std::vector<int> path;  ///< external branch ids
    double p_d_mw = 0.0;
};

inline std::vector<StageRow> stage_table(const GridModel& model, const Timeline& tl) {
    struct Event {
        double t;
        int order;  // tie-break: sources before loops at equal time
        const SourceRecord* source;
        std::size_t branch_pos;  // number of branch records up to and including this event
    };
    std::vector<Event> events;
    for (const auto& s : tl.sources) {
        if (model.generators.size() > 0 && s.kind == SourceKind::generator &&
            model.generators[s.index].is_black_start)
            continue;
        std::size_t pos = 0;
        while (pos < tl.branches.size() && tl.branches[pos].t <= s.energized_time + 1e-9) ++pos;
        events.push_back({s.energized_time, 0, &s, pos});
    }
    for (std::size_t i = 0; i < tl.branches.size(); ++i)
        if (tl.branches[i].link) events.push_back({tl.branches[i].t, 1, nullptr, i + 1});
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.branch_pos != b.branch_pos) return a.branch_pos < b.branch_pos;
        return a.order < b.order;
    });

    std::vector<StageRow> rows;
    const auto& bs = model.generators[model.black_start_generator()];
    rows.push_back({1, model.nodes[bs.node].id, 0.0, bs.connect_duration, {}, tl.p_d_at(bs.connect_duration)});
    std::size_t consumed = 0;
    for (const auto& e : events) {
        StageRow row;
        row.stage = static_cast<int>(rows.size()) + 1;
        for (; consumed < e.branch_pos; ++consumed) row.path.push_back(model.branches[tl.branches[consumed].branch].id);
        if (e.source) {
            row.source_node = model.nodes[e.source->node].id;
            row.start_time = e.source->start_time;
            row.connect_time = e.source->connect_time.value_or(std::numeric_limits<double>::quiet_NaN());
        } else {
            row.connect_time = e.t;
        }
        row.p_d_mw = std::isnan(row.connect_time) ? 0.0 : tl.p_d_at(row.connect_time);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace blackstart
