#pragma once

// Grid description: nodes, branches, generators and the LCC-HVDC terminal of a
// blacked-out network, plus the scenario parameters that drive a restoration
// study. Everything is immutable after `load_grid` / `GridModel::finalize`.
//
// Unit conventions
//   impedances      per-unit on params.s_base (branch data is given on s_base,
//                   generator transient reactances are converted at ingestion)
//   powers          MW / MVar / MVA
//   times           minutes
//   ramp rates      MW per hour

#include "blackstart/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace blackstart {

using Complex = std::complex<double>;

template <typename T>
struct Bounds {
    T lo{};
    T hi{};
    [[nodiscard]] constexpr bool contains(T v, T tol = T{}) const { return v >= lo - tol && v <= hi + tol; }
    friend constexpr bool operator==(const Bounds&, const Bounds&) = default;
};

struct Node {
    int id = 0;                       ///< external id as written in the grid file
    double rated_voltage_kv = 0.0;
    Bounds<double> voltage_limits{0.9, 1.1};
    double load_p_mw = 0.0;           ///< peak restorable load
    double load_q_mvar = 0.0;
    friend bool operator==(const Node&, const Node&) = default;
};

enum class BranchKind { line, transformer };

struct Branch {
    int id = 0;
    int from = 0;  ///< node index (not external id)
    int to = 0;
    Complex impedance{};              ///< R + jX, per-unit
    double charging_mvar = 0.0;       ///< reactive power generated when energized at nominal voltage
    Bounds<double> flow_limits{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    BranchKind kind = BranchKind::line;
    double restore_duration = 5.0;

    [[nodiscard]] int other(int node) const { return node == from ? to : from; }
    [[nodiscard]] bool touches(int node) const { return node == from || node == to; }
    friend bool operator==(const Branch&, const Branch&) = default;
};

struct Generator {
    int id = 0;
    int node = 0;                        ///< node index
    double rated_power_mw = 0.0;
    double rated_capacity_mva = 0.0;
    double transient_reactance = 0.0;    ///< per-unit on s_base (converted)
    double freq_coeff = 1.0;             ///< stored verbatim; FRC contribution is rated_power / freq_coeff
    double ramp_rate_mw_per_h = 0.0;
    double cranking_power_mw = 0.0;
    Bounds<double> active_limits{0.0, 0.0};
    Bounds<double> reactive_limits{0.0, 0.0};
    double max_absorb_mvar = 0.0;
    double scr_coeff = 0.0;
    std::optional<double> hot_start_deadline;   ///< latest start-up time for a hot start
    std::optional<double> cold_start_earliest;  ///< earliest start-up time for a cold start
    double connect_duration = 0.0;              ///< start-up to grid connection
    double voltage_setpoint = 1.0;
    bool is_black_start = false;

    /// Time needed to ramp from zero to rated power, minutes.
    [[nodiscard]] double ramp_minutes() const { return rated_power_mw / ramp_rate_mw_per_h * 60.0; }
    [[nodiscard]] double frc_contribution() const { return rated_power_mw / freq_coeff; }
    friend bool operator==(const Generator&, const Generator&) = default;
};

/// One step of the AC filter bank: `added_mvar` is switched in once the
/// converter reactive demand exceeds `q_d_above`.
struct FilterStage {
    double q_d_above = 0.0;
    double added_mvar = 0.0;
    friend bool operator==(const FilterStage&, const FilterStage&) = default;
};

struct HvdcTerminal {
    int node = 0;  ///< node index
    double rated_power_mw = 0.0;
    double min_power_mw = 0.0;
    double station_loss_mw = 0.0;
    double filter_min_mvar = 0.0;
    std::vector<FilterStage> filter_schedule;
    int bridges = 1;
    double transformer_reactance = 0.0;   ///< per-unit on the converter base
    double transformer_emf = 0.0;         ///< per-unit, at nominal AC voltage
    double ideal_no_load_voltage = 1.0;   ///< per-unit, at nominal AC voltage
    double extinction_angle_deg = 17.0;
    double connect_duration = 0.0;        ///< charging to grid connection
    double scr_floor = 3.0;
    friend bool operator==(const HvdcTerminal&, const HvdcTerminal&) = default;
};

/// Which filter count enters the start-up SCC floor. `single_filter` screens
/// against Q_F - Q_D, `double_filter` against 2 Q_F - Q_D.
enum class SccFloorFormula { single_filter, double_filter };

struct ScenarioParams {
    double max_voltage_dev = 0.1;
    double max_freq_dev = 0.5;
    double time_step = 5.0;
    double s_base = 100.0;
    std::optional<double> scc_floor_override;
    std::optional<double> frc_floor_override;
    SccFloorFormula scc_floor_formula = SccFloorFormula::single_filter;
    /// Fraction of a node's peak load that becomes restorable per minute after
    /// the node is energized.
    double load_pickup_rate = 0.01;
    /// Largest fraction of a node's peak load restored within the horizon.
    double load_pickup_limit = 1.0;
    /// The crew stays with a source from start-up until it is grid connected.
    bool hold_crew_during_startup = true;
    friend bool operator==(const ScenarioParams&, const ScenarioParams&) = default;
};

// =============================================================================
// Converter steady-state relations shared by the floor derivation and hvdc.
// =============================================================================

/// Inverter reactive demand for active power `p_d` (any unit) at DC voltage
/// `u_d` with ideal no-load voltage `u_d0`. The radicand is clamped at zero.
inline double converter_reactive_power(double p_d, double u_d0, double u_d) {
    if (p_d == 0.0) return 0.0;
    const double ratio = u_d0 / u_d;
    const double radicand = ratio * ratio - 1.0;
    return p_d * std::sqrt(std::max(radicand, 0.0));
}

/// Minimum single-pole start-up operating point: 70 % DC voltage, 10 % current.
struct StartupMode {
    double u_d = 0.7;
    double i_d = 0.1;
    double p_d_mw = 0.0;
    double q_d_mvar = 0.0;
};

inline StartupMode startup_mode_quantities(const HvdcTerminal& term) {
    StartupMode m;
    m.p_d_mw = term.rated_power_mw * m.u_d * m.i_d;
    m.q_d_mvar = converter_reactive_power(m.p_d_mw, term.ideal_no_load_voltage, m.u_d);
    return m;
}

// =============================================================================
// GridModel
// =============================================================================

struct StartupFloors {
    double scc_mva = 0.0;
    double frc_mw_per_hz = 0.0;
};

class GridModel {
public:
    ScenarioParams params;
    std::vector<Node> nodes;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::optional<HvdcTerminal> hvdc;

    /// Validates every invariant and builds the lookup tables. Throws ValidationError.
    void finalize() {
        validate();
        index_nodes();
        branch_by_id_.clear();
        for (std::size_t i = 0; i < branches.size(); ++i) branch_by_id_[branches[i].id] = static_cast<int>(i);
        adjacency_.assign(nodes.size(), {});
        for (std::size_t b = 0; b < branches.size(); ++b) {
            adjacency_[branches[b].from].push_back(static_cast<int>(b));
            adjacency_[branches[b].to].push_back(static_cast<int>(b));
        }
        gen_at_node_.assign(nodes.size(), -1);
        for (std::size_t g = 0; g < generators.size(); ++g) gen_at_node_[generators[g].node] = static_cast<int>(g);
    }

    /// Builds only the external-id lookup for nodes (used while parsing).
    void index_nodes() {
        node_by_id_.clear();
        for (std::size_t i = 0; i < nodes.size(); ++i) node_by_id_[nodes[i].id] = static_cast<int>(i);
    }

    [[nodiscard]] std::size_t node_count() const { return nodes.size(); }
    [[nodiscard]] std::size_t branch_count() const { return branches.size(); }

    [[nodiscard]] int node_index(int id) const {
        auto it = node_by_id_.find(id);
        if (it == node_by_id_.end()) throw ValidationError("unknown node id " + std::to_string(id));
        return it->second;
    }
    [[nodiscard]] int branch_index(int id) const {
        auto it = branch_by_id_.find(id);
        if (it == branch_by_id_.end()) throw ValidationError("unknown branch id " + std::to_string(id));
        return it->second;
    }
    [[nodiscard]] bool has_branch_id(int id) const { return branch_by_id_.count(id) != 0; }

    [[nodiscard]] const std::vector<int>& incident(int node) const { return adjacency_[node]; }
    /// Generator index located at `node`, or -1.
    [[nodiscard]] int generator_at(int node) const { return gen_at_node_[node]; }

    [[nodiscard]] int black_start_generator() const {
        for (std::size_t g = 0; g < generators.size(); ++g)
            if (generators[g].is_black_start) return static_cast<int>(g);
        return -1;
    }
    [[nodiscard]] int black_start_node() const { return generators[black_start_generator()].node; }
    [[nodiscard]] int hvdc_node() const { return hvdc ? hvdc->node : -1; }

    /// Node indices that host a power source (generators and the HVDC terminal).
    [[nodiscard]] std::vector<int> source_nodes() const {
        std::vector<int> out;
        for (const auto& g : generators) out.push_back(g.node);
        if (hvdc) out.push_back(hvdc->node);
        return out;
    }
    [[nodiscard]] bool is_source_node(int node) const {
        return gen_at_node_[node] >= 0 || (hvdc && hvdc->node == node);
    }

    friend bool operator==(const GridModel& a, const GridModel& b) {
        return a.params == b.params && a.nodes == b.nodes && a.branches == b.branches &&
               a.generators == b.generators && a.hvdc == b.hvdc;
    }

    /// Checks every model invariant; throws ValidationError.
    void validate() const {
        auto fail = [](const std::string& msg) { throw ValidationError(msg); };
        const auto& p = params;
        if (!(p.time_step > 0)) fail("params: time_step must be positive");
        if (!(p.max_voltage_dev > 0)) fail("params: max_voltage_dev must be positive");
        if (!(p.max_freq_dev > 0)) fail("params: max_freq_dev must be positive");
        if (!(p.s_base > 0)) fail("params: s_base must be positive");
        if (!(p.load_pickup_rate > 0)) fail("params: load_pickup_rate must be positive");
        if (!(p.load_pickup_limit >= 0 && p.load_pickup_limit <= 1)) fail("params: load_pickup_limit must lie in [0, 1]");
        if (nodes.empty()) fail("grid has no nodes");

        std::map<int, int> seen;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& n = nodes[i];
            const auto tag = "node " + std::to_string(n.id);
            if (!seen.emplace(n.id, 0).second) fail(tag + ": duplicate id");
            if (!(n.voltage_limits.lo < n.voltage_limits.hi)) fail(tag + ": voltage_limits must satisfy min < max");
            if (n.load_p_mw < 0) fail(tag + ": negative load");
        }
        const int n_nodes = static_cast<int>(nodes.size());
        std::map<int, int> branch_ids;
        for (const auto& b : branches) {
            const auto tag = "branch " + std::to_string(b.id);
            if (!branch_ids.emplace(b.id, 0).second) fail(tag + ": duplicate id");
            if (b.from < 0 || b.from >= n_nodes || b.to < 0 || b.to >= n_nodes) fail(tag + ": endpoint out of range");
            if (b.from == b.to) fail(tag + ": endpoints coincide");
            if (b.kind == BranchKind::transformer && !(b.impedance.imag() > 0))
                fail(tag + ": transformer reactance must be positive");
            if (!(b.restore_duration > 0)) fail(tag + ": restore_duration must be positive");
            if (b.flow_limits.lo > b.flow_limits.hi) fail(tag + ": flow_limits min > max");
        }
        int black_starts = 0;
        std::vector<int> gens_per_node(nodes.size(), 0);
        for (const auto& g : generators) {
            const auto tag = "generator " + std::to_string(g.id);
            if (g.node < 0 || g.node >= n_nodes) fail(tag + ": node out of range");
            if (!(g.rated_power_mw > 0)) fail(tag + ": rated_power must be positive");
            if (!(g.ramp_rate_mw_per_h > 0)) fail(tag + ": ramp_rate must be positive");
            if (!(g.transient_reactance > 0)) fail(tag + ": transient_reactance must be positive");
            if (!(g.freq_coeff > 0)) fail(tag + ": freq_coeff must be positive");
            if (g.connect_duration < 0) fail(tag + ": connect_duration must be non-negative");
            if (g.hot_start_deadline && g.cold_start_earliest && !(*g.hot_start_deadline < *g.cold_start_earliest))
                fail(tag + ": hot_start_deadline must precede cold_start_earliest");
            if (++gens_per_node[g.node] > 1) fail(tag + ": more than one generator on a node");
            if (g.is_black_start) ++black_starts;
        }
        if (black_starts != 1)
            fail("exactly one black-start generator required, found " + std::to_string(black_starts));
        if (hvdc) {
            const auto& h = *hvdc;
            if (h.node < 0 || h.node >= n_nodes) fail("hvdc: node out of range");
            if (gens_per_node[h.node] != 0) fail("hvdc: node already hosts a generator");
            if (!(h.min_power_mw < h.rated_power_mw)) fail("hvdc: min_power must be below rated_power");
            if (!(h.filter_min_mvar > 0)) fail("hvdc: filter_min must be positive");
            if (h.scr_floor < 3.0) fail("hvdc: scr_floor must be at least 3");
            if (h.bridges < 1) fail("hvdc: bridges must be at least 1");
        }
    }

private:
    std::map<int, int> node_by_id_;
    std::map<int, int> branch_by_id_;
    std::vector<std::vector<int>> adjacency_;
    std::vector<int> gen_at_node_;
};

/// Start-up floors for SCC and FRC. Overrides in the scenario win.
inline StartupFloors derive_floors(const GridModel& model) {
    StartupFloors f;
    const auto& p = model.params;
    const double p_dn = model.hvdc ? model.hvdc->rated_power_mw : 0.0;
    if (p_dn > 0.0) {
        const auto& h = *model.hvdc;
        const StartupMode s = startup_mode_quantities(h);
        f.frc_mw_per_hz = s.p_d_mw / (2.0 * p.max_freq_dev);
        const double filters = p.scc_floor_formula == SccFloorFormula::double_filter ? 2.0 : 1.0;
        f.scc_mva = std::max(0.0, s.u_d / p.max_voltage_dev * (filters * h.filter_min_mvar - s.q_d_mvar));
    }
    if (p.scc_floor_override) f.scc_mva = *p.scc_floor_override;
    if (p.frc_floor_override) f.frc_mw_per_hz = *p.frc_floor_override;
    return f;
}

// =============================================================================
// JSON ingestion / serialization
// =============================================================================

namespace detail {

using nlohmann::json;

class Reader {
public:
    explicit Reader(const GridModel& m) : model_(&m) {}

    static const json& at(const json& obj, const std::string& key, const std::string& where) {
        if (!obj.is_object()) throw SchemaError(where, "expected an object");
        auto it = obj.find(key);
        if (it == obj.end()) throw SchemaError(where + "." + key, "missing field");
        return *it;
    }
    static double num(const json& obj, const std::string& key, const std::string& where) {
        const auto& v = at(obj, key, where);
        if (!v.is_number()) throw SchemaError(where + "." + key, "expected a number");
        return v.get<double>();
    }
    static double num_or(const json& obj, const std::string& key, const std::string& where, double fallback) {
        if (!obj.contains(key) || obj[key].is_null()) return fallback;
        return num(obj, key, where);
    }
    static std::optional<double> opt_num(const json& obj, const std::string& key, const std::string& where) {
        if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
        return num(obj, key, where);
    }
    static int integer(const json& obj, const std::string& key, const std::string& where) {
        const auto& v = at(obj, key, where);
        if (!v.is_number_integer()) throw SchemaError(where + "." + key, "expected an integer");
        return v.get<int>();
    }
    static Bounds<double> pair(const json& obj, const std::string& key, const std::string& where) {
        const auto& v = at(obj, key, where);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw SchemaError(where + "." + key, "expected a two-element numeric array");
        return {v[0].get<double>(), v[1].get<double>()};
    }
    static const json& array(const json& obj, const std::string& key, const std::string& where) {
        const auto& v = at(obj, key, where);
        if (!v.is_array()) throw SchemaError(where + "." + key, "expected an array");
        return v;
    }

    int node_ref(int id, const std::string& where) const {
        try {
            return model_->node_index(id);
        } catch (const ValidationError&) {
            throw ValidationError(where + ": references undeclared node " + std::to_string(id));
        }
    }

private:
    const GridModel* model_;
};

}  // namespace detail

/// Parses a grid document. Throws ParseError, SchemaError or ValidationError.
inline GridModel parse_grid(const nlohmann::json& doc) {
    using detail::Reader;
    if (!doc.is_object()) throw SchemaError("$", "expected an object");
    GridModel m;

    const auto& jp = Reader::at(doc, "params", "$");
    auto& p = m.params;
    p.max_voltage_dev = Reader::num_or(jp, "max_voltage_dev", "params", p.max_voltage_dev);
    p.max_freq_dev = Reader::num_or(jp, "max_freq_dev", "params", p.max_freq_dev);
    p.time_step = Reader::num_or(jp, "time_step", "params", p.time_step);
    p.s_base = Reader::num_or(jp, "s_base", "params", p.s_base);
    p.load_pickup_rate = Reader::num_or(jp, "load_pickup_rate", "params", p.load_pickup_rate);
    p.load_pickup_limit = Reader::num_or(jp, "load_pickup_limit", "params", p.load_pickup_limit);
    p.scc_floor_override = Reader::opt_num(jp, "scc_floor_override", "params");
    p.frc_floor_override = Reader::opt_num(jp, "frc_floor_override", "params");
    if (jp.contains("scc_floor_formula")) {
        const auto& f = jp["scc_floor_formula"];
        if (f == "single_filter")
            p.scc_floor_formula = SccFloorFormula::single_filter;
        else if (f == "double_filter")
            p.scc_floor_formula = SccFloorFormula::double_filter;
        else
            throw SchemaError("params.scc_floor_formula", "expected single_filter or double_filter");
    }
    if (jp.contains("hold_crew_during_startup")) {
        if (!jp["hold_crew_during_startup"].is_boolean())
            throw SchemaError("params.hold_crew_during_startup", "expected a boolean");
        p.hold_crew_during_startup = jp["hold_crew_during_startup"].get<bool>();
    }

    const auto& jn = Reader::array(doc, "nodes", "$");
    for (std::size_t i = 0; i < jn.size(); ++i) {
        const auto where = "nodes[" + std::to_string(i) + "]";
        const auto& o = jn[i];
        Node n;
        n.id = Reader::integer(o, "id", where);
        n.rated_voltage_kv = Reader::num(o, "rated_voltage", where);
        n.voltage_limits = Reader::pair(o, "voltage_limits", where);
        const auto load = Reader::pair(o, "load", where);
        n.load_p_mw = load.lo;
        n.load_q_mvar = load.hi;
        m.nodes.push_back(n);
    }
    m.index_nodes();
    const Reader r(m);

    const auto& jb = Reader::array(doc, "branches", "$");
    for (std::size_t i = 0; i < jb.size(); ++i) {
        const auto where = "branches[" + std::to_string(i) + "]";
        const auto& o = jb[i];
        Branch b;
        b.id = Reader::integer(o, "id", where);
        const auto ends = Reader::array(o, "endpoints", where);
        if (ends.size() != 2 || !ends[0].is_number_integer() || !ends[1].is_number_integer())
            throw SchemaError(where + ".endpoints", "expected two node ids");
        b.from = r.node_ref(ends[0].get<int>(), where);
        b.to = r.node_ref(ends[1].get<int>(), where);
        const auto z = Reader::pair(o, "impedance", where);
        b.impedance = {z.lo, z.hi};
        b.charging_mvar = Reader::num_or(o, "charging_reactive", where, 0.0);
        if (o.contains("flow_limits")) b.flow_limits = Reader::pair(o, "flow_limits", where);
        const auto& kind = Reader::at(o, "kind", where);
        if (kind == "line")
            b.kind = BranchKind::line;
        else if (kind == "transformer")
            b.kind = BranchKind::transformer;
        else
            throw SchemaError(where + ".kind", "expected line or transformer");
        b.restore_duration = Reader::num_or(o, "restore_duration", where, 5.0);
        m.branches.push_back(b);
    }

    const auto& jg = Reader::array(doc, "generators", "$");
    for (std::size_t i = 0; i < jg.size(); ++i) {
        const auto where = "generators[" + std::to_string(i) + "]";
        const auto& o = jg[i];
        Generator g;
        g.id = Reader::integer(o, "id", where);
        g.node = r.node_ref(Reader::integer(o, "node", where), where);
        g.rated_power_mw = Reader::num(o, "rated_power", where);
        g.rated_capacity_mva = Reader::num(o, "rated_capacity", where);
        // transient reactance is given on the machine base unless the file says otherwise
        const double x_base = Reader::num_or(o, "reactance_base_mva", where, g.rated_capacity_mva);
        if (!(x_base > 0)) throw ValidationError(where + ": reactance base must be positive");
        g.transient_reactance = Reader::num(o, "transient_reactance", where);
        if (x_base != p.s_base) g.transient_reactance *= p.s_base / x_base;
        g.freq_coeff = Reader::num(o, "freq_coeff", where);
        g.ramp_rate_mw_per_h = Reader::num(o, "ramp_rate", where);
        g.cranking_power_mw = Reader::num_or(o, "cranking_power", where, 0.0);
        g.active_limits = Reader::pair(o, "active_limits", where);
        g.reactive_limits = Reader::pair(o, "reactive_limits", where);
        g.max_absorb_mvar = Reader::num(o, "max_absorb", where);
        g.scr_coeff = Reader::num(o, "scr_coeff", where);
        g.hot_start_deadline = Reader::opt_num(o, "hot_start_deadline", where);
        g.cold_start_earliest = Reader::opt_num(o, "cold_start_earliest", where);
        g.connect_duration = Reader::num(o, "connect_duration", where);
        g.voltage_setpoint = Reader::num_or(o, "voltage_setpoint", where, 1.0);
        if (o.contains("is_black_start")) {
            if (!o["is_black_start"].is_boolean()) throw SchemaError(where + ".is_black_start", "expected a boolean");
            g.is_black_start = o["is_black_start"].get<bool>();
        }
        m.generators.push_back(g);
    }

    const auto& jh = Reader::at(doc, "hvdc", "$");
    if (!jh.is_null()) {
        const std::string where = "hvdc";
        HvdcTerminal h;
        h.node = r.node_ref(Reader::integer(jh, "node", where), where);
        h.rated_power_mw = Reader::num(jh, "rated_power", where);
        h.min_power_mw = Reader::num_or(jh, "min_power", where, 0.035 * h.rated_power_mw);
        h.station_loss_mw = Reader::num_or(jh, "station_loss", where, 0.01 * h.rated_power_mw);
        h.filter_min_mvar = Reader::num(jh, "filter_min", where);
        if (jh.contains("filter_schedule")) {
            const auto& fs = Reader::array(jh, "filter_schedule", where);
            for (std::size_t i = 0; i < fs.size(); ++i) {
                const auto w = where + ".filter_schedule[" + std::to_string(i) + "]";
                h.filter_schedule.push_back({Reader::num(fs[i], "q_d_above", w), Reader::num(fs[i], "added", w)});
            }
        }
        h.bridges = Reader::integer(jh, "bridges", where);
        h.transformer_reactance = Reader::num(jh, "transformer_reactance", where);
        h.transformer_emf = Reader::num(jh, "transformer_emf", where);
        h.ideal_no_load_voltage = Reader::num(jh, "ideal_no_load_voltage", where);
        h.extinction_angle_deg = Reader::num(jh, "extinction_angle", where);
        h.connect_duration = Reader::num(jh, "connect_duration", where);
        h.scr_floor = Reader::num_or(jh, "scr_floor", where, 3.0);
        m.hvdc = h;
    }

    m.finalize();
    return m;
}

inline GridModel load_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open grid file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return parse_grid(doc);
}

/// Inverse of parse_grid. Reactances are written on the system base.
inline nlohmann::json to_json(const GridModel& m) {
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json doc;
    const auto& p = m.params;
    doc["params"] = {{"max_voltage_dev", p.max_voltage_dev},
                     {"max_freq_dev", p.max_freq_dev},
                     {"time_step", p.time_step},
                     {"s_base", p.s_base},
                     {"scc_floor_override", opt(p.scc_floor_override)},
                     {"frc_floor_override", opt(p.frc_floor_override)},
                     {"scc_floor_formula",
                      p.scc_floor_formula == SccFloorFormula::single_filter ? "single_filter" : "double_filter"},
                     {"load_pickup_rate", p.load_pickup_rate},
                     {"load_pickup_limit", p.load_pickup_limit},
                     {"hold_crew_during_startup", p.hold_crew_during_startup}};
    doc["nodes"] = json::array();
    for (const auto& n : m.nodes)
        doc["nodes"].push_back({{"id", n.id},
                                {"rated_voltage", n.rated_voltage_kv},
                                {"voltage_limits", {n.voltage_limits.lo, n.voltage_limits.hi}},
                                {"load", {n.load_p_mw, n.load_q_mvar}}});
    doc["branches"] = json::array();
    for (const auto& b : m.branches)
        doc["branches"].push_back({{"id", b.id},
                                   {"endpoints", {m.nodes[b.from].id, m.nodes[b.to].id}},
                                   {"impedance", {b.impedance.real(), b.impedance.imag()}},
                                   {"charging_reactive", b.charging_mvar},
                                   {"flow_limits", {b.flow_limits.lo, b.flow_limits.hi}},
                                   {"kind", b.kind == BranchKind::line ? "line" : "transformer"},
                                   {"restore_duration", b.restore_duration}});
    doc["generators"] = json::array();
    for (const auto& g : m.generators)
        doc["generators"].push_back({{"id", g.id},
                                     {"node", m.nodes[g.node].id},
                                     {"rated_power", g.rated_power_mw},
                                     {"rated_capacity", g.rated_capacity_mva},
                                     {"transient_reactance", g.transient_reactance},
                                     {"reactance_base_mva", p.s_base},
                                     {"freq_coeff", g.freq_coeff},
                                     {"ramp_rate", g.ramp_rate_mw_per_h},
                                     {"cranking_power", g.cranking_power_mw},
                                     {"active_limits", {g.active_limits.lo, g.active_limits.hi}},
                                     {"reactive_limits", {g.reactive_limits.lo, g.reactive_limits.hi}},
                                     {"max_absorb", g.max_absorb_mvar},
                                     {"scr_coeff", g.scr_coeff},
                                     {"hot_start_deadline", opt(g.hot_start_deadline)},
                                     {"cold_start_earliest", opt(g.cold_start_earliest)},
                                     {"connect_duration", g.connect_duration},
                                     {"voltage_setpoint", g.voltage_setpoint},
                                     {"is_black_start", g.is_black_start}});
    if (m.hvdc) {
        const auto& h = *m.hvdc;
        json fs = json::array();
        for (const auto& s : h.filter_schedule) fs.push_back({{"q_d_above", s.q_d_above}, {"added", s.added_mvar}});
        doc["hvdc"] = {{"node", m.nodes[h.node].id},
                       {"rated_power", h.rated_power_mw},
                       {"min_power", h.min_power_mw},
                       {"station_loss", h.station_loss_mw},
                       {"filter_min", h.filter_min_mvar},
                       {"filter_schedule", fs},
                       {"bridges", h.bridges},
                       {"transformer_reactance", h.transformer_reactance},
                       {"transformer_emf", h.transformer_emf},
                       {"ideal_no_load_voltage", h.ideal_no_load_voltage},
                       {"extinction_angle", h.extinction_angle_deg},
                       {"connect_duration", h.connect_duration},
                       {"scr_floor", h.scr_floor}};
    } else {
        doc["hvdc"] = nullptr;
    }
    return doc;
}

}  // namespace blackstart
