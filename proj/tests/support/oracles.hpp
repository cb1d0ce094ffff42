#pragma once

// Independent reference computations used by the tests. Nothing here calls the
// incremental code paths it is meant to check.

#include "blackstart/blackstart.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using blackstart::Complex;
using blackstart::GridModel;

inline std::string data_path(const std::string& name) { return std::string(BLACKSTART_DATA_DIR) + "/" + name; }

inline const GridModel& ieee39() {
    static const GridModel m = blackstart::load_grid(data_path("ieee39.json"));
    return m;
}

inline const GridModel& toy6() {
    static const GridModel m = blackstart::load_grid(data_path("toy6.json"));
    return m;
}

inline blackstart::RestorationScheme scheme1() {
    return blackstart::load_scheme(ieee39(), std::string(BLACKSTART_EXAMPLES_DIR) + "/schemes/ieee39_scheme1.json");
}

// -- random grids -------------------------------------------------------------

struct RandomGrid {
    GridModel model;
    int loops = 0;
};

/// Connected grid: random spanning tree, `loops` extra chords, 1-4 generators
/// on distinct nodes (generator 0 is the black-start unit).
inline RandomGrid random_grid(std::mt19937_64& rng, int min_nodes = 5, int max_nodes = 20) {
    std::uniform_int_distribution<int> nd(min_nodes, max_nodes);
    std::uniform_real_distribution<double> rr(0.001, 0.04);
    std::uniform_real_distribution<double> xx(0.01, 0.3);
    std::uniform_real_distribution<double> xg(0.02, 0.3);
    const int n = nd(rng);
    RandomGrid g;
    auto& m = g.model;
    for (int i = 0; i < n; ++i) {
        blackstart::Node node;
        node.id = i + 1;
        node.rated_voltage_kv = 230;
        m.nodes.push_back(node);
    }
    std::set<std::pair<int, int>> used;
    auto add_branch = [&](int a, int b) {
        blackstart::Branch br;
        br.id = static_cast<int>(m.branches.size()) + 1;
        br.from = a;
        br.to = b;
        br.impedance = {rr(rng), xx(rng)};
        m.branches.push_back(br);
        used.insert({std::min(a, b), std::max(a, b)});
    };
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int k = 1; k < n; ++k) add_branch(perm[std::uniform_int_distribution<int>(0, k - 1)(rng)], perm[k]);
    const int want_loops = std::uniform_int_distribution<int>(0, 5)(rng);
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int tries = 0; g.loops < want_loops && tries < 200; ++tries) {
        const int a = pick(rng);
        const int b = pick(rng);
        if (a == b || used.count({std::min(a, b), std::max(a, b)})) continue;
        add_branch(a, b);
        ++g.loops;
    }
    const int n_gen = std::min(n, std::uniform_int_distribution<int>(1, 4)(rng));
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int k = 0; k < n_gen; ++k) {
        blackstart::Generator gen;
        gen.id = k + 1;
        gen.node = perm[k];
        gen.rated_power_mw = 100;
        gen.rated_capacity_mva = 120;
        gen.transient_reactance = xg(rng);
        gen.ramp_rate_mw_per_h = 60;
        gen.active_limits = {0, 100};
        gen.is_black_start = k == 0;
        m.generators.push_back(gen);
    }
    m.finalize();
    return g;
}

// -- Y-bus inversion ----------------------------------------------------------

/// Nodal impedance of the restored subnetwork by direct inversion of the
/// admittance matrix: series branch admittances plus 1/(j x') to ground at
/// every grounded generator. Rows and columns follow `nodes`.
inline Eigen::MatrixXcd zbus_by_inversion(const GridModel& m, const std::vector<int>& nodes,
                                          const std::vector<int>& branches, const std::vector<int>& grounded_gens) {
    const auto n = static_cast<Eigen::Index>(nodes.size());
    std::vector<int> pos(m.node_count(), -1);
    for (Eigen::Index k = 0; k < n; ++k) pos[nodes[k]] = static_cast<int>(k);
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (int b : branches) {
        const auto& br = m.branches[b];
        const Complex ys = 1.0 / br.impedance;
        const int f = pos[br.from];
        const int t = pos[br.to];
        y(f, f) += ys;
        y(t, t) += ys;
        y(f, t) -= ys;
        y(t, f) -= ys;
    }
    for (int g : grounded_gens) {
        const int k = pos[m.generators[g].node];
        y(k, k) += 1.0 / Complex(0.0, m.generators[g].transient_reactance);
    }
    return y.fullPivLu().inverse();
}

// -- two-bus Newton case ------------------------------------------------------

/// Receiving-end voltage of a lossless line of reactance x (p.u.) fed from a
/// 1.0 p.u. source, carrying load p + jq (p.u.): the high-voltage root of
///   V^4 + (2 q x - 1) V^2 + x^2 (p^2 + q^2) = 0,
/// and the angle from p = V sin(-theta) / x.
inline std::pair<double, double> two_bus_voltage(double x, double p, double q) {
    const double b = 2.0 * q * x - 1.0;
    const double c = x * x * (p * p + q * q);
    const double v2 = (-b + std::sqrt(b * b - 4.0 * c)) / 2.0;
    const double v = std::sqrt(v2);
    const double theta = -std::asin(p * x / v);
    return {v, theta};
}

// -- brute-force scheme enumeration -----------------------------------------

/// Every restoration order in the optimizer's scheme space: each branch
/// touches the energized set when restored, loop closures optional, the
/// sequence ends when the last source is energized, and no source-less leaf
/// hangs off the final skeleton.
inline std::vector<std::vector<int>> enumerate_orders(const GridModel& m) {
    const int nb = static_cast<int>(m.branch_count());
    const auto sources = m.source_nodes();
    std::vector<std::vector<int>> out;
    std::vector<char> energized(m.node_count(), 0);
    std::vector<char> used(nb, 0);
    std::vector<int> order;
    energized[m.black_start_node()] = 1;

    auto all_sources = [&] {
        return std::all_of(sources.begin(), sources.end(), [&](int s) { return energized[s] != 0; });
    };
    auto no_dangling = [&] {
        std::vector<int> degree(m.node_count(), 0);
        for (int b : order) {
            ++degree[m.branches[b].from];
            ++degree[m.branches[b].to];
        }
        for (std::size_t v = 0; v < m.node_count(); ++v) {
            const bool is_source = std::find(sources.begin(), sources.end(), static_cast<int>(v)) != sources.end();
            if (degree[v] == 1 && !is_source) return false;
        }
        return true;
    };
    std::function<void()> dfs = [&] {
        if (all_sources()) {
            if (no_dangling()) out.push_back(order);
            return;
        }
        for (int b = 0; b < nb; ++b) {
            if (used[b]) continue;
            const auto& br = m.branches[b];
            const bool ef = energized[br.from] != 0;
            const bool et = energized[br.to] != 0;
            if (!ef && !et) continue;
            used[b] = 1;
            order.push_back(b);
            const int fresh = ef && et ? -1 : (ef ? br.to : br.from);
            if (fresh >= 0) energized[fresh] = 1;
            dfs();
            if (fresh >= 0) energized[fresh] = 0;
            order.pop_back();
            used[b] = 0;
        }
    };
    dfs();
    return out;
}

struct EnumerationResult {
    double best_f = std::numeric_limits<double>::infinity();
    std::vector<int> best_order;
    std::size_t orders = 0;
    std::size_t feasible = 0;
};

inline EnumerationResult enumerate_optimum(const GridModel& m) {
    EnumerationResult r;
    for (const auto& order : enumerate_orders(m)) {
        ++r.orders;
        blackstart::RestorationScheme s;
        s.order = order;
        const auto tl = blackstart::run_simulation(m, s);
        if (!tl.feasible) continue;
        ++r.feasible;
        if (tl.objective < r.best_f) {
            r.best_f = tl.objective;
            r.best_order = order;
        }
    }
    return r;
}

// -- closed-form objective ----------------------------------------------------

/// F from the recorded connection times and DC steps, integrating each ramp
/// analytically and the DC power as a right-continuous step function.
inline double objective_closed_form(const GridModel& m, const blackstart::Timeline& tl) {
    const double T = tl.total_time;
    if (T <= 0) return 0.0;
    double energy = 0.0;
    for (const auto& src : tl.sources) {
        if (src.kind != blackstart::SourceKind::generator || !src.connect_time) continue;
        const auto& g = m.generators[src.index];
        const double t0 = *src.connect_time;
        if (t0 >= T) continue;
        const double r = g.ramp_rate_mw_per_h / 60.0;
        const double t1 = std::min(T, t0 + g.rated_power_mw / r);
        energy += 0.5 * r * (t1 - t0) * (t1 - t0);
        if (T > t1) energy += g.rated_power_mw * (T - t1);
    }
    for (std::size_t k = 0; k + 1 < tl.steps.size(); ++k) {
        const double a = tl.steps[k].t;
        const double b = std::min(tl.steps[k + 1].t, T);
        if (b > a) energy += tl.steps[k].hvdc.p_d_mw * (b - a);
    }
    return -energy / T;
}

}  // namespace oracle
