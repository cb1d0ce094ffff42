#include "support/oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace blackstart;
using Catch::Approx;

namespace {

GridModel two_bus(double x) {
    GridModel m;
    m.nodes = {{1, 110, {0.9, 1.1}, 0, 0}, {2, 110, {0.9, 1.1}, 50, 0}};
    m.branches = {{1, 0, 1, {0.0, x}}};
    Generator g;
    g.id = 1;
    g.rated_power_mw = 200;
    g.rated_capacity_mva = 240;
    g.ramp_rate_mw_per_h = 100;
    g.transient_reactance = 0.2;
    g.active_limits = {0, 200};
    g.reactive_limits = {-50, 100};
    g.max_absorb_mvar = 50;
    g.scr_coeff = 0.6;
    g.is_black_start = true;
    m.generators = {g};
    m.finalize();
    return m;
}

PowerFlowCase two_bus_case(double p_load, double q_load) {
    PowerFlowCase c(2);
    c.energized = {1, 1};
    c.branches = {0};
    c.type[0] = BusType::slack;
    c.p_load_mw[1] = p_load;
    c.q_load_mvar[1] = q_load;
    return c;
}

RestorationState state_for(const GridModel& m, const PowerFlowCase& c, double load_p, double load_q) {
    RestorationState s;
    s.energized = c.energized;
    s.restored_branches = c.branches;
    s.generators.assign(m.generators.size(), {});
    s.generators[0].connected = true;
    s.generators[0].started = true;
    s.generators[0].available_mw = m.generators[0].rated_power_mw;
    s.restored_load_p_mw = load_p;
    s.restored_load_q_mvar = load_q;
    return s;
}

}  // namespace

TEST_CASE("single energized bus solves flat", "[powerflow]") {
    const auto& m = oracle::toy6();
    PowerFlowCase c(m.node_count());
    const int bs = m.black_start_node();
    c.energized[bs] = 1;
    c.type[bs] = BusType::slack;
    const auto sol = solve_acdc(m, c, {});
    CHECK(sol.converged);
    CHECK(sol.vm[bs] == 1.0);
    CHECK(sol.va[bs] == 0.0);
    CHECK(sol.newton_iterations == 0);
    CHECK(sol.slack_p_mw == Approx(0.0).margin(1e-12));
}

TEST_CASE("two-bus case matches the closed-form solution", "[powerflow]") {
    for (auto [x, p, q] : {std::tuple{0.1, 50.0, 0.0}, std::tuple{0.1, 50.0, 20.0}, std::tuple{0.25, 120.0, -10.0}}) {
        const auto m = two_bus(x);
        const auto sol = solve_acdc(m, two_bus_case(p, q), {});
        const auto [v, theta] = oracle::two_bus_voltage(x, p / 100, q / 100);
        CHECK(sol.vm[1] == Approx(v).epsilon(1e-7));
        CHECK(sol.va[1] == Approx(theta).epsilon(1e-7));
        CHECK(sol.va[0] == 0.0);
        CHECK(sol.slack_p_mw == Approx(p).epsilon(1e-6));
        CHECK(sol.losses_mw == Approx(0.0).margin(1e-6));
    }
}

TEST_CASE("no slack is rejected", "[powerflow]") {
    const auto m = two_bus(0.1);
    auto c = two_bus_case(50, 0);
    c.type[0] = BusType::pq;
    CHECK_THROWS_AS(solve_acdc(m, c, {}), ValidationError);
}

TEST_CASE("overloaded radial line diverges", "[powerflow]") {
    const auto m = two_bus(0.5);
    CHECK_THROWS_AS(solve_acdc(m, two_bus_case(500, 0), {}), Diverged);
}

TEST_CASE("check_limits", "[powerflow]") {
    auto m = two_bus(0.1);
    const auto c = two_bus_case(50, 0);
    const auto sol = solve_acdc(m, c, {});

    SECTION("feasible state has an empty report") {
        const auto rep = check_limits(sol, c, m, state_for(m, c, 50, 0));
        CHECK(rep.feasible());
        CHECK(rep.summary().empty());
    }
    SECTION("active bound breach") {
        m.generators[0].active_limits.hi = 49;
        const auto rep = check_limits(sol, c, m, state_for(m, c, 50, 0));
        REQUIRE(rep.violations.size() == 1);
        CHECK(rep.violations[0].constraint == Constraint::generator_active);
        CHECK(rep.violations[0].entity == "generator 1");
    }
    SECTION("load beyond supply") {
        auto s = state_for(m, c, 50, 0);
        s.generators[0].available_mw = 40;
        const auto rep = check_limits(sol, c, m, s);
        REQUIRE_FALSE(rep.feasible());
        CHECK(rep.violations[0].constraint == Constraint::active_balance);
    }
    SECTION("branch capacity") {
        m.branches[0].flow_limits = {-40, 40};
        const auto rep = check_limits(sol, c, m, state_for(m, c, 50, 0));
        REQUIRE(rep.violations.size() == 1);
        CHECK(rep.violations[0].constraint == Constraint::branch_flow);
        CHECK(rep.summary().find("branch 1") != std::string::npos);
    }
    SECTION("voltage band") {
        m.nodes[1].voltage_limits = {sol.vm[1] + 1e-3, 1.1};
        const auto rep = check_limits(sol, c, m, state_for(m, c, 50, 0));
        REQUIRE(rep.violations.size() == 1);
        CHECK(rep.violations[0].constraint == Constraint::bus_voltage);
    }
    SECTION("reactive surplus beyond absorption") {
        m.branches[0].charging_mvar = 80;
        const auto rep = check_limits(sol, c, m, state_for(m, c, 50, 0));
        REQUIRE_FALSE(rep.feasible());
        CHECK(rep.violations[0].constraint == Constraint::reactive_balance);
    }
    SECTION("start-up between hot and cold windows") {
        m.generators.push_back(m.generators[0]);
        auto& g = m.generators.back();
        g.id = 2;
        g.node = 1;
        g.is_black_start = false;
        g.hot_start_deadline = 30;
        g.cold_start_earliest = 120;
        auto s = state_for(m, c, 50, 0);
        s.generators[1].started = true;
        s.generators[1].start_time = 60;
        auto rep = check_limits(sol, c, m, s);
        REQUIRE_FALSE(rep.feasible());
        CHECK(rep.violations.back().constraint == Constraint::start_window);
        s.generators[1].start_time = 20;
        rep = check_limits(sol, c, m, s);
        CHECK(std::none_of(rep.violations.begin(), rep.violations.end(),
                           [](const Violation& v) { return v.constraint == Constraint::start_window; }));
    }
}

TEST_CASE("replay solutions close the balance", "[powerflow][property]") {
    for (const auto* m : {&oracle::ieee39(), &oracle::toy6()}) {
        RestorationScheme s = m == &oracle::toy6() ? dijkstra_baseline(*m, {1, 6, 5}) : oracle::scheme1();
        const auto tl = run_simulation(*m, s);
        REQUIRE(tl.feasible);
        for (const auto& step : tl.steps) {
            CHECK(step.pf_max_mismatch_pu < 1e-6);
            CHECK(std::abs(step.pf_balance_residual_mw) / m->params.s_base < 1e-4);
            CHECK(step.v_min_pu >= 0.9 - 1e-6);
            CHECK(step.v_max_pu <= 1.1 + 1e-6);
        }
    }
}

TEST_CASE("AC-DC solve with converter injection", "[powerflow]") {
    // final Scheme 1 network, converter at its last dispatch
    const auto& m = oracle::ieee39();
    const auto tl = run_simulation(m, oracle::scheme1());
    REQUIRE(tl.feasible);
    const auto& last = tl.steps.back();
    REQUIRE(last.hvdc.started());

    PowerFlowCase c(m.node_count());
    for (const auto& br : tl.branches) {
        c.branches.push_back(br.branch);
        c.energized[m.branches[br.branch].from] = 1;
        c.energized[m.branches[br.branch].to] = 1;
    }
    c.energized[m.black_start_node()] = 1;
    for (std::size_t g = 0; g < m.generators.size(); ++g) {
        const auto& gen = m.generators[g];
        c.type[gen.node] = gen.is_black_start ? BusType::slack : BusType::pv;
        c.v_set[gen.node] = gen.voltage_setpoint;
        c.p_gen_mw[gen.node] = gen.is_black_start ? 0.0 : last.gen_dispatch_mw[g];
    }
    double peak = 0.0;
    for (std::size_t i = 0; i < m.node_count(); ++i)
        if (c.energized[i]) peak += m.nodes[i].load_p_mw;
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        if (!c.energized[i]) continue;
        c.p_load_mw[i] = last.restored_load_mw * m.nodes[i].load_p_mw / peak;
        c.q_load_mvar[i] = last.restored_load_mw * m.nodes[i].load_q_mvar / peak;
    }
    DcInjection dc{true, last.hvdc.p_d_mw, 0.0, last.hvdc.q_filter_mvar};
    const auto sol = solve_acdc(m, c, dc);
    CHECK(sol.converged);
    CHECK(sol.max_mismatch_pu < 1e-6);
    const int d = m.hvdc_node();
    CHECK(sol.q_d_mvar ==
          Approx(converter_operating_point(*m.hvdc, dc.p_d_mw, sol.vm[d]).q_d_mvar).margin(0.1));
    for (std::size_t i = 0; i < m.node_count(); ++i)
        if (c.energized[i]) {
            CHECK(sol.vm[i] >= 0.9);
            CHECK(sol.vm[i] <= 1.1);
        }

    SECTION("a solution is its own fixed point") {
        DcInjection again = dc;
        again.q_d_mvar = sol.q_d_mvar;
        const auto re = solve_acdc(m, c, again, {}, &sol);
        CHECK(re.outer_iterations <= 1);
        for (std::size_t i = 0; i < m.node_count(); ++i) CHECK(re.vm[i] == Approx(sol.vm[i]).margin(1e-6));
    }
    SECTION("identical inputs give identical bits") {
        const auto other = solve_acdc(m, c, dc);
        CHECK(other.vm == sol.vm);
        CHECK(other.va == sol.va);
        CHECK(other.q_d_mvar == sol.q_d_mvar);
    }
}
