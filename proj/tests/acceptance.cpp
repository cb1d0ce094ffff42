// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//
// Criterion 5 runs 100 seeds with a reduced generation budget by default plus
// one timed run at the full default budget. BLACKSTART_ACCEPTANCE_FULL=1 makes
// all 100 seeds use the full budget (about three hours on one core).

#include "support/grow.hpp"
#include "support/oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

using namespace blackstart;

namespace {

// Tolerances
constexpr double kZTol = 1e-8;
constexpr double kZSeconds = 30.0;
constexpr double kCeilTol = 0.01;
constexpr double kStartTol = 5.0;
constexpr double kFinalPdRel = 0.10;
constexpr double kFinalPdRef = 645.95;
constexpr double kFullRunSeconds = 600.0;
constexpr double kEnumSeconds = 5.0;
constexpr int kRuns = 100;
constexpr int kRequired = 95;
constexpr double kScrTol = 1e-9;
constexpr double kMismatchTol = 1e-6;
constexpr double kBalanceTol = 1e-4;
constexpr int kReducedGenerations = 5;

int failures = 0;

void report(int n, bool ok, const std::string& name, const std::string& detail) {
    std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", n, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, int d = 2) { return fixed(v, d); }

// Properties 7, 8 and 9 are gathered over every timeline the suite produces.
struct Audit {
    std::size_t timelines = 0;
    std::size_t dc_steps = 0;
    std::size_t pf_steps = 0;
    std::size_t ga_runs = 0;
    double worst_scr = std::numeric_limits<double>::infinity();
    double worst_mismatch = 0.0;
    double worst_balance = 0.0;
    int scr_bad = 0;
    int scc_drops = 0;
    int frc_drops = 0;
    int ga_rises = 0;

    void timeline(const GridModel& m, const Timeline& tl) {
        ++timelines;
        double prev_scc = 0.0;
        double prev_frc = 0.0;
        // the last step of an infeasible run may hold a failed solve
        const std::size_t solved = tl.feasible || tl.steps.empty() ? tl.steps.size() : tl.steps.size() - 1;
        for (std::size_t k = 0; k < tl.steps.size(); ++k) {
            const auto& s = tl.steps[k];
            if (s.strength.scc_mva < prev_scc * (1 - 1e-12)) ++scc_drops;
            if (s.strength.frc_mw_per_hz < prev_frc * (1 - 1e-12)) ++frc_drops;
            prev_scc = s.strength.scc_mva;
            prev_frc = s.strength.frc_mw_per_hz;
            if (tl.feasible && s.hvdc.p_d_mw > 0) {
                ++dc_steps;
                const double r = s.strength.scc_mva / s.hvdc.p_d_mw;
                worst_scr = std::min(worst_scr, r);
                if (r < 3.0 - kScrTol) ++scr_bad;
            }
            if (k < solved) {
                ++pf_steps;
                worst_mismatch = std::max(worst_mismatch, s.pf_max_mismatch_pu);
                worst_balance = std::max(worst_balance, std::abs(s.pf_balance_residual_mw) / m.params.s_base);
            }
        }
    }

    void ga(const GaResult& r) {
        ++ga_runs;
        for (std::size_t g = 1; g < r.best_by_generation.size(); ++g)
            if (r.best_by_generation[g] > r.best_by_generation[g - 1]) ++ga_rises;
    }
} audit;

void criterion_impedance() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240601);
    double worst = 0.0;
    int loops = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = oracle::random_grid(rng, 5, 20);
        loops += g.loops;
        const auto grown = oracle::grow(g.model, rng);
        const auto inv = oracle::zbus_by_inversion(g.model, grown.z.restored_nodes(), grown.branches, grown.grounded);
        worst = std::max(worst, (grown.z.dense() - inv).cwiseAbs().maxCoeff());
    }
    const double secs = seconds_since(t0);
    report(1, worst < kZTol && secs < kZSeconds, "impedance oracle equivalence",
           "200 grids (" + std::to_string(loops) + " loops), max |Z - inv(Y)| = " + fixed(worst * 1e12, 3) +
               "e-12 p.u., " + num(secs) + " s");
}

void criterion_floors() {
    GridModel m = oracle::toy6();
    m.params.scc_floor_override.reset();
    m.params.frc_floor_override.reset();
    m.params.max_freq_dev = 0.5;
    m.hvdc->rated_power_mw = 1000;
    const double a = derive_floors(m).frc_mw_per_hz;
    m.hvdc->rated_power_mw = 3000;
    const double b = derive_floors(m).frc_mw_per_hz;
    report(2, a == 70.0 && b == 210.0, "floor reproduction",
           "M_f_min = " + num(a, 3) + " and " + num(b, 3) + " MW/Hz");
}

void criterion_ceilings() {
    const double a = dc_ceiling(1700.97, 3.0);
    const double b = dc_ceiling(2243.74, 3.0);
    report(3, std::abs(a - 566.99) <= kCeilTol && std::abs(b - 747.91) <= kCeilTol, "ceiling reproduction",
           "dc_ceiling = " + num(a) + " and " + num(b) + " MW");
}

void criterion_scheme1() {
    const auto& m = oracle::ieee39();
    const auto tl = run_simulation(m, oracle::scheme1());
    audit.timeline(m, tl);
    const auto start = tl.hvdc_start();
    const double final_pd = tl.final_p_d();
    bool identity = true;
    for (const auto& s : tl.steps) {
        if (!s.hvdc.started()) continue;
        identity = identity && std::abs(s.ceiling_mw - s.strength.scc_mva / 3.0) < 1e-9 &&
                   s.hvdc.p_d_mw <= s.ceiling_mw + 1e-9;
    }
    const bool ok = tl.feasible && start && std::abs(*start - 105.0) <= kStartTol &&
                    std::abs(final_pd - kFinalPdRef) <= kFinalPdRel * kFinalPdRef && identity;
    report(4, ok, "Scheme 1 replay",
           std::string("feasible ") + (tl.feasible ? "yes" : "no") + ", HVDC start " +
               (start ? num(*start) : std::string("never")) + " min, final P_D " + num(final_pd) +
               " MW, P_D <= S_sc/3 at every started step: " + (identity ? "yes" : "no") + ", F " +
               num(tl.objective) + " MW");
}

GaConfig ieee_config(std::uint64_t seed, int generations) {
    GaConfig cfg;
    cfg.rng_seed = seed;
    cfg.max_generations = generations;
    return cfg;
}

void criterion_dominance() {
    const auto& m = oracle::ieee39();
    const auto base = run_simulation(m, dijkstra_baseline(m, {31, 32, 37, 35, 39, 30, 33, 34, 36, 38}));
    audit.timeline(m, base);
    const bool full = std::getenv("BLACKSTART_ACCEPTANCE_FULL") != nullptr;
    const int generations = full ? GaConfig{}.max_generations : kReducedGenerations;

    const auto t_full = std::chrono::steady_clock::now();
    const auto timed = mpga_optimize(m, ieee_config(1000, GaConfig{}.max_generations));
    const double full_secs = seconds_since(t_full);
    audit.ga(timed);
    audit.timeline(m, timed.best_timeline);

    int wins = 0;
    double worst = -std::numeric_limits<double>::infinity();
    const auto t0 = std::chrono::steady_clock::now();
    for (int seed = 1; seed <= kRuns; ++seed) {
        const auto r = mpga_optimize(m, ieee_config(static_cast<std::uint64_t>(seed), generations));
        audit.ga(r);
        audit.timeline(m, r.best_timeline);
        if (r.best_timeline.feasible && r.best_timeline.objective <= base.objective) ++wins;
        worst = std::max(worst, r.best_timeline.objective);
    }
    const double secs = seconds_since(t0);
    const bool ok = base.feasible && wins >= kRequired && full_secs < kFullRunSeconds &&
                    timed.best_timeline.objective <= base.objective;
    report(5, ok, "optimizer dominance",
           "baseline F " + num(base.objective) + " MW; " + std::to_string(wins) + "/100 seeds at " +
               std::to_string(generations) + " generations beat it (worst F " + num(worst) + ", " + num(secs) +
               " s total); full " + std::to_string(GaConfig{}.max_generations) + "-generation run F " +
               num(timed.best_timeline.objective) + " MW in " + num(full_secs) + " s");
}

void criterion_enumeration() {
    const auto& m = oracle::toy6();
    const auto t0 = std::chrono::steady_clock::now();
    const auto truth = oracle::enumerate_optimum(m);
    const double enum_secs = seconds_since(t0);
    RestorationScheme best;
    best.order = truth.best_order;
    audit.timeline(m, run_simulation(m, best));

    int hits = 0;
    for (int seed = 1; seed <= kRuns; ++seed) {
        GaConfig cfg;
        cfg.rng_seed = static_cast<std::uint64_t>(seed);
        const auto r = mpga_optimize(m, cfg);
        audit.ga(r);
        audit.timeline(m, r.best_timeline);
        if (std::abs(r.best_timeline.objective - truth.best_f) <= 1e-9 * std::abs(truth.best_f)) ++hits;
    }
    report(6, hits >= kRequired && enum_secs < kEnumSeconds, "enumeration optimality",
           std::to_string(truth.orders) + " schemes enumerated (" + std::to_string(truth.feasible) +
               " feasible) in " + fixed(enum_secs, 3) + " s, optimum F " + num(truth.best_f, 4) + " MW; GA matched in " +
               std::to_string(hits) + "/100 seeds");
}

// Extra timelines for the whole-suite properties: random toy schemes
// including infeasible ones.
void sweep_random_toy() {
    const auto& m = oracle::toy6();
    std::mt19937_64 rng(404);
    for (int k = 0; k < 200; ++k) audit.timeline(m, run_simulation(m, its_repair(random_chromosome(m.branch_count(), rng), m)));
}

void criterion_scr() {
    report(7, audit.scr_bad == 0 && audit.dc_steps > 0, "SCR floor",
           std::to_string(audit.dc_steps) + " steps with P_D > 0 over " + std::to_string(audit.timelines) +
               " timelines, min S_sc/P_D = " + num(audit.worst_scr, 6));
}

void criterion_monotone() {
    report(8, audit.scc_drops == 0 && audit.frc_drops == 0 && audit.ga_rises == 0, "monotonicity",
           std::to_string(audit.scc_drops) + " S_sc drops, " + std::to_string(audit.frc_drops) + " M_f drops over " +
               std::to_string(audit.timelines) + " timelines; " + std::to_string(audit.ga_rises) +
               " best-fitness rises over " + std::to_string(audit.ga_runs) + " GA runs");
}

void criterion_closure() {
    report(9, audit.worst_mismatch < kMismatchTol && audit.worst_balance < kBalanceTol && audit.pf_steps > 0,
           "power-flow closure",
           std::to_string(audit.pf_steps) + " solutions, max mismatch " + fixed(audit.worst_mismatch * 1e9, 3) +
               "e-9 p.u., max balance residual " + fixed(audit.worst_balance * 1e9, 3) + "e-9 p.u.");
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void criterion_determinism() {
    const auto& m = oracle::ieee39();
    const auto root = std::filesystem::temp_directory_path() / "blackstart_acceptance";
    std::filesystem::remove_all(root);
    bool same = true;
    for (const auto* grid : {&oracle::toy6(), &m}) {
        std::string files[2][2];
        for (int run = 0; run < 2; ++run) {
            const auto dir = root / std::to_string(run);
            std::filesystem::create_directories(dir);
            const auto r = mpga_optimize(*grid, ieee_config(4242, kReducedGenerations));
            write_file_atomic(dir / "scheme.json", scheme_to_json(*grid, r.best).dump(2) + "\n");
            write_file_atomic(dir / "timeline.csv", timeline_csv(r.best_timeline));
            files[run][0] = slurp(dir / "scheme.json");
            files[run][1] = slurp(dir / "timeline.csv");
        }
        same = same && !files[0][0].empty() && files[0][0] == files[1][0] && files[0][1] == files[1][1];
    }
    std::filesystem::remove_all(root);
    report(10, same, "determinism",
           std::string("scheme.json and timeline.csv from two seed-4242 runs on both grids are ") +
               (same ? "byte-identical" : "different"));
}

}  // namespace

int main() {
    try {
        criterion_impedance();
        criterion_floors();
        criterion_ceilings();
        criterion_scheme1();
        criterion_dominance();
        criterion_enumeration();
        sweep_random_toy();
        criterion_scr();
        criterion_monotone();
        criterion_closure();
        criterion_determinism();
    } catch (const std::exception& e) {
        std::printf("[FAIL] aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
