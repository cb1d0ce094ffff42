// Command-line front end: optimize, simulate, baseline, validate.
//
// Exit codes: 0 success, 1 invalid input, 2 infeasible or unreachable scheme,
// 3 internal error, 64 usage error.

#include "blackstart/blackstart.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace blackstart;

namespace {

constexpr const char* tool_version = "1.0.0";

enum Exit { ok = 0, invalid = 1, infeasible = 2, internal = 3, usage = 64 };

struct Options {
    std::string grid;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<double> time_step;
    std::optional<double> scr_floor;
    std::optional<int> generations;
    std::optional<int> subpops;
    std::string format = "csv";
    std::string scheme;
    std::string order;
    std::string against;
};

GridModel load_model(const Options& o, nlohmann::json& overrides) {
    auto model = load_grid(o.grid);
    if (o.time_step) {
        model.params.time_step = *o.time_step;
        overrides["time_step"] = *o.time_step;
    }
    if (o.scr_floor) {
        if (!model.hvdc) throw ValidationError("--scr-floor given but the grid has no HVDC terminal");
        model.hvdc->scr_floor = *o.scr_floor;
        overrides["scr_floor"] = *o.scr_floor;
    }
    model.validate();
    return model;
}

std::vector<int> parse_id_list(const std::string& text) {
    std::vector<int> ids;
    std::string token;
    std::istringstream in(text);
    auto flush = [&] {
        if (token.empty()) return;
        try {
            std::size_t used = 0;
            ids.push_back(std::stoi(token, &used));
            if (used != token.size()) throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw ValidationError("'" + token + "' is not a node id");
        }
        token.clear();
    };
    for (char c : text) {
        if (c == '-' || c == ',' || c == ' ')
            flush();
        else
            token += c;
    }
    flush();
    return ids;
}

class Artifacts {
public:
    Artifacts(fs::path dir, std::string format) : dir_(std::move(dir)), format_(std::move(format)) {
        fs::create_directories(dir_);
    }

    void write(const std::string& name, const std::string& content) {
        write_file_atomic(dir_ / name, content);
        files_.push_back(name);
    }

    void results(const GridModel& model, const RestorationScheme& scheme, const Timeline& tl) {
        write("scheme.json", scheme_to_json(model, scheme).dump(2) + "\n");
        const auto stages = stage_table(model, tl);
        if (format_ == "json") {
            write("timeline.json", timeline_json(tl).dump(2) + "\n");
            write("stages.json", stages_json(stages).dump(2) + "\n");
        } else {
            write("timeline.csv", timeline_csv(tl));
            write("stages.csv", stages_csv(stages));
        }
        write("profile.csv", profile_csv(build_profile(tl)));
        write("skeleton.dot", skeleton_dot(model, scheme));
    }

    void manifest(const Options& o, const std::string& command, const nlohmann::json& overrides,
                  std::optional<std::uint64_t> seed, double seconds) {
        nlohmann::json m = {{"scenario", o.grid},
                            {"command", command},
                            {"overrides", overrides},
                            {"seed", seed ? nlohmann::json(*seed) : nlohmann::json(nullptr)},
                            {"output_dir", dir_.string()},
                            {"tool_version", tool_version},
                            {"wall_clock_s", seconds},
                            {"files", files_}};
        write_file_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
    }

private:
    fs::path dir_;
    std::string format_;
    std::vector<std::string> files_;
};

void print_summary(const GridModel& model, const Timeline& tl) {
    std::cout << "feasible: " << (tl.feasible ? "yes" : "no") << '\n';
    std::cout << "F: " << fixed(tl.objective, 2) << " MW\n";
    std::cout << "T: " << fixed(tl.total_time, 2) << " min\n";
    if (model.hvdc) {
        const auto start = tl.hvdc_start();
        std::cout << "HVDC start: " << (start ? fixed(*start, 2) + " min" : std::string("never")) << '\n';
        std::cout << "final P_D: " << fixed(tl.final_p_d(), 2) << " MW\n";
    }
    if (!tl.feasible)
        std::cout << "violation at t=" << fixed(tl.violation_time, 2) << " min: " << tl.violation.summary() << '\n';
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int cmd_optimize(const Options& o) {
    const auto t0 = Clock::now();
    nlohmann::json overrides = nlohmann::json::object();
    const auto model = load_model(o, overrides);
    GaConfig cfg;
    cfg.rng_seed = o.seed ? *o.seed : std::random_device{}();
    if (o.generations) {
        cfg.max_generations = *o.generations;
        overrides["generations"] = *o.generations;
    }
    if (o.subpops) {
        cfg.subpopulations = *o.subpops;
        overrides["subpopulations"] = *o.subpops;
    }
    const auto res = mpga_optimize(model, cfg);
    Artifacts out(o.out, o.format);
    out.results(model, res.best, res.best_timeline);
    out.write("history.csv", history_csv(res.history));
    out.manifest(o, "optimize", overrides, cfg.rng_seed, seconds_since(t0));
    print_summary(model, res.best_timeline);
    std::cout << "seed: " << cfg.rng_seed << '\n';
    return ok;
}

int cmd_simulate(const Options& o) {
    const auto t0 = Clock::now();
    nlohmann::json overrides = nlohmann::json::object();
    const auto model = load_model(o, overrides);
    const auto scheme = load_scheme(model, o.scheme);
    const auto tl = run_simulation(model, scheme);
    Artifacts out(o.out, o.format);
    out.results(model, scheme, tl);
    out.manifest(o, "simulate", overrides, std::nullopt, seconds_since(t0));
    print_summary(model, tl);
    return tl.feasible ? ok : infeasible;
}

std::vector<int> default_source_order(const GridModel& model) {
    std::vector<int> ids;
    ids.push_back(model.nodes[model.black_start_node()].id);
    for (int v : model.source_nodes())
        if (v != model.black_start_node()) ids.push_back(model.nodes[v].id);
    return ids;
}

int cmd_baseline(const Options& o) {
    const auto t0 = Clock::now();
    nlohmann::json overrides = nlohmann::json::object();
    const auto model = load_model(o, overrides);
    const auto order = o.order.empty() ? default_source_order(model) : parse_id_list(o.order);
    overrides["order"] = order;
    const auto scheme = dijkstra_baseline(model, order);
    const auto tl = run_simulation(model, scheme);
    Artifacts out(o.out, o.format);
    out.results(model, scheme, tl);
    out.manifest(o, "baseline", overrides, std::nullopt, seconds_since(t0));
    print_summary(model, tl);
    if (!o.against.empty()) {
        const auto other = run_simulation(model, load_scheme(model, o.against));
        std::cout << "against " << o.against << ":\n";
        std::cout << "  dF: " << fixed(tl.objective - other.objective, 2) << " MW\n";
        std::cout << "  dT: " << fixed(tl.total_time - other.total_time, 2) << " min\n";
        std::cout << "  d final P_D: " << fixed(tl.final_p_d() - other.final_p_d(), 2) << " MW\n";
    }
    return tl.feasible ? ok : infeasible;
}

int cmd_validate(const Options& o) {
    nlohmann::json overrides = nlohmann::json::object();
    const auto model = load_model(o, overrides);
    const auto floors = derive_floors(model);
    std::cout << "grid: " << model.node_count() << " nodes, " << model.branch_count() << " branches, "
              << model.generators.size() << " generators, " << (model.hvdc ? "1" : "0") << " HVDC terminal\n";
    std::cout << "floors: S_sc >= " << fixed(floors.scc_mva, 2) << " MVA, M_f >= " << fixed(floors.frc_mw_per_hz, 3)
              << " MW/Hz\n";
    if (!o.scheme.empty()) {
        const auto scheme = load_scheme(model, o.scheme);
        check_scheme_structure(model, scheme);
        std::cout << "scheme: " << scheme.order.size() << " branches, structurally valid\n";
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Restoration path planning for grids with an LCC-HVDC infeed"};
    app.require_subcommand(1);
    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--grid", o.grid, "grid JSON file")->required();
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--time-step", o.time_step, "simulation step, minutes")->check(CLI::PositiveNumber);
        sub->add_option("--scr-floor", o.scr_floor, "minimum short circuit ratio")->check(CLI::PositiveNumber);
        sub->add_option("--format", o.format, "timeline and stage table layout")->check(CLI::IsMember({"csv", "json"}));
    };
    auto* opt = app.add_subcommand("optimize", "search a restoration scheme");
    add_common(opt);
    opt->add_option("--seed", o.seed, "random seed (drawn and recorded when omitted)");
    opt->add_option("--generations", o.generations, "generations")->check(CLI::PositiveNumber);
    opt->add_option("--subpops", o.subpops, "subpopulations")->check(CLI::PositiveNumber);
    auto* sim = app.add_subcommand("simulate", "replay a scheme file");
    add_common(sim);
    sim->add_option("--scheme", o.scheme, "scheme JSON file")->required();
    auto* base = app.add_subcommand("baseline", "shortest-path scheme for a source order");
    add_common(base);
    base->add_option("--order", o.order, "source node ids, e.g. 31-32-37");
    base->add_option("--against", o.against, "scheme file to compare with");
    auto* val = app.add_subcommand("validate", "check a grid (and optionally a scheme) file");
    add_common(val);
    val->add_option("--scheme", o.scheme, "scheme JSON file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        if (*opt) return cmd_optimize(o);
        if (*sim) return cmd_simulate(o);
        if (*base) return cmd_baseline(o);
        if (*val) return cmd_validate(o);
    } catch (const InfeasibleScheme& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return infeasible;
    } catch (const Unreachable& e) {
        std::cerr << "unreachable: " << e.what() << '\n';
        return infeasible;
    } catch (const NoFeasibleScheme& e) {
        std::cerr << "no feasible scheme: " << e.what() << '\n';
        return infeasible;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return invalid;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return invalid;
    } catch (const ValidationError& e) {
        std::cerr << "invalid: " << e.what() << '\n';
        return invalid;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return internal;
    }
    return usage;
}
