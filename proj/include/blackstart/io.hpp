#pragma once

// Scheme files and result exporters (CSV, JSON, Graphviz DOT).

#include "blackstart/errors.hpp"
#include "blackstart/grid_model.hpp"
#include "blackstart/optimize.hpp"
#include "blackstart/simulate.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace blackstart {

// -- scheme files --------------------------------------------------------------
// {"order": [branch ids...], "include_link": [branch ids...]}

inline nlohmann::json scheme_to_json(const GridModel& model, const RestorationScheme& scheme) {
    nlohmann::json order = nlohmann::json::array();
    nlohmann::json links = nlohmann::json::array();
    for (int b : scheme.order) order.push_back(model.branches[b].id);
    const auto flags = scheme.include_link.empty() ? check_scheme_structure(model, scheme) : scheme.include_link;
    for (int b : scheme.order)
        if (flags[b]) links.push_back(model.branches[b].id);
    return {{"order", order}, {"include_link", links}};
}

inline RestorationScheme scheme_from_json(const GridModel& model, const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("order") || !doc["order"].is_array())
        throw SchemaError("scheme", "expected an object with an \"order\" array");
    RestorationScheme scheme;
    for (const auto& v : doc["order"]) {
        if (!v.is_number_integer()) throw SchemaError("scheme.order", "branch ids must be integers");
        const int id = v.get<int>();
        if (!model.has_branch_id(id)) throw ValidationError("scheme names unknown branch " + std::to_string(id));
        scheme.order.push_back(model.branch_index(id));
    }
    scheme.include_link.assign(model.branch_count(), 0);
    if (doc.contains("include_link")) {
        if (!doc["include_link"].is_array()) throw SchemaError("scheme.include_link", "expected an array");
        for (const auto& v : doc["include_link"]) {
            if (!v.is_number_integer()) throw SchemaError("scheme.include_link", "branch ids must be integers");
            const int id = v.get<int>();
            if (!model.has_branch_id(id)) throw ValidationError("scheme names unknown branch " + std::to_string(id));
            scheme.include_link[model.branch_index(id)] = 1;
        }
    }
    return scheme;
}

inline RestorationScheme load_scheme(const GridModel& model, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scheme file " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return scheme_from_json(model, doc);
}

// -- number formatting -----------------------------------------------------------

inline std::string fixed(double v, int decimals) {
    if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s(buf);
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);  // no "-0.00"
    return s;
}

// -- timeline --------------------------------------------------------------------

inline const char* timeline_header = "t_min,sum_p_mw,p_d_mw,s_sc_mva,m_f_mw_per_hz,scr,restored_load_mw";

inline std::string timeline_csv(const Timeline& tl) {
    std::ostringstream out;
    out << timeline_header << '\n';
    for (const auto& s : tl.steps) {
        out << fixed(s.t, 2) << ',' << fixed(s.sum_p_mw, 2) << ',' << fixed(s.hvdc.p_d_mw, 2) << ','
            << fixed(s.strength.scc_mva, 2) << ',' << fixed(s.strength.frc_mw_per_hz, 3) << ','
            << (s.strength.scr ? fixed(*s.strength.scr, 3) : std::string()) << ',' << fixed(s.restored_load_mw, 2)
            << '\n';
    }
    return out.str();
}

inline nlohmann::json timeline_json(const Timeline& tl) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : tl.steps) {
        rows.push_back({{"t_min", s.t},
                        {"sum_p_mw", s.sum_p_mw},
                        {"p_d_mw", s.hvdc.p_d_mw},
                        {"s_sc_mva", s.strength.scc_mva},
                        {"m_f_mw_per_hz", s.strength.frc_mw_per_hz},
                        {"scr", s.strength.scr ? nlohmann::json(*s.strength.scr) : nlohmann::json(nullptr)},
                        {"restored_load_mw", s.restored_load_mw}});
    }
    return {{"feasible", tl.feasible},
            {"objective_mw", tl.objective},
            {"total_time_min", tl.total_time},
            {"hvdc_start_min", tl.hvdc_start() ? nlohmann::json(*tl.hvdc_start()) : nlohmann::json(nullptr)},
            {"steps", rows}};
}

// -- stage table -----------------------------------------------------------------

inline std::string join_ids(const std::vector<int>& ids, char sep) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) s += sep;
        s += std::to_string(ids[i]);
    }
    return s;
}

inline std::string stages_csv(const std::vector<StageRow>& rows) {
    std::ostringstream out;
    out << "stage,source_node,start_min,connect_min,path,p_d_mw\n";
    for (const auto& r : rows) {
        out << r.stage << ',' << (r.source_node ? std::to_string(*r.source_node) : std::string()) << ','
            << (r.start_time ? fixed(*r.start_time, 2) : std::string()) << ',' << fixed(r.connect_time, 2) << ','
            << join_ids(r.path, '-') << ',' << fixed(r.p_d_mw, 2) << '\n';
    }
    return out.str();
}

inline nlohmann::json stages_json(const std::vector<StageRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows)
        out.push_back({{"stage", r.stage},
                       {"source_node", r.source_node ? nlohmann::json(*r.source_node) : nlohmann::json(nullptr)},
                       {"start_min", r.start_time ? nlohmann::json(*r.start_time) : nlohmann::json(nullptr)},
                       {"connect_min", r.connect_time},
                       {"path", r.path},
                       {"p_d_mw", r.p_d_mw}});
    return out;
}

// -- GA history ------------------------------------------------------------------

inline std::string history_csv(const std::vector<HistoryRow>& rows) {
    std::ostringstream out;
    out << "generation,subpopulation,best_f,mean_f,feasible_count\n";
    for (const auto& r : rows)
        out << r.generation << ',' << r.subpopulation << ',' << fixed(r.best_f, 4) << ',' << fixed(r.mean_f, 4) << ','
            << r.feasible_count << '\n';
    return out.str();
}

// -- DC power profile -------------------------------------------------------------

inline std::string profile_csv(const DcPowerProfile& profile) {
    std::ostringstream out;
    out << "time_min,p_d_up_mw\n";
    for (const auto& s : profile.steps) out << fixed(s.t, 2) << ',' << fixed(s.ceiling_mw, 2) << '\n';
    return out.str();
}

// -- skeleton network ---------------------------------------------------------------

/// Restored branches solid, loop closures dashed, generators boxed, the HVDC
/// node double-circled.
inline std::string skeleton_dot(const GridModel& model, const RestorationScheme& scheme) {
    const auto links = check_scheme_structure(model, scheme);
    std::set<int> nodes;
    for (int b : scheme.order) {
        nodes.insert(model.branches[b].from);
        nodes.insert(model.branches[b].to);
    }
    nodes.insert(model.black_start_node());
    std::ostringstream out;
    out << "graph skeleton {\n";
    for (int v : nodes) {
        out << "  n" << model.nodes[v].id << " [label=\"" << model.nodes[v].id << '"';
        if (v == model.hvdc_node())
            out << ", shape=doublecircle";
        else if (model.generator_at(v) >= 0)
            out << ", shape=box" << (model.generators[model.generator_at(v)].is_black_start ? ", style=bold" : "");
        else
            out << ", shape=circle";
        out << "];\n";
    }
    for (std::size_t k = 0; k < scheme.order.size(); ++k) {
        const int b = scheme.order[k];
        const auto& br = model.branches[b];
        out << "  n" << model.nodes[br.from].id << " -- n" << model.nodes[br.to].id << " [label=\"" << br.id << " ("
            << k + 1 << ")\"" << (links[b] ? ", style=dashed" : "") << "];\n";
    }
    out << "}\n";
    return out.str();
}

// -- files ---------------------------------------------------------------------------

/// Writes through a temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace blackstart
