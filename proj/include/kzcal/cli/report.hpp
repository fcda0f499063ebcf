#pragma once

// Report serialization (JSON or CSV), atomic file output and plot data.

#include "kzcal/cli/suites.hpp"

#include <charconv>

namespace kzcal::cli {

inline json to_json(const SuiteStats& s) {
    json j;
    j["name"] = s.name;
    j["passed"] = s.passed;
    j["tolerance"] = s.tolerance;
    j["instances"] = s.instances;
    j["not_applicable"] = s.not_applicable;
    j["max_residual"] = s.max_residual;
    j["median_residual"] = s.median_residual;
    j["failures"] = s.failures;
    j["exploratory"] = s.exploratory;
    j["details"] = s.details;
    j["wall_time_s"] = s.wall_time_s;
    return j;
}

/// Field names here are the documented report schema; new fields are only ever appended.
inline json to_json(const RunReport& r) {
    json j;
    j["tool"] = "kzcal";
    j["version"] = kToolVersion;
    if (r.config.seed) j["seed"] = *r.config.seed;
    else j["seed"] = nullptr;
    j["passed"] = r.passed;
    j["config"] = to_json(r.config);
    json inst = json::array();
    for (const auto& i : r.instances) {
        json o = {{"label", i.label}, {"digest", i.digest}, {"dim", multinomial(i.weight.M)}};
        o["params"] = instance_json(i.params, i.weight);
        inst.push_back(o);
    }
    j["instances"] = inst;
    json suites = json::array();
    for (const auto& s : r.suites) suites.push_back(to_json(s));
    j["suites"] = suites;
    if (r.config.sweep) {
        json pts = json::array();
        for (const auto& p : r.sweep) {
            json sj = json::array();
            for (const auto& s : p.suites)
                sj.push_back(json{{"name", s.name}, {"passed", s.passed}, {"max_residual", s.max_residual},
                                  {"median_residual", s.median_residual}});
            pts.push_back(json{{"value", p.value}, {"suites", sj}});
        }
        j["sweep"] = json{{"parameter", r.config.sweep->parameter}, {"points", pts}};
    }
    return j;
}

/// Shortest round-trip decimal form, locale independent.
inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

/// One row per suite: name,passed,tolerance,instances,max_residual,median_residual.
inline std::string to_csv(const RunReport& r) {
    std::string out = "suite,passed,tolerance,instances,max_residual,median_residual\n";
    for (const auto& s : r.suites)
        out += s.name + "," + (s.passed ? "true" : "false") + "," + format_double(s.tolerance) + "," +
               std::to_string(s.instances) + "," + format_double(s.max_residual) + "," + format_double(s.median_residual) + "\n";
    return out;
}

inline std::string render(const RunReport& r, const std::string& format) {
    return format == "csv" ? to_csv(r) : to_json(r).dump(2) + "\n";
}

/// Writes `text` to a temporary sibling, then renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
        if (!o) throw Error(ErrorCode::Unsupported, "cannot write " + tmp.string());
        o << text;
        if (!o.flush()) throw Error(ErrorCode::Unsupported, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Two-column residual-vs-parameter CSV for one suite of a sweep. Returns std::nullopt (a notice
/// for the caller) when the report holds no sweep or the suite was not part of it.
inline std::optional<std::string> plot_data(const RunReport& r, const std::string& suite) {
    if (!r.config.sweep || r.sweep.empty()) return std::nullopt;
    std::string out = r.config.sweep->parameter + ",residual\n";
    bool found = false;
    for (const auto& p : r.sweep)
        for (const auto& s : p.suites)
            if (s.name == suite) {
                out += format_double(p.value) + "," + format_double(s.max_residual) + "\n";
                found = true;
            }
    if (!found) return std::nullopt;
    return out;
}

/// Writes the plot file. Returns false, writing nothing, when there is no sweep.
inline bool emit_plot_data(const RunReport& r, const std::string& suite, const std::filesystem::path& path) {
    const auto text = plot_data(r, suite);
    if (!text) return false;
    write_atomic(path, *text);
    return true;
}

}  // namespace kzcal::cli
