#pragma once

// Run configuration: JSON schema, defaults and validation.

#include "kzcal/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace kzcal::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "1.0.0";

inline const std::vector<std::string>& known_suites() {
    static const std::vector<std::string> s{"identities", "commutativity", "flatness", "mc-h2",     "mc-h3",
                                            "momentum",   "trig-mc",       "qc-rational", "qc-trig", "kz-integrate"};
    return s;
}

inline double default_tolerance(const std::string& suite) {
    static const std::map<std::string, double> t{
        {"identities", 1e-11}, {"commutativity", 1e-12}, {"flatness", 1e-8}, {"mc-h2", 1e-11}, {"mc-h3", 1e-10},
        {"momentum", 1e-12},   {"trig-mc", 1e-11},       {"qc-rational", 1e-8}, {"qc-trig", 1e-7}, {"kz-integrate", 1e-8}};
    const auto it = t.find(suite);
    return it == t.end() ? 1e-10 : it->second;
}

/// A fixed instance given in the config.
struct ExplicitInstance {
    ModelParams params;
    WeightVector weight;
};

/// Ranges for seeded random instances.
struct RandomSpec {
    std::string kind = "both";  ///< rational | trigonometric | both
    int n_lo = 2, n_hi = 6;
    int N_lo = 2, N_hi = 3;
    int count = 10;
    double kappa_lo = 0.1, kappa_hi = 1.0;
    double hbar_lo = 0.5, hbar_hi = 1.5;
    double gamma_lo = 0.2, gamma_hi = 1.0;
    std::size_t max_dim = 400;
    int min_part = 0;
};

struct Sweep {
    std::string parameter;  ///< gamma | hbar | kappa
    std::vector<double> values;
};

struct RunConfig {
    std::vector<std::string> suites;
    std::optional<std::uint64_t> seed;
    std::vector<ExplicitInstance> explicit_instances;
    std::optional<RandomSpec> random;
    std::map<std::string, double> tolerances;  ///< every selected suite, defaults filled
    std::optional<Sweep> sweep;
    double epsilon_x = kDefaultEpsilonX;
    double tolerance_scale = 1.0;
    int jobs = 1;
    std::string report_path;  ///< empty: stdout
    std::string plot_path;    ///< empty: no plot data
    std::string format = "json";

    double tolerance(const std::string& suite) const {
        const auto it = tolerances.find(suite);
        return (it == tolerances.end() ? default_tolerance(suite) : it->second) * tolerance_scale;
    }
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCode::Config, what) {}
};

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError("missing required field \"" + path + key + "\"");
    return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("field \"" + path + "\" has the wrong type");
    }
}

inline std::vector<double> get_reals(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError("field \"" + path + "\" must be an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (!j[k].is_number()) throw ConfigError("field \"" + path + "[" + std::to_string(k) + "]\" must be a number");
        out.push_back(j[k].get<double>());
    }
    return out;
}

/// An integer or a [lo, hi] pair.
inline void get_int_range(const json& j, const std::string& path, int& lo, int& hi) {
    if (j.is_number_integer()) {
        lo = hi = j.get<int>();
    } else if (j.is_array() && j.size() == 2 && j[0].is_number_integer() && j[1].is_number_integer()) {
        lo = j[0].get<int>();
        hi = j[1].get<int>();
    } else {
        throw ConfigError("field \"" + path + "\" must be an integer or a [lo, hi] pair");
    }
    if (lo > hi) throw ConfigError("field \"" + path + "\" has lo > hi");
}

inline void get_real_range(const json& j, const std::string& path, double& lo, double& hi) {
    if (j.is_number()) {
        lo = hi = j.get<double>();
    } else if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        lo = j[0].get<double>();
        hi = j[1].get<double>();
    } else {
        throw ConfigError("field \"" + path + "\" must be a number or a [lo, hi] pair");
    }
    if (lo > hi) throw ConfigError("field \"" + path + "\" has lo > hi");
}

inline Kind parse_kind(const json& j, const std::string& path) {
    const auto s = get_as<std::string>(j, path);
    if (s == "rational") return Kind::Rational;
    if (s == "trigonometric" || s == "trig") return Kind::Trigonometric;
    throw ConfigError("field \"" + path + "\" must be \"rational\" or \"trigonometric\"");
}

inline ExplicitInstance parse_explicit(const json& j, const std::string& path, double epsilon_x) {
    if (!j.is_object()) throw ConfigError("field \"" + path + "\" must be an object");
    ExplicitInstance e;
    auto& p = e.params;
    p.kind = j.contains("kind") ? parse_kind(j["kind"], path + ".kind") : Kind::Rational;
    p.x = get_reals(require(j, "x", path + "."), path + ".x");
    p.g = get_reals(require(j, "g", path + "."), path + ".g");
    if (j.contains("hbar")) p.hbar = get_as<double>(j["hbar"], path + ".hbar");
    if (j.contains("kappa")) p.kappa = get_as<double>(j["kappa"], path + ".kappa");
    if (j.contains("gamma")) p.gamma = get_as<double>(j["gamma"], path + ".gamma");
    e.weight.M = get_as<std::vector<int>>(require(j, "M", path + "."), path + ".M");
    try {
        validate(p, ValidationOptions{epsilon_x, true});
        check_weight(p.n(), e.weight);
        if (e.weight.N() != p.N()) throw Error(ErrorCode::InvalidWeight, "M must have one entry per twist");
    } catch (const Error& err) {
        throw ConfigError("field \"" + path + "\": " + err.what());
    }
    return e;
}

}  // namespace detail

/// Validates a parsed JSON document and fills defaults. A seed override (from the command
/// line) replaces the document's seed and satisfies the seed requirement.
inline RunConfig parse_config(const json& j, std::optional<std::uint64_t> seed_override = {}) {
    if (!j.is_object()) throw ConfigError("config root must be an object");
    static const std::set<std::string> allowed{"suites", "seed",     "instance",        "tolerances", "sweep",
                                               "epsilon_x", "jobs",  "tolerance_scale", "output",     "format"};
    for (const auto& [k, v] : j.items())
        if (!allowed.contains(k)) throw ConfigError("unknown field \"" + k + "\"");

    RunConfig c;
    const auto& suites = detail::require(j, "suites", "");
    if (!suites.is_array() || suites.empty()) throw ConfigError("field \"suites\" must be a non-empty array");
    for (std::size_t k = 0; k < suites.size(); ++k) {
        const auto s = detail::get_as<std::string>(suites[k], "suites[" + std::to_string(k) + "]");
        if (std::find(known_suites().begin(), known_suites().end(), s) == known_suites().end())
            throw ConfigError("field \"suites[" + std::to_string(k) + "]\" names unknown suite \"" + s + "\"");
        if (std::find(c.suites.begin(), c.suites.end(), s) == c.suites.end()) c.suites.push_back(s);
    }
    if (j.contains("seed")) {
        const auto& sd = j["seed"];
        if (!sd.is_number_unsigned() && !(sd.is_number_integer() && sd.get<std::int64_t>() >= 0)) throw ConfigError("field \"seed\" must be a non-negative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (seed_override) c.seed = seed_override;
    if (j.contains("epsilon_x")) {
        c.epsilon_x = detail::get_as<double>(j["epsilon_x"], "epsilon_x");
        if (!(c.epsilon_x > 0.0)) throw ConfigError("field \"epsilon_x\" must be positive");
    }
    if (j.contains("jobs")) {
        c.jobs = detail::get_as<int>(j["jobs"], "jobs");
        if (c.jobs < 1) throw ConfigError("field \"jobs\" must be >= 1");
    }
    if (j.contains("tolerance_scale")) {
        c.tolerance_scale = detail::get_as<double>(j["tolerance_scale"], "tolerance_scale");
        if (!(c.tolerance_scale > 0.0)) throw ConfigError("field \"tolerance_scale\" must be positive");
    }
    if (j.contains("format")) {
        c.format = detail::get_as<std::string>(j["format"], "format");
        if (c.format != "json" && c.format != "csv") throw ConfigError("field \"format\" must be \"json\" or \"csv\"");
    }
    if (j.contains("output")) {
        const auto& o = j["output"];
        if (!o.is_object()) throw ConfigError("field \"output\" must be an object");
        if (o.contains("report")) c.report_path = detail::get_as<std::string>(o["report"], "output.report");
        if (o.contains("plot")) c.plot_path = detail::get_as<std::string>(o["plot"], "output.plot");
    }

    const auto& inst = detail::require(j, "instance", "");
    if (!inst.is_object()) throw ConfigError("field \"instance\" must be an object");
    if (!inst.contains("explicit") && !inst.contains("random"))
        throw ConfigError("field \"instance\" needs \"explicit\" or \"random\"");
    if (inst.contains("explicit")) {
        const auto& e = inst["explicit"];
        if (e.is_array()) {
            for (std::size_t k = 0; k < e.size(); ++k)
                c.explicit_instances.push_back(
                    detail::parse_explicit(e[k], "instance.explicit[" + std::to_string(k) + "]", c.epsilon_x));
        } else {
            c.explicit_instances.push_back(detail::parse_explicit(e, "instance.explicit", c.epsilon_x));
        }
    }
    if (inst.contains("random")) {
        const auto& r = inst["random"];
        if (!r.is_object()) throw ConfigError("field \"instance.random\" must be an object");
        RandomSpec s;
        if (r.contains("kind")) {
            s.kind = detail::get_as<std::string>(r["kind"], "instance.random.kind");
            if (s.kind == "trig") s.kind = "trigonometric";
            if (s.kind != "rational" && s.kind != "trigonometric" && s.kind != "both")
                throw ConfigError("field \"instance.random.kind\" must be rational, trigonometric or both");
        }
        if (r.contains("n")) detail::get_int_range(r["n"], "instance.random.n", s.n_lo, s.n_hi);
        if (r.contains("N")) detail::get_int_range(r["N"], "instance.random.N", s.N_lo, s.N_hi);
        if (r.contains("count")) s.count = detail::get_as<int>(r["count"], "instance.random.count");
        if (r.contains("kappa")) detail::get_real_range(r["kappa"], "instance.random.kappa", s.kappa_lo, s.kappa_hi);
        if (r.contains("hbar")) detail::get_real_range(r["hbar"], "instance.random.hbar", s.hbar_lo, s.hbar_hi);
        if (r.contains("gamma")) detail::get_real_range(r["gamma"], "instance.random.gamma", s.gamma_lo, s.gamma_hi);
        if (r.contains("max_dim")) s.max_dim = detail::get_as<std::size_t>(r["max_dim"], "instance.random.max_dim");
        if (r.contains("min_part")) s.min_part = detail::get_as<int>(r["min_part"], "instance.random.min_part");
        if (s.n_lo < 1 || s.n_hi > static_cast<int>(kMaxSites)) throw ConfigError("field \"instance.random.n\" out of range");
        if (s.N_lo < 1) throw ConfigError("field \"instance.random.N\" must be >= 1");
        if (s.count < 1) throw ConfigError("field \"instance.random.count\" must be >= 1");
        if (!c.seed) throw ConfigError("missing required field \"seed\" (randomized instances need a seed)");
        c.random = s;
    }

    if (j.contains("tolerances")) {
        const auto& t = j["tolerances"];
        if (!t.is_object()) throw ConfigError("field \"tolerances\" must be an object");
        for (const auto& [k, v] : t.items()) {
            if (std::find(known_suites().begin(), known_suites().end(), k) == known_suites().end())
                throw ConfigError("field \"tolerances." + k + "\" names unknown suite");
            if (!v.is_number() || !(v.get<double>() > 0.0))
                throw ConfigError("field \"tolerances." + k + "\" must be a positive number");
            c.tolerances[k] = v.get<double>();
        }
    }
    for (const auto& s : c.suites)
        if (!c.tolerances.contains(s)) c.tolerances[s] = default_tolerance(s);

    if (j.contains("sweep")) {
        const auto& sw = j["sweep"];
        if (!sw.is_object()) throw ConfigError("field \"sweep\" must be an object");
        Sweep s;
        s.parameter = detail::get_as<std::string>(detail::require(sw, "parameter", "sweep."), "sweep.parameter");
        if (s.parameter != "gamma" && s.parameter != "hbar" && s.parameter != "kappa")
            throw ConfigError("field \"sweep.parameter\" must be gamma, hbar or kappa");
        s.values = detail::get_reals(detail::require(sw, "values", "sweep."), "sweep.values");
        if (s.values.empty()) throw ConfigError("field \"sweep.values\" must be non-empty");
        c.sweep = s;
    }
    return c;
}

/// Reads and validates a config file. Parse errors carry line and column.
inline RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t k = 0; k < std::min(e.byte, text.size() + 1) && k + 1 < e.byte; ++k) {
            if (text[k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError("parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
    }
    return parse_config(j, seed_override);
}

/// Canonical echo of the config with every default filled.
inline json to_json(const RunConfig& c) {
    json j;
    j["suites"] = c.suites;
    if (c.seed) j["seed"] = *c.seed;
    json inst = json::object();
    if (!c.explicit_instances.empty()) {
        json arr = json::array();
        for (const auto& e : c.explicit_instances) {
            json o;
            o["kind"] = e.params.kind == Kind::Rational ? "rational" : "trigonometric";
            o["x"] = e.params.x;
            o["g"] = e.params.g;
            o["hbar"] = e.params.hbar;
            o["kappa"] = e.params.kappa;
            o["gamma"] = e.params.gamma;
            o["M"] = e.weight.M;
            arr.push_back(o);
        }
        inst["explicit"] = arr;
    }
    if (c.random) {
        const auto& r = *c.random;
        inst["random"] = json{{"kind", r.kind},
                              {"n", {r.n_lo, r.n_hi}},
                              {"N", {r.N_lo, r.N_hi}},
                              {"count", r.count},
                              {"kappa", {r.kappa_lo, r.kappa_hi}},
                              {"hbar", {r.hbar_lo, r.hbar_hi}},
                              {"gamma", {r.gamma_lo, r.gamma_hi}},
                              {"max_dim", r.max_dim},
                              {"min_part", r.min_part}};
    }
    j["instance"] = inst;
    json tol = json::object();
    for (const auto& s : c.suites) tol[s] = c.tolerances.at(s);
    j["tolerances"] = tol;
    if (c.sweep) j["sweep"] = json{{"parameter", c.sweep->parameter}, {"values", c.sweep->values}};
    j["epsilon_x"] = c.epsilon_x;
    j["tolerance_scale"] = c.tolerance_scale;
    j["format"] = c.format;
    return j;
}

}  // namespace kzcal::cli
