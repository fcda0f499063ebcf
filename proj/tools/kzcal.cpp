// kzcal: run verification suites, dump joint spectra, run the quantum-classical
// check or a KZ path demo, all driven by a JSON config.
//
// Exit codes: 0 all pass, 1 a suite failed, 2 infrastructure error, 3 config error.

#include "kzcal/cli/report.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace kzcal;
using namespace kzcal::cli;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitInfra = 2;
constexpr int kExitConfig = 3;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format;
    std::optional<int> jobs;
    std::optional<double> tolerance_scale;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "seed, overrides the config");
    sub->add_option("--out", c.out, "output file (default: stdout)");
    sub->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--tolerance-scale", c.tolerance_scale, "multiplies every suite tolerance")->check(CLI::PositiveNumber);
}

RunConfig resolve(const Common& c) {
    auto cfg = load_config(c.config, c.seed);
    if (!c.format.empty()) cfg.format = c.format;
    if (c.jobs) cfg.jobs = *c.jobs;
    if (c.tolerance_scale) cfg.tolerance_scale *= *c.tolerance_scale;
    if (!c.out.empty()) cfg.report_path = c.out;
    return cfg;
}

void emit(const RunConfig& cfg, const std::string& text) {
    if (cfg.report_path.empty()) std::cout << text;
    else write_atomic(cfg.report_path, text);
}

json complex_json(cplx v) { return json::array({v.real(), v.imag()}); }

int cmd_verify(const Common& c, const std::string& plot_suite) {
    const auto cfg = resolve(c);
    const auto report = run_suites(cfg);
    emit(cfg, render(report, cfg.format));
    if (!cfg.plot_path.empty()) {
        const auto suite = plot_suite.empty() ? cfg.suites.front() : plot_suite;
        if (!emit_plot_data(report, suite, cfg.plot_path))
            std::cerr << "notice: no parameter sweep for suite " << suite << "; no plot data written\n";
    }
    for (const auto& s : report.suites)
        std::cerr << (s.passed ? "PASS " : "FAIL ") << s.name << " max=" << s.max_residual << " tol=" << s.tolerance << "\n";
    return report.passed ? kExitPass : kExitFail;
}

int cmd_spectrum(const Common& c) {
    const auto cfg = resolve(c);
    const auto instances = build_instances(cfg);
    json out = json::array();
    std::string csv = "instance,item,site,p_re,p_im,residual\n";
    for (std::size_t k = 0; k < instances.size(); ++k) {
        const auto& inst = instances[k];
        const auto basis = make_basis(inst.params.n(), inst.weight);
        CounterRng rng(cfg.seed.value_or(0), {fnv1a("spectrum"), k});
        const auto items = gaudin_joint_spectrum(materialized_family(inst.params, basis), basis,
                                                 inst.params.kind == Kind::Rational, rng());
        json arr = json::array();
        for (std::size_t m = 0; m < items.size(); ++m) {
            json p = json::array();
            for (std::size_t i = 0; i < items[m].p.size(); ++i) {
                p.push_back(complex_json(items[m].p[i]));
                csv += inst.digest + "," + std::to_string(m) + "," + std::to_string(i + 1) + "," +
                       format_double(items[m].p[i].real()) + "," + format_double(items[m].p[i].imag()) + "," +
                       format_double(items[m].residuals[i]) + "\n";
            }
            arr.push_back(json{{"p", p}, {"max_residual", *std::max_element(items[m].residuals.begin(), items[m].residuals.end())}});
        }
        out.push_back(json{{"instance", inst.digest}, {"label", inst.label}, {"dim", basis->dim()}, {"items", arr}});
    }
    emit(cfg, cfg.format == "csv" ? csv : out.dump(2) + "\n");
    return kExitPass;
}

int cmd_qc(const Common& c) {
    const auto cfg = resolve(c);
    const auto instances = build_instances(cfg);
    json out = json::array();
    std::string csv = "instance,items,max_mismatch,max_trace_error,passed\n";
    bool all = true;
    for (std::size_t k = 0; k < instances.size(); ++k) {
        const auto& inst = instances[k];
        const auto basis = make_basis(inst.params.n(), inst.weight);
        CounterRng rng(cfg.seed.value_or(0), {fnv1a("qc"), k});
        const auto items = gaudin_joint_spectrum(materialized_family(inst.params, basis), basis,
                                                 inst.params.kind == Kind::Rational, rng());
        const double tol = cfg.tolerance(inst.params.kind == Kind::Rational ? "qc-rational" : "qc-trig");
        double mm = 0.0, tr = 0.0;
        bool ok = true;
        json lax = json::array();
        for (const auto& item : items) {
            const auto r = qc_check(item, inst.params, inst.weight, tol);
            mm = std::max(mm, r.max_mismatch);
            tr = std::max(tr, r.max_trace_error);
            ok = ok && r.passed;
            json ev = json::array();
            for (auto v : r.lax_eigenvalues) ev.push_back(complex_json(v));
            lax.push_back(ev);
        }
        all = all && ok;
        out.push_back(json{{"instance", inst.digest},
                           {"label", inst.label},
                           {"predicted", predicted_lax_spectrum(inst.weight, inst.params)},
                           {"lax_eigenvalues", lax},
                           {"max_mismatch", mm},
                           {"max_trace_error", tr},
                           {"passed", ok}});
        csv += inst.digest + "," + std::to_string(items.size()) + "," + format_double(mm) + "," + format_double(tr) + "," +
               (ok ? "true" : "false") + "\n";
    }
    emit(cfg, cfg.format == "csv" ? csv : out.dump(2) + "\n");
    return all ? kExitPass : kExitFail;
}

int cmd_integrate(const Common& c) {
    const auto cfg = resolve(c);
    const auto instances = build_instances(cfg);
    json out = json::array();
    std::string csv = "instance,loop_error,pde_residual,accepted_steps\n";
    bool all = true;
    const double tol = cfg.tolerance("kz-integrate");
    for (const auto& inst : instances) {
        const auto o = suites::kz_integrate(inst.params, inst.weight);
        if (!o.applicable) continue;
        const bool ok = o.residual < tol;
        all = all && ok;
        json d = o.detail;
        out.push_back(json{{"instance", inst.digest}, {"label", inst.label}, {"result", d}, {"passed", ok}});
        csv += inst.digest + "," + format_double(d["loop_error"].get<double>()) + "," +
               format_double(d["pde_residual"].get<double>()) + "," + std::to_string(d["accepted_steps"].get<std::size_t>()) + "\n";
    }
    emit(cfg, cfg.format == "csv" ? csv : out.dump(2) + "\n");
    return all ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KZ / Calogero correspondence verifier"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    Common verify_opts, spectrum_opts, qc_opts, integrate_opts;
    std::string plot_suite;
    auto* verify = app.add_subcommand("verify", "run the configured verification suites");
    add_common(verify, verify_opts);
    verify->add_option("--plot-suite", plot_suite, "suite whose sweep goes to output.plot (default: first suite)");
    auto* spectrum = app.add_subcommand("spectrum", "dump the Gaudin joint spectrum of each instance");
    add_common(spectrum, spectrum_opts);
    auto* qc = app.add_subcommand("qc", "compare Lax spectra at joint eigenvalues with the prediction");
    add_common(qc, qc_opts);
    auto* integrate = app.add_subcommand("integrate", "integrate the KZ system around a closed loop");
    add_common(integrate, integrate_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*verify) return cmd_verify(verify_opts, plot_suite);
        if (*spectrum) return cmd_spectrum(spectrum_opts);
        if (*qc) return cmd_qc(qc_opts);
        if (*integrate) return cmd_integrate(integrate_opts);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
        return kExitInfra;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfra;
    }
    return kExitInfra;
}
