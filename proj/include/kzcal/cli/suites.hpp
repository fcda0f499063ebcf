#pragma once

// Verification suites over an instance set, and the orchestration that runs them.

#include "kzcal/cli/cache.hpp"
#include "kzcal/cli/config.hpp"
#include "kzcal/kzcal.hpp"

#include <atomic>
#include <chrono>
#include <thread>

namespace kzcal::cli {

struct InstanceRecord {
    std::string label;
    ModelParams params;
    WeightVector weight;
    std::string digest;
};

inline const char* kind_name(Kind k) { return k == Kind::Rational ? "rational" : "trigonometric"; }

inline json instance_json(const ModelParams& p, const WeightVector& w) {
    return json{{"kind", kind_name(p.kind)}, {"x", p.x},         {"g", p.g}, {"hbar", p.hbar},
                {"kappa", p.kappa},          {"gamma", p.gamma}, {"M", w.M}};
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Digest of the canonical JSON form of an instance.
inline std::string instance_digest(const ModelParams& p, const WeightVector& w) {
    return hex64(fnv1a(instance_json(p, w).dump()));
}

/// Explicit instances first, then the seeded random ones (rational block before trigonometric).
inline std::vector<InstanceRecord> build_instances(const RunConfig& c) {
    std::vector<InstanceRecord> out;
    for (std::size_t k = 0; k < c.explicit_instances.size(); ++k) {
        const auto& e = c.explicit_instances[k];
        out.push_back({"explicit-" + std::to_string(k), e.params, e.weight, instance_digest(e.params, e.weight)});
    }
    if (c.random) {
        const auto& r = *c.random;
        InstanceRanges ranges;
        ranges.n_min = r.n_lo;
        ranges.n_max = r.n_hi;
        ranges.N_min = r.N_lo;
        ranges.N_max = r.N_hi;
        ranges.kappa_min = r.kappa_lo;
        ranges.kappa_max = r.kappa_hi;
        ranges.hbar_min = r.hbar_lo;
        ranges.hbar_max = r.hbar_hi;
        ranges.gamma_min = r.gamma_lo;
        ranges.gamma_max = r.gamma_hi;
        ranges.max_dim = r.max_dim;
        ranges.min_part = r.min_part;
        std::vector<Kind> kinds;
        if (r.kind != "trigonometric") kinds.push_back(Kind::Rational);
        if (r.kind != "rational") kinds.push_back(Kind::Trigonometric);
        for (Kind kind : kinds)
            for (int k = 0; k < r.count; ++k) {
                CounterRng rng(*c.seed, {fnv1a("instance"), static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(k)});
                auto inst = random_instance(kind, ranges, rng);
                out.push_back({std::string(kind_name(kind)) + "-" + std::to_string(k), inst.params, inst.weight,
                               instance_digest(inst.params, inst.weight)});
            }
    }
    return out;
}

/// Copy of `p` with one parameter replaced. gamma only applies to the trigonometric kind.
inline ModelParams with_parameter(ModelParams p, const std::string& name, double value) {
    if (name == "gamma") {
        if (p.kind == Kind::Trigonometric) p.gamma = value;
    } else if (name == "hbar") {
        p.hbar = value;
    } else if (name == "kappa") {
        p.kappa = value;
    }
    return p;
}

/// Per-instance result of one suite.
struct Outcome {
    bool applicable = true;
    bool gating = true;  ///< false: reported only
    double residual = 0.0;
    std::string error;
    json detail = json::object();
};

inline Outcome not_applicable() {
    Outcome o;
    o.applicable = false;
    return o;
}

/// Errors that mean the machinery failed rather than a property.
class InfrastructureError : public Error {
public:
    explicit InfrastructureError(const std::string& what) : Error(ErrorCode::DegenerateSpectrum, what) {}
};

namespace suites {

inline Outcome identities(const ModelParams& p, const WeightVector& w, CounterRng& rng) {
    Outcome o;
    std::vector<IdentityResidual> all;
    auto append = [&](std::vector<IdentityResidual> v) { all.insert(all.end(), v.begin(), v.end()); };
    append(verify_rational_scalar_identities(p.x));
    append(verify_twist_sum_identities(p, w, rng, 4));
    append(verify_omega_weight_identity(p, w, rng, 4));
    append(verify_trig_identities(p, w, rng, 4));
    o.residual = max_scaled(all);
    for (const auto& r : all) o.detail[r.name] = r.skipped ? json(nullptr) : json(r.scaled);
    if (multinomial(w.M) <= 1000) {
        const auto t = verify_t_action_tables(p.n(), w);
        o.detail["t_tables_checked"] = t.checks;
        if (!t.ok()) {
            o.residual = std::numeric_limits<double>::infinity();
            o.error = "T-action case table mismatch";
        }
    }
    return o;
}

inline Outcome commutativity(const ModelParams& p, const WeightVector& w, CounterRng& rng) {
    const auto basis = make_basis(p.n(), w);
    Outcome o;
    o.residual = max_commutator_ratio(gaudin_family(p, basis), rng, 8);
    return o;
}

/// Rational: the symmetry d_i H_j = d_j H_i and the curvature hbar(d_i H_j - d_j H_i) - [H_i, H_j].
/// Trigonometric: same numbers, reported but not gating.
inline Outcome flatness(const ModelParams& p, const WeightVector& w, CounterRng& rng) {
    Outcome o;
    o.gating = p.kind == Kind::Rational;
    const auto basis = make_basis(p.n(), w);
    const auto H = gaudin_family(p, basis);
    double sym = 0.0, curv = 0.0;
    for (int i = 0; i < p.n(); ++i)
        for (int j = i + 1; j < p.n(); ++j) {
            const auto dij = gaudin_derivative(p, basis, j, i, 1);  // d/dx_i of H_j
            const auto dji = gaudin_derivative(p, basis, i, j, 1);  // d/dx_j of H_i
            const double scale = std::max(1.0, max_abs_entry(dij));
            sym = std::max(sym, max_abs_entry(dij - dji) / scale);
            const auto F = cplx{p.hbar} * (dij - dji) - (H[static_cast<std::size_t>(i)] * H[static_cast<std::size_t>(j)] -
                                                         H[static_cast<std::size_t>(j)] * H[static_cast<std::size_t>(i)]);
            curv = std::max(curv, sampled_norm(F, rng, 4) / scale);
        }
    o.residual = std::max(sym, curv);
    o.detail = json{{"symmetry", sym}, {"curvature", curv}};
    return o;
}

inline Outcome mc_h2(const ModelParams& p, const WeightVector& w, Kind want) {
    if (p.kind != want) return not_applicable();
    Outcome o;
    o.residual = h2_covector_residual(p, w);
    o.detail = json{{"energy", calogero_energy(w, p, 2)}};
    return o;
}

inline Outcome mc_h3(const ModelParams& p, const WeightVector& w) {
    if (p.kind != Kind::Rational) return not_applicable();
    Outcome o;
    o.residual = h3_covector_residual(p, w);
    o.detail = json{{"energy", calogero_energy(w, p, 3)}};
    return o;
}

inline Outcome momentum(const ModelParams& p, const WeightVector& w) {
    Outcome o;
    o.residual = momentum_covector_residual(p, w);
    o.detail = json{{"eigenvalue", momentum_eigenvalue(w, p)}};
    return o;
}

inline Outcome qc(const ModelParams& p, const WeightVector& w, Kind want, double tol, std::uint64_t seed) {
    if (p.kind != want) return not_applicable();
    Outcome o;
    const auto basis = make_basis(p.n(), w);
    std::vector<JointSpectrumItem> items;
    try {
        items = gaudin_joint_spectrum(materialized_family(p, basis), basis, p.kind == Kind::Rational, seed);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DegenerateSpectrum) throw InfrastructureError(e.what());
        throw;
    }
    double mismatch = 0.0, trace = 0.0, pair = 0.0;
    bool all = true;
    json first;
    for (std::size_t k = 0; k < items.size(); ++k) {
        const auto r = qc_check(items[k], p, w, tol);
        mismatch = std::max(mismatch, r.max_mismatch);
        trace = std::max(trace, r.max_trace_error);
        pair = std::max(pair, r.max_pair_distance);
        all = all && r.passed;
        if (k == 0) {
            std::vector<double> re;
            for (const auto& v : r.lax_eigenvalues) re.push_back(v.real());
            std::sort(re.begin(), re.end());
            first = re;
        }
    }
    o.residual = std::max(mismatch, trace);
    if (!all) o.error = "Lax spectrum does not match the prediction";
    o.detail = json{{"items", items.size()},
                    {"lax_spectrum", first},
                    {"predicted", predicted_lax_spectrum(w, p)},
                    {"max_mismatch", mismatch},
                    {"max_trace_error", trace},
                    {"max_pair_distance", pair}};
    if (p.kind == Kind::Trigonometric) {
        const double e = calogero_energy(w, p, 2);
        const double s = string_energy(w, p, 2);
        const double rel = std::abs(s - e) / std::max(1.0, std::abs(e));
        o.detail["string_energy_error"] = rel;
        o.residual = std::max(o.residual, rel);
    }
    return o;
}

/// Rectangle in (x_1, x_2) from a uniform state, plus the quadratic relation on the state at the far corner.
inline Outcome kz_integrate(const ModelParams& p, const WeightVector& w) {
    if (p.n() < 2) return not_applicable();
    Outcome o;
    KzConnection conn(p, w);
    const double d = 0.3 * min_pairwise_gap(p.x);
    auto a = p.x, b = p.x, c = p.x;
    a[0] += d;
    b[0] += d;
    b[1] += d;
    c[1] += d;
    PathSpec loop;
    loop.start = p.x;
    loop.waypoints = {a, b, c, p.x};
    loop.rtol = 1e-10;
    loop.atol = 1e-12;
    const auto phi0 = StateVector::uniform(conn.basis());
    std::optional<PathResult> res;
    try {
        res = integrate_path_detailed(phi0, loop, conn);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::IntegrationFailure) throw InfrastructureError(e.what());
        throw;
    }
    const auto& r = *res;
    const double loop_err = (r.state.amplitudes() - phi0.amplitudes()).norm() / phi0.amplitudes().norm();

    PathSpec half = loop;
    half.waypoints = {a, b};
    const auto at_b = integrate_path(phi0, half, conn);
    ModelParams pb = p;
    pb.x = b;
    KzConnection conn_b(pb, w);
    const StateVector state_b(conn_b.basis(), at_b.amplitudes());
    const auto rep = pde_residual_by_differences(state_b, conn_b);
    const auto alg = pde_residual_on_solution(state_b, conn_b, rep.relation);
    o.residual = std::max({loop_err, rep.residual, alg.residual});
    o.detail = json{{"loop_error", loop_err},
                    {"pde_residual", rep.residual},
                    {"pde_residual_covariant", alg.residual},
                    {"accepted_steps", r.accepted_steps},
                    {"rejected_steps", r.rejected_steps}};
    return o;
}

}  // namespace suites

inline Outcome run_suite_on(const std::string& suite, const ModelParams& p, const WeightVector& w, double tol,
                            std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng(seed, {fnv1a(suite), stream});
    if (suite == "identities") return suites::identities(p, w, rng);
    if (suite == "commutativity") return suites::commutativity(p, w, rng);
    if (suite == "flatness") return suites::flatness(p, w, rng);
    if (suite == "mc-h2") return suites::mc_h2(p, w, Kind::Rational);
    if (suite == "trig-mc") return suites::mc_h2(p, w, Kind::Trigonometric);
    if (suite == "mc-h3") return suites::mc_h3(p, w);
    if (suite == "momentum") return suites::momentum(p, w);
    if (suite == "qc-rational") return suites::qc(p, w, Kind::Rational, tol, rng());
    if (suite == "qc-trig") return suites::qc(p, w, Kind::Trigonometric, tol, rng());
    if (suite == "kz-integrate") return suites::kz_integrate(p, w);
    throw ConfigError("unknown suite \"" + suite + "\"");
}

/// Runs fn(k) for k in [0, count) on at most `jobs` threads. The first exception is rethrown.
template <class F>
void parallel_for(std::size_t count, int jobs, F&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || count <= 1) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(workers, count); ++t)
        pool.emplace_back([&] {
            for (;;) {
                const auto k = next.fetch_add(1);
                if (k >= count) return;
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard lock(m);
                    if (!failure) failure = std::current_exception();
                    next = count;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

struct SuiteStats {
    std::string name;
    double tolerance = 0.0;
    bool passed = true;
    std::size_t instances = 0;      ///< gating instances evaluated
    std::size_t not_applicable = 0;
    double max_residual = 0.0;
    double median_residual = 0.0;
    json failures = json::array();
    json exploratory = json::array();
    json details = json::array();
    double wall_time_s = 0.0;
};

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// One suite over all instances (with an optional parameter override).
inline SuiteStats run_suite(const std::string& suite, const std::vector<InstanceRecord>& instances, const RunConfig& c,
                            const std::optional<std::pair<std::string, double>>& override_param = {},
                            std::uint64_t sweep_index = 0) {
    SuiteStats s;
    s.name = suite;
    s.tolerance = c.tolerance(suite);
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Outcome> outs(instances.size());
    const std::uint64_t seed = c.seed.value_or(0);
    parallel_for(instances.size(), c.jobs, [&](std::size_t k) {
        const auto& inst = instances[k];
        const auto p = override_param ? with_parameter(inst.params, override_param->first, override_param->second) : inst.params;
        try {
            outs[k] = run_suite_on(suite, p, inst.weight, s.tolerance, seed, (sweep_index << 32) | k);
        } catch (const InfrastructureError&) {
            throw;
        } catch (const Error& e) {
            Outcome o;
            o.residual = std::numeric_limits<double>::infinity();
            o.error = std::string(to_string(e.code())) + ": " + e.what();
            outs[k] = std::move(o);
        }
    });
    std::vector<double> residuals;
    for (std::size_t k = 0; k < outs.size(); ++k) {
        const auto& o = outs[k];
        if (!o.applicable) {
            ++s.not_applicable;
            continue;
        }
        json d = {{"instance", instances[k].digest}, {"label", instances[k].label}, {"residual", o.residual}};
        if (!o.detail.empty()) d["detail"] = o.detail;
        if (!o.gating) {
            s.exploratory.push_back(d);
            continue;
        }
        ++s.instances;
        residuals.push_back(o.residual);
        const bool ok = o.error.empty() && o.residual < s.tolerance;
        if (!ok) {
            s.passed = false;
            json f = {{"instance", instances[k].digest}, {"label", instances[k].label}, {"residual", o.residual}};
            if (!o.error.empty()) f["error"] = o.error;
            s.failures.push_back(f);
        }
        s.details.push_back(d);
    }
    if (!residuals.empty()) {
        s.max_residual = *std::max_element(residuals.begin(), residuals.end());
        s.median_residual = median(residuals);
    }
    s.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

struct SweepPoint {
    double value = 0.0;
    std::vector<SuiteStats> suites;
};

struct RunReport {
    RunConfig config;
    std::vector<InstanceRecord> instances;
    std::vector<SuiteStats> suites;
    std::vector<SweepPoint> sweep;
    bool passed = true;
};

inline RunReport run_suites(const RunConfig& c) {
    RunReport r;
    r.config = c;
    r.instances = build_instances(c);
    for (const auto& s : c.suites) {
        r.suites.push_back(run_suite(s, r.instances, c));
        r.passed = r.passed && r.suites.back().passed;
    }
    if (c.sweep) {
        for (std::size_t v = 0; v < c.sweep->values.size(); ++v) {
            SweepPoint pt;
            pt.value = c.sweep->values[v];
            for (const auto& s : c.suites) {
                pt.suites.push_back(run_suite(s, r.instances, c, std::make_pair(c.sweep->parameter, pt.value), v + 1));
                r.passed = r.passed && pt.suites.back().passed;
            }
            r.sweep.push_back(std::move(pt));
        }
    }
    return r;
}

}  // namespace kzcal::cli
