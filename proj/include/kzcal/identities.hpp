#pragma once

// Auxiliary identities behind the Calogero eigen-relations, each checked on
// its own. Residuals come in two flavours: raw, and scaled by the largest
// summand so that cancellation shows up instead of hiding in a small total.

#include "kzcal/operators.hpp"

#include <map>
#include <optional>
#include <string>

namespace kzcal {

struct IdentityResidual {
    std::string name;
    double raw = 0.0;
    double scaled = 0.0;
    bool skipped = false;
    std::string note;
};

inline double max_scaled(const std::vector<IdentityResidual>& rs) {
    double m = 0.0;
    for (const auto& r : rs)
        if (!r.skipped) m = std::max(m, r.scaled);
    return m;
}

namespace detail {

inline IdentityResidual finish(std::string name, double sum, double biggest) {
    IdentityResidual r{std::move(name), std::abs(sum), 0.0, false, {}};
    r.scaled = biggest > 0.0 ? r.raw / biggest : r.raw;
    return r;
}

inline IdentityResidual skipped(std::string name, std::string note) {
    return IdentityResidual{std::move(name), 0.0, 0.0, true, std::move(note)};
}

}  // namespace detail

/// sum over distinct (i,j,l) of 1/((x_i-x_j)(x_i-x_l)) = 0, and the four-index
/// analogue sum' 1/((x_i-x_j)(x_i-x_k)(x_i-x_l)) = 0.
inline std::vector<IdentityResidual> verify_rational_scalar_identities(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    std::vector<IdentityResidual> out;
    if (n < 3) {
        out.push_back(detail::skipped("pair_product_sum", "needs n >= 3; the sum is empty and equals 0"));
    } else {
        double s = 0.0, big = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l) {
                    if (i == j || i == l || j == l) continue;
                    const double t = 1.0 / ((x[i] - x[j]) * (x[i] - x[l]));
                    s += t;
                    big = std::max(big, std::abs(t));
                }
        out.push_back(detail::finish("pair_product_sum", s, big));
    }
    if (n < 4) {
        out.push_back(detail::skipped("triple_product_sum", "needs n >= 4; the sum is empty and equals 0"));
    } else {
        double s = 0.0, big = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) {
                        if (i == j || i == k || i == l || j == k || j == l || k == l) continue;
                        const double t = 1.0 / ((x[i] - x[j]) * (x[i] - x[k]) * (x[i] - x[l]));
                        s += t;
                        big = std::max(big, std::abs(t));
                    }
        out.push_back(detail::finish("triple_product_sum", s, big));
    }
    return out;
}

namespace detail {

/// max over random v of ||A v|| / ||v||, divided by `scale`.
inline IdentityResidual operator_zero(std::string name, const LinearOperator& a, double scale, CounterRng& rng, int samples) {
    const double r = sampled_norm(a, rng, samples);
    IdentityResidual out{std::move(name), r, scale > 0.0 ? r / scale : r, false, {}};
    return out;
}

inline double max_abs_twist(const ModelParams& p) {
    double m = 0.0;
    for (double v : p.g) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace detail

/// sum_{i != j} (g^(i) + g^(j)) / (x_i - x_j) = 0, the coth analogue (needs gamma > 0), and
/// sum' (g^(i) + g^(j) + g^(k)) / ((x_i - x_j)(x_i - x_k)) = 0, as operators on random states.
inline std::vector<IdentityResidual> verify_twist_sum_identities(const ModelParams& params, const WeightVector& weight,
                                                                 CounterRng& rng, int samples = 8) {
    const auto basis = make_basis(params.n(), weight);
    check_instance(params, *basis);
    const int n = params.n();
    const auto& x = params.x;
    const double gmax = detail::max_abs_twist(params);
    std::vector<LinearOperator> tw;
    for (int i = 0; i < n; ++i) tw.push_back(twist_operator(basis, i, params.g));

    std::vector<IdentityResidual> out;
    auto zero = LinearOperator::scalar(basis, 0.0);
    {
        auto a = zero;
        double big = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) {
                    const double c = 1.0 / (x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]);
                    a = a + cplx{c} * (tw[static_cast<std::size_t>(i)] + tw[static_cast<std::size_t>(j)]);
                    big = std::max(big, 2.0 * gmax * std::abs(c));
                }
        out.push_back(detail::operator_zero("twist_pair_sum", a, big, rng, samples));
    }
    if (params.gamma > 0.0) {
        auto a = zero;
        double big = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) {
                    const double c = 1.0 / std::tanh(params.gamma * (x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]));
                    a = a + cplx{c} * (tw[static_cast<std::size_t>(i)] + tw[static_cast<std::size_t>(j)]);
                    big = std::max(big, 2.0 * gmax * std::abs(c));
                }
        out.push_back(detail::operator_zero("twist_coth_sum", a, big, rng, samples));
    } else {
        out.push_back(detail::skipped("twist_coth_sum", "needs gamma > 0"));
    }
    if (n >= 3) {
        auto a = zero;
        double big = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    if (i == j || i == k || j == k) continue;
                    const double c = 1.0 / ((x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]) *
                                            (x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(k)]));
                    a = a + cplx{c} * (tw[static_cast<std::size_t>(i)] + tw[static_cast<std::size_t>(j)] + tw[static_cast<std::size_t>(k)]);
                    big = std::max(big, 3.0 * gmax * std::abs(c));
                }
        out.push_back(detail::operator_zero("twist_triple_sum", a, big, rng, samples));
    } else {
        out.push_back(detail::skipped("twist_triple_sum", "needs n >= 3"));
    }
    return out;
}

/// sum_i <Omega|(g^(i))^k|Phi> = (sum_a M_a g_a^k) Psi for k = 2 (and the cubic analogue k = 3).
inline std::vector<IdentityResidual> verify_omega_weight_identity(const ModelParams& params, const WeightVector& weight,
                                                                  CounterRng& rng, int samples = 8) {
    const auto basis = make_basis(params.n(), weight);
    check_instance(params, *basis);
    std::vector<IdentityResidual> out;
    for (int k : {2, 3}) {
        std::vector<double> gk(params.g.size());
        double e = 0.0;
        for (std::size_t a = 0; a < gk.size(); ++a) {
            gk[a] = std::pow(params.g[a], k);
            e += weight.M[a] * gk[a];
        }
        double worst_raw = 0.0, worst_scaled = 0.0;
        for (int s = 0; s < samples; ++s) {
            const auto phi = random_state(basis, rng);
            cplx lhs{};
            for (int i = 0; i < params.n(); ++i) lhs += omega_pairing(site_diagonal_operator(basis, i, gk).apply(phi));
            const double raw = std::abs(lhs - e * omega_pairing(phi));
            double scale = 0.0;
            for (std::size_t a = 0; a < gk.size(); ++a) scale += weight.M[a] * std::abs(gk[a]);
            scale *= phi.amplitudes().cwiseAbs().sum();
            worst_raw = std::max(worst_raw, raw);
            worst_scaled = std::max(worst_scaled, scale > 0.0 ? raw / scale : raw);
        }
        out.push_back(IdentityResidual{k == 2 ? "omega_twist_square" : "omega_twist_cube", worst_raw, worst_scaled, false, {}});
    }
    return out;
}

/// Trigonometric identities: the coth triple sum and its three-point addition formula (need
/// gamma > 0), the mixed twist/T anticommutator, and the Omega-projected T^2 and T T sums.
inline std::vector<IdentityResidual> verify_trig_identities(const ModelParams& params, const WeightVector& weight,
                                                            CounterRng& rng, int samples = 8) {
    const auto basis = make_basis(params.n(), weight);
    check_instance(params, *basis);
    const int n = params.n();
    const auto& x = params.x;
    std::vector<IdentityResidual> out;

    if (params.gamma > 0.0 && n >= 3) {
        auto cth = [&](int i, int j) {
            return 1.0 / std::tanh(params.gamma * (x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]));
        };
        double s = 0.0, big = 0.0, three_point = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l) {
                    if (i == j || i == l || j == l) continue;
                    const double t = cth(i, j) * cth(i, l);
                    s += t;
                    big = std::max(big, std::abs(t));
                    const double f = cth(i, j) * cth(i, l) + cth(i, j) * cth(l, j) + cth(i, l) * cth(j, l) - 1.0;
                    const double fscale = std::max({1.0, std::abs(cth(i, j) * cth(i, l)), std::abs(cth(i, j) * cth(l, j)),
                                                    std::abs(cth(i, l) * cth(j, l))});
                    three_point = std::max(three_point, std::abs(f) / fscale);
                }
        const double rhs = n * (n - 1.0) * (n - 2.0) / 3.0;
        out.push_back(detail::finish("coth_triple_sum", s - rhs, std::max(big, 1.0)));
        out.push_back(IdentityResidual{"coth_three_point", three_point, three_point, false, {}});
    } else {
        out.push_back(detail::skipped("coth_triple_sum", "needs gamma > 0 and n >= 3"));
        out.push_back(detail::skipped("coth_three_point", "needs gamma > 0 and n >= 3"));
    }

    if (n >= 2) {
        double worst = 0.0, worst_raw = 0.0;
        const double gmax = detail::max_abs_twist(params);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const auto dg = twist_operator(basis, i, params.g) - twist_operator(basis, j, params.g);
                const auto t = t_operator(basis, i, j);
                const auto a = dg * t + t * dg;
                const double r = sampled_norm(a, rng, samples);
                worst_raw = std::max(worst_raw, r);
                worst = std::max(worst, gmax > 0.0 ? r / (2.0 * gmax) : r);
            }
        out.push_back(IdentityResidual{"twist_t_anticommutator", worst_raw, worst, false, {}});
    } else {
        out.push_back(detail::skipped("twist_t_anticommutator", "needs n >= 2"));
    }

    double sum_mm1 = 0.0, sum_mm1m2 = 0.0;
    for (int m : weight.M) {
        sum_mm1 += m * (m - 1.0);
        sum_mm1m2 += m * (m - 1.0) * (m - 2.0);
    }
    auto omega_check = [&](std::string name, const std::optional<LinearOperator>& a, double coeff) {
        if (!a) {
            out.push_back(detail::finish(std::move(name), 0.0, 1.0));
            return;
        }
        const Eigen::RowVectorXcd row = a->omega_covector();
        double worst = 0.0, worst_raw = 0.0;
        for (int s = 0; s < samples; ++s) {
            const auto phi = random_state(basis, rng);
            const cplx lhs = row * phi.amplitudes();
            const double raw = std::abs(lhs - coeff * omega_pairing(phi));
            worst_raw = std::max(worst_raw, raw);
            worst = std::max(worst, raw / (std::max(1.0, std::abs(coeff)) * phi.amplitudes().cwiseAbs().sum()));
        }
        out.push_back(IdentityResidual{std::move(name), worst_raw, worst, false, {}});
    };

    {
        std::optional<LinearOperator> a;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const auto t = t_operator(basis, i, j);
                a = a ? *a + t * t : t * t;
            }
        omega_check("omega_t_square_sum", a, -(n * (n - 1.0) - sum_mm1));
    }
    if (n >= 3) {
        std::optional<LinearOperator> a;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l) {
                    if (i == j || i == l || j == l) continue;
                    const auto term = t_operator(basis, i, j) * t_operator(basis, i, l);
                    a = a ? *a + term : term;
                }
        omega_check("omega_t_pair_sum", a, -(n * (n - 1.0) * (n - 2.0) - sum_mm1m2) / 3.0);
    } else {
        out.push_back(detail::skipped("omega_t_pair_sum", "needs n >= 3"));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exact T-action case tables

struct TableReport {
    std::size_t states = 0;
    std::size_t checks = 0;
    std::size_t t_mismatches = 0;         ///< single T_ij against its defining sum over a > b
    std::size_t t_square_mismatches = 0;  ///< T_ij^2: -1 on differing letters, 0 otherwise
    std::size_t t_triple_mismatches = 0;  ///< symmetrized T T sum: 0 if a=b=c, else minus a cyclic shift

    bool ok() const { return t_mismatches == 0 && t_square_mismatches == 0 && t_triple_mismatches == 0; }
};

namespace detail {

using IntColumn = std::map<std::size_t, long long>;

/// T_ij on an integer column, through the operator implementation.
inline IntColumn apply_t_int(const Basis& basis, const LinearOperator& t, const IntColumn& in) {
    IntColumn out;
    for (const auto& [k, c] : in)
        t.column(k, [&](std::size_t r, cplx v) { out[r] += c * std::llround(v.real()); });
    std::erase_if(out, [](const auto& kv) { return kv.second == 0; });
    (void)basis;
    return out;
}

}  // namespace detail

/// Checks the T-operator case analyses exactly on every basis state and every (ordered) choice of sites.
inline TableReport verify_t_action_tables(int n, const WeightVector& weight) {
    const auto basis = make_basis(n, weight);
    const int N = basis->N();
    TableReport rep;
    rep.states = basis->dim();

    std::vector<std::vector<LinearOperator>> T(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            T[static_cast<std::size_t>(i)].push_back(i == j ? LinearOperator::scalar(basis, 0.0) : t_operator(basis, i, j));
    auto tij = [&](int i, int j) -> const LinearOperator& { return T[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; };

    for (std::size_t k = 0; k < basis->dim(); ++k) {
        const auto src = basis->letters(k);
        const detail::IntColumn e{{k, 1}};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                ++rep.checks;
                // Defining sum T = sum_{a>b} (e_ab (x) e_ba - e_ba (x) e_ab) on sites (i, j).
                detail::IntColumn expect;
                for (int a = 0; a < N; ++a)
                    for (int b = 0; b < a; ++b) {
                        auto w = detail::copy_word(src);
                        if (w[static_cast<std::size_t>(i)] == b && w[static_cast<std::size_t>(j)] == a) {
                            w[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(a);
                            w[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(b);
                            expect[basis->rank(detail::view(w, n))] += 1;
                        }
                        w = detail::copy_word(src);
                        if (w[static_cast<std::size_t>(i)] == a && w[static_cast<std::size_t>(j)] == b) {
                            w[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(b);
                            w[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(a);
                            expect[basis->rank(detail::view(w, n))] -= 1;
                        }
                    }
                std::erase_if(expect, [](const auto& kv) { return kv.second == 0; });
                const auto once = detail::apply_t_int(*basis, tij(i, j), e);
                if (once != expect) ++rep.t_mismatches;

                const auto twice = detail::apply_t_int(*basis, tij(i, j), once);
                detail::IntColumn sq;
                if (src[static_cast<std::size_t>(i)] != src[static_cast<std::size_t>(j)]) sq[k] = -1;
                if (twice != sq) ++rep.t_square_mismatches;

                for (int l = 0; l < n; ++l) {
                    if (l == i || l == j) continue;
                    // T_ij T_il + T_lj T_ij + T_il T_jl
                    detail::IntColumn sum;
                    auto add = [&](const detail::IntColumn& c) {
                        for (const auto& [r, v] : c) sum[r] += v;
                    };
                    add(detail::apply_t_int(*basis, tij(i, j), detail::apply_t_int(*basis, tij(i, l), e)));
                    add(detail::apply_t_int(*basis, tij(l, j), detail::apply_t_int(*basis, tij(i, j), e)));
                    add(detail::apply_t_int(*basis, tij(i, l), detail::apply_t_int(*basis, tij(j, l), e)));
                    std::erase_if(sum, [](const auto& kv) { return kv.second == 0; });

                    const auto a = src[static_cast<std::size_t>(i)];
                    const auto b = src[static_cast<std::size_t>(j)];
                    const auto c = src[static_cast<std::size_t>(l)];
                    detail::IntColumn expect3;
                    if (!(a == b && b == c)) {
                        auto w = detail::copy_word(src);
                        w[static_cast<std::size_t>(l)] = a;
                        w[static_cast<std::size_t>(i)] = b;
                        w[static_cast<std::size_t>(j)] = c;
                        expect3[basis->rank(detail::view(w, n))] = -1;
                    }
                    if (sum != expect3) ++rep.t_triple_mismatches;
                }
            }
    }
    return rep;
}

}  // namespace kzcal
