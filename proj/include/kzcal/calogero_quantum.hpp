#pragma once

// Calogero and Calogero-Sutherland eigen-relations for Psi = <Omega|Phi>.
//
// Two forms are checked. The covector form builds <Omega| (LHS operator - E)
// with every derivative of a KZ solution replaced by its covariant power; it
// vanishes for every state, so no integration is involved. The solution form
// evaluates the same relations on a concrete state via mc_derivatives.

#include "kzcal/kz.hpp"

#include <array>

namespace kzcal {

enum class Relation { H2Rational, H2Trig, H3Rational, Momentum };

inline const char* to_string(Relation r) {
    switch (r) {
        case Relation::H2Rational: return "H2_rational";
        case Relation::H2Trig: return "H2_trig";
        case Relation::H3Rational: return "H3_rational";
        case Relation::Momentum: return "momentum";
    }
    return "?";
}

inline constexpr double kResidualFloor = 1e-30;

struct EigenReport {
    Relation relation = Relation::H2Rational;
    cplx predicted_eigenvalue{};
    double residual = 0.0;  ///< relative, or absolute when `degenerate`
    bool degenerate = false;
    cplx psi{};
    std::string summary;
};

/// sum_a M_a g_a^k, plus (kappa^2 gamma^2 / 3) sum_a M_a (M_a^2 - 1) for the trigonometric k = 2 case.
inline double calogero_energy(const WeightVector& weight, const ModelParams& params, int k) {
    if (static_cast<int>(weight.M.size()) != params.N()) throw Error(ErrorCode::InvalidWeight, "weight length differs from N");
    if (k != 2 && k != 3) throw Error(ErrorCode::Unsupported, "calogero_energy supports k = 2 or 3");
    if (k == 3 && params.kind != Kind::Rational)
        throw Error(ErrorCode::Unsupported, "cubic energy is only available for the rational kind");
    double e = 0.0;
    for (int a = 0; a < params.N(); ++a) e += weight.M[static_cast<std::size_t>(a)] * std::pow(params.g[static_cast<std::size_t>(a)], k);
    if (params.kind == Kind::Trigonometric) {
        double corr = 0.0;
        for (int m : weight.M) corr += static_cast<double>(m) * (static_cast<double>(m) * m - 1.0);
        e += params.kappa * params.kappa * params.gamma * params.gamma / 3.0 * corr;
    }
    return e;
}

/// sum_a M_a g_a, the total-momentum eigenvalue.
inline double momentum_eigenvalue(const WeightVector& weight, const ModelParams& params) {
    double p = 0.0;
    for (int a = 0; a < params.N(); ++a) p += weight.M[static_cast<std::size_t>(a)] * params.g[static_cast<std::size_t>(a)];
    return p;
}

namespace detail {

inline double covector_scale(double e) { return std::max(1.0, std::abs(e)); }

inline double max_abs(const Eigen::RowVectorXcd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

inline void finish_report(EigenReport& rep, cplx lhs, double e) {
    rep.predicted_eigenvalue = e;
    const double diff = std::abs(lhs - e * rep.psi);
    const double denom = std::abs(e * rep.psi);
    if (std::abs(rep.psi) < kResidualFloor || denom < kResidualFloor) {
        rep.degenerate = true;
        rep.residual = diff;
        rep.summary = "projection Psi vanishes; absolute residual reported";
    } else {
        rep.residual = diff / denom;
    }
}

}  // namespace detail

/// <Omega| [ sum_i (hbar dH_i/dx_i + H_i^2) - V(x) - E ].
inline Eigen::RowVectorXcd h2_covector(const KzConnection& conn) {
    const auto& p = conn.params();
    Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(static_cast<Eigen::Index>(conn.basis()->dim()));
    for (int i = 0; i < conn.n(); ++i) row += covariant_power_operator(i, 2, conn).omega_covector();
    const double shift = calogero_potential(p) + calogero_energy(conn.basis()->weight(), p, 2);
    row.array() -= shift;
    return row;
}

/// Max entry of the quadratic covector divided by max(1, |E|).
inline double h2_covector_residual(const ModelParams& params, const WeightVector& weight) {
    KzConnection conn(params, weight);
    return detail::max_abs(h2_covector(conn)) / detail::covector_scale(calogero_energy(weight, params, 2));
}

/// <Omega| [ sum_i A_3^{(i)} - 3 kappa (kappa - hbar) sum_{i != j} (x_i - x_j)^{-2} H_i - E_3 ],
/// where A_3^{(i)} is the third covariant power and hbar d/dx_i became H_i.
inline Eigen::RowVectorXcd h3_covector(const KzConnection& conn) {
    const auto& p = conn.params();
    if (p.kind != Kind::Rational) throw Error(ErrorCode::Unsupported, "cubic relation is only available for the rational kind");
    const auto d = static_cast<Eigen::Index>(conn.basis()->dim());
    Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(d);
    const double c = 3.0 * p.kappa * (p.kappa - p.hbar);
    for (int i = 0; i < conn.n(); ++i) {
        row += covariant_power_operator(i, 3, conn).omega_covector();
        double w = 0.0;
        for (int j = 0; j < conn.n(); ++j)
            if (j != i) {
                const double dx = p.x[static_cast<std::size_t>(i)] - p.x[static_cast<std::size_t>(j)];
                w += 1.0 / (dx * dx);
            }
        row -= (c * w) * conn.hamiltonian(i).omega_covector();
    }
    row.array() -= calogero_energy(conn.basis()->weight(), p, 3);
    return row;
}

inline double h3_covector_residual(const ModelParams& params, const WeightVector& weight) {
    if (params.kind != Kind::Rational) throw Error(ErrorCode::Unsupported, "cubic relation is only available for the rational kind");
    KzConnection conn(params, weight);
    return detail::max_abs(h3_covector(conn)) / detail::covector_scale(calogero_energy(weight, params, 3));
}

/// <Omega| [ sum_i H_i - sum_a M_a g_a ].
inline double momentum_covector_residual(const ModelParams& params, const WeightVector& weight) {
    KzConnection conn(params, weight);
    Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(static_cast<Eigen::Index>(conn.basis()->dim()));
    for (int i = 0; i < conn.n(); ++i) row += conn.hamiltonian(i).omega_covector();
    const double p = momentum_eigenvalue(weight, params);
    row.array() -= p;
    return detail::max_abs(row) / detail::covector_scale(p);
}

/// |LHS - E Psi| / max(|E Psi|, floor), derivatives of Psi taken from mc_derivatives.
/// When |Psi| is below the floor the absolute residual is reported and `degenerate` is set.
inline EigenReport pde_residual_on_solution(const StateVector& state, const KzConnection& conn, Relation relation) {
    const auto& p = conn.params();
    const auto& weight = conn.basis()->weight();
    const bool trig = p.kind == Kind::Trigonometric;
    if ((relation == Relation::H2Rational && trig) || (relation == Relation::H2Trig && !trig) ||
        (relation == Relation::H3Rational && trig))
        throw Error(ErrorCode::Unsupported, std::string("relation ") + to_string(relation) + " does not match the connection kind");

    EigenReport rep;
    rep.relation = relation;
    rep.psi = mc_wavefunction(state);
    cplx lhs{};
    double e = 0.0;
    switch (relation) {
        case Relation::H2Rational:
        case Relation::H2Trig: {
            const auto d = mc_derivatives(state, conn, 2);
            for (const auto& di : d) lhs += p.hbar * p.hbar * di[1];
            lhs -= calogero_potential(p) * rep.psi;
            e = calogero_energy(weight, p, 2);
            break;
        }
        case Relation::H3Rational: {
            const auto d = mc_derivatives(state, conn, 3);
            const double c = 3.0 * p.hbar * p.kappa * (p.kappa - p.hbar);
            for (int i = 0; i < conn.n(); ++i) {
                lhs += p.hbar * p.hbar * p.hbar * d[static_cast<std::size_t>(i)][2];
                for (int j = 0; j < conn.n(); ++j)
                    if (j != i) {
                        const double dx = p.x[static_cast<std::size_t>(i)] - p.x[static_cast<std::size_t>(j)];
                        lhs -= c / (dx * dx) * d[static_cast<std::size_t>(i)][0];
                    }
            }
            e = calogero_energy(weight, p, 3);
            break;
        }
        case Relation::Momentum: {
            const auto d = mc_derivatives(state, conn, 1);
            for (const auto& di : d) lhs += p.hbar * di[0];
            e = momentum_eigenvalue(weight, p);
            break;
        }
    }
    detail::finish_report(rep, lhs, e);
    return rep;
}

/// The quadratic relation with d^2 Psi / dx_i^2 taken from nine-point central differences of
/// KZ solutions integrated out of `state` (located at conn.params().x). Nothing here uses the
/// covariant powers, so this checks the integrated solution itself. The step is capped at
/// 2% of the smallest gap; the truncation error grows with h / gap.
inline EigenReport pde_residual_by_differences(const StateVector& state, const KzConnection& conn, double h = 5e-3,
                                               double rtol = 1e-13, double atol = 1e-15) {
    static constexpr std::array<double, 5> w{-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0};
    const auto& p = conn.params();
    h = std::min(h, 0.02 * min_pairwise_gap(p.x));
    EigenReport rep;
    rep.relation = p.kind == Kind::Rational ? Relation::H2Rational : Relation::H2Trig;
    rep.psi = mc_wavefunction(state);
    auto psi_at = [&](int i, double s) {
        auto y = p.x;
        y[static_cast<std::size_t>(i)] += s;
        return mc_wavefunction(integrate_to(state, std::move(y), conn, rtol, atol));
    };
    cplx lap{};
    for (int i = 0; i < conn.n(); ++i) {
        cplx d = w[0] * rep.psi;
        for (int m = 1; m <= 4; ++m) d += w[static_cast<std::size_t>(m)] * (psi_at(i, m * h) + psi_at(i, -m * h));
        lap += d / (h * h);
    }
    const cplx lhs = p.hbar * p.hbar * lap - calogero_potential(p) * rep.psi;
    detail::finish_report(rep, lhs, calogero_energy(conn.basis()->weight(), p, 2));
    return rep;
}

}  // namespace kzcal
