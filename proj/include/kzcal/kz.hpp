#pragma once

// KZ connection hbar d/dx_i - H_i, its algebraic covariant powers, path
// integration of the KZ system and the Matsuo-Cherednik projection.

#include "kzcal/operators.hpp"

#include <map>
#include <optional>
#include <sstream>

namespace kzcal {

/// Precomputed swap tables for fast evaluation of sum_i u_i H_i(x) at arbitrary x.
class KzConnection {
public:
    KzConnection(ModelParams params, const WeightVector& weight, double epsilon_x = kDefaultEpsilonX,
                 std::size_t dimension_cap = kDefaultDimensionCap)
        : params_(std::move(params)), epsilon_x_(epsilon_x) {
        validate(params_, ValidationOptions{epsilon_x_, false});
        basis_ = make_basis(params_.n(), weight, dimension_cap);
        if (basis_->N() != params_.N()) throw Error(ErrorCode::InvalidWeight, "weight length differs from N");
        build_tables();
    }

    const ModelParams& params() const { return params_; }
    const BasisPtr& basis() const { return basis_; }
    double epsilon_x() const { return epsilon_x_; }
    int n() const { return params_.n(); }

    LinearOperator hamiltonian(int i) const { return gaudin_hamiltonian(params_, basis_, i); }

    /// d^order H_i / dx_i^order; order 0 is H_i itself.
    LinearOperator self_derivative(int i, int order) const {
        return order == 0 ? hamiltonian(i) : gaudin_derivative(params_, basis_, i, i, order);
    }

    /// (sum_i u_i H_i(x)) v, with x arbitrary (the twist and couplings come from params()).
    void apply_velocity_hamiltonian(std::span<const double> x, std::span<const double> u, const Eigen::VectorXcd& v,
                                    Eigen::VectorXcd& out) const {
        const auto d = static_cast<Eigen::Index>(basis_->dim());
        out.setZero(d);
        for (int i = 0; i < n(); ++i) {
            const double ui = u[static_cast<std::size_t>(i)];
            if (ui == 0.0) continue;
            const auto& diag = twist_diag_[static_cast<std::size_t>(i)];
            for (Eigen::Index k = 0; k < d; ++k) out(k) += ui * diag[static_cast<std::size_t>(k)] * v(k);
        }
        const double t_coeff = params_.kind == Kind::Trigonometric ? params_.kappa * params_.gamma : 0.0;
        for (const auto& pair : pairs_) {
            const double du = u[static_cast<std::size_t>(pair.i)] - u[static_cast<std::size_t>(pair.j)];
            if (du == 0.0) continue;
            const double f = du * pair_kernel(params_, x[static_cast<std::size_t>(pair.i)] - x[static_cast<std::size_t>(pair.j)]);
            const double t = du * t_coeff;
            for (Eigen::Index m = 0; m < d; ++m) {
                const auto src = static_cast<Eigen::Index>(pair.image[static_cast<std::size_t>(m)]);
                out(m) += (f + t * pair.row_sign[static_cast<std::size_t>(m)]) * v(src);
            }
        }
    }

private:
    struct PairTable {
        int i, j;
        std::vector<std::uint32_t> image;   // P_ij is the involution m -> image[m]
        std::vector<std::int8_t> row_sign;  // (T_ij v)[m] = row_sign[m] * v[image[m]]
    };

    void build_tables() {
        const std::size_t d = basis_->dim();
        twist_diag_.assign(static_cast<std::size_t>(n()), std::vector<double>(d));
        for (std::size_t k = 0; k < d; ++k) {
            const auto w = basis_->letters(k);
            for (int i = 0; i < n(); ++i) twist_diag_[static_cast<std::size_t>(i)][k] = params_.g[w[static_cast<std::size_t>(i)]];
        }
        for (int i = 0; i < n(); ++i)
            for (int j = i + 1; j < n(); ++j) {
                PairTable t{i, j, std::vector<std::uint32_t>(d), std::vector<std::int8_t>(d)};
                for (std::size_t k = 0; k < d; ++k) {
                    auto w = detail::copy_word(basis_->letters(k));
                    // T_ij maps column image[m] to row m with sign t_sign(column); the column
                    // word is the row word with i, j swapped, so its sign is the negated row sign.
                    t.row_sign[k] = static_cast<std::int8_t>(-t_sign(detail::view(w, n()), i, j));
                    std::swap(w[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(j)]);
                    t.image[k] = static_cast<std::uint32_t>(basis_->rank(detail::view(w, n())));
                }
                pairs_.push_back(std::move(t));
            }
    }

    ModelParams params_;
    double epsilon_x_;
    BasisPtr basis_;
    std::vector<std::vector<double>> twist_diag_;
    std::vector<PairTable> pairs_;
};

/// (1/hbar) H_i Phi.
inline StateVector kz_rhs(int i, const StateVector& state, const KzConnection& conn) {
    if (conn.params().hbar == 0.0) throw Error(ErrorCode::InvalidParams, "hbar must be non-zero");
    StateVector out = conn.hamiltonian(i).apply(state);
    out.amplitudes() /= conn.params().hbar;
    return out;
}

/// Words in the derivatives d^m H_i (m = 0, 1, 2); value = multiplicity.
/// The hbar power of a word equals the sum of its derivative orders.
using CovariantExpansion = std::map<std::vector<int>, int>;

/// Expansion of A_k with hbar^k d^k Phi = A_k Phi for KZ solutions:
/// A_1 = H_i,  A_{k+1} = hbar dA_k/dx_i + A_k H_i.
inline CovariantExpansion covariant_expansion(int k) {
    if (k < 1 || k > 3) throw Error(ErrorCode::UnsupportedOrder, "covariant power must be 1..3");
    CovariantExpansion a{{{0}, 1}};
    for (int step = 1; step < k; ++step) {
        CovariantExpansion next;
        for (const auto& [word, mult] : a) {
            for (std::size_t p = 0; p < word.size(); ++p) {
                auto d = word;
                ++d[p];
                next[d] += mult;
            }
            auto w = word;
            w.push_back(0);
            next[w] += mult;
        }
        a = std::move(next);
    }
    return a;
}

inline LinearOperator covariant_power_operator(int i, int k, const KzConnection& conn) {
    const auto expansion = covariant_expansion(k);
    const LinearOperator d[3] = {conn.self_derivative(i, 0), conn.self_derivative(i, 1), conn.self_derivative(i, 2)};
    std::optional<LinearOperator> total;
    for (const auto& [word, mult] : expansion) {
        int hbar_power = 0;
        LinearOperator term = d[word.front()];
        hbar_power += word.front();
        for (std::size_t p = 1; p < word.size(); ++p) {
            term = term * d[word[p]];
            hbar_power += word[p];
        }
        const double c = mult * std::pow(conn.params().hbar, hbar_power);
        term = cplx{c} * term;
        total = total ? *total + term : term;
    }
    return *total;
}

/// What hbar^k d^k Phi / dx_i^k must equal when Phi solves the KZ system at conn.params().x.
inline StateVector covariant_power(int i, int k, const StateVector& state, const KzConnection& conn) {
    return covariant_power_operator(i, k, conn).apply(state);
}

inline cplx mc_wavefunction(const StateVector& state) { return omega_pairing(state); }

/// out[i][k-1] = d^k Psi / dx_i^k for k = 1..max_order.
inline std::vector<std::vector<cplx>> mc_derivatives(const StateVector& state, const KzConnection& conn, int max_order) {
    if (max_order < 1 || max_order > 3) throw Error(ErrorCode::UnsupportedOrder, "max_order must be 1..3");
    std::vector<std::vector<cplx>> out(static_cast<std::size_t>(conn.n()));
    for (int i = 0; i < conn.n(); ++i)
        for (int k = 1; k <= max_order; ++k) {
            const cplx v = omega_pairing(covariant_power(i, k, state, conn));
            out[static_cast<std::size_t>(i)].push_back(v / std::pow(conn.params().hbar, k));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Path integration

struct PathSpec {
    std::vector<double> start;
    std::vector<std::vector<double>> waypoints;
    double rtol = 1e-10;
    double atol = 1e-12;
    double max_step = 0.05;  ///< in coordinate units (max-norm)
};

struct PathResult {
    StateVector state;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
};

namespace detail {

/// Smallest |x_i(t) - x_j(t)| along the straight segment a -> b.
inline double segment_min_gap(std::span<const double> a, std::span<const double> b) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const double d0 = a[i] - a[j];
            const double d1 = b[i] - b[j];
            if ((d0 <= 0.0 && d1 >= 0.0) || (d0 >= 0.0 && d1 <= 0.0)) return 0.0;
            gap = std::min({gap, std::abs(d0), std::abs(d1)});
        }
    return gap;
}

// Dormand-Prince 5(4) tableau.
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
};

}  // namespace detail

/// Propagates Phi along the piecewise-linear path start -> waypoints by
/// hbar dPhi/dt = (sum_i dx_i/dt H_i(x(t))) Phi, with adaptive DOPRI5 steps and PI control.
inline PathResult integrate_path_detailed(const StateVector& initial, const PathSpec& path, const KzConnection& conn) {
    if (initial.weight() != conn.basis()->weight()) throw Error(ErrorCode::InvalidWeight, "initial state in another weight subspace");
    const std::size_t n = static_cast<std::size_t>(conn.n());
    if (path.start.size() != n) throw Error(ErrorCode::InvalidParams, "path start has wrong length");
    if (!(path.rtol > 0.0) || !(path.atol > 0.0) || !(path.max_step > 0.0))
        throw Error(ErrorCode::InvalidParams, "path tolerances and max_step must be positive");
    for (const auto& w : path.waypoints)
        if (w.size() != n) throw Error(ErrorCode::InvalidParams, "waypoint has wrong length");

    PathResult result{initial, 0, 0};
    Eigen::VectorXcd y = initial.amplitudes();
    const double inv_hbar = 1.0 / conn.params().hbar;
    const auto dim = y.size();

    std::vector<double> a = path.start;
    if (min_pairwise_gap(a) <= conn.epsilon_x()) throw Error(ErrorCode::SingularPath, "path starts on a collision hyperplane");

    Eigen::VectorXcd k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), ytmp(dim), ynew(dim), err(dim);
    std::vector<double> xt(n);

    for (std::size_t seg = 0; seg < path.waypoints.size(); ++seg) {
        const auto& b = path.waypoints[seg];
        std::vector<double> u(n);
        double len = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = b[i] - a[i];
            len = std::max(len, std::abs(u[i]));
        }
        if (len == 0.0) continue;
        const double gap = detail::segment_min_gap(a, b);
        if (gap <= conn.epsilon_x()) {
            std::ostringstream os;
            os << "segment " << seg + 1 << " reaches a collision hyperplane (min gap " << gap << ")";
            throw Error(ErrorCode::SingularPath, os.str());
        }

        auto rhs = [&](double t, const Eigen::VectorXcd& v, Eigen::VectorXcd& out) {
            for (std::size_t i = 0; i < n; ++i) xt[i] = a[i] + t * u[i];
            conn.apply_velocity_hamiltonian(xt, u, v, out);
            out *= inv_hbar;
        };
        auto scaled_norm = [&](const Eigen::VectorXcd& e, const Eigen::VectorXcd& y0, const Eigen::VectorXcd& y1) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < dim; ++k) {
                const double sc = path.atol + path.rtol * std::max(std::abs(y0(k)), std::abs(y1(k)));
                const double r = std::abs(e(k)) / sc;
                s += r * r;
            }
            return std::sqrt(s / static_cast<double>(dim));
        };

        const double h_max = path.max_step / len;
        double t = 0.0;
        rhs(0.0, y, k1);
        double h;
        {
            const double d0 = scaled_norm(y, y, y);
            const double d1 = scaled_norm(k1, y, y);
            h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
            h = std::min({h, h_max, 1.0});
        }
        double err_prev = 1e-4;
        bool last_rejected = false;
        using T = detail::Dopri5;
        while (t < 1.0) {
            if (t + h > 1.0) h = 1.0 - t;
            if (h < 1e-14) {
                std::ostringstream os;
                os << "step size underflow on segment " << seg + 1 << " at t=" << t << " (h=" << h << ")";
                throw Error(ErrorCode::IntegrationFailure, os.str());
            }
            ytmp = y + h * T::a21 * k1;
            rhs(t + T::c2 * h, ytmp, k2);
            ytmp = y + h * (T::a31 * k1 + T::a32 * k2);
            rhs(t + T::c3 * h, ytmp, k3);
            ytmp = y + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3);
            rhs(t + T::c4 * h, ytmp, k4);
            ytmp = y + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4);
            rhs(t + T::c5 * h, ytmp, k5);
            ytmp = y + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5);
            rhs(t + h, ytmp, k6);
            ynew = y + h * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
            rhs(t + h, ynew, k7);
            err = h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
            const double e = scaled_norm(err, y, ynew);
            if (!std::isfinite(e)) throw Error(ErrorCode::IntegrationFailure, "non-finite error estimate");

            if (e <= 1.0) {
                t += h;
                y = ynew;
                k1 = k7;
                ++result.accepted_steps;
                const double ee = std::max(e, 1e-10);
                double fac = 0.9 * std::pow(ee, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
                fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
                h = std::min(h * fac, h_max);
                err_prev = ee;
                last_rejected = false;
            } else {
                ++result.rejected_steps;
                h *= std::max(0.2, 0.9 * std::pow(e, -1.0 / 5.0));
                last_rejected = true;
            }
            if (result.accepted_steps + result.rejected_steps > 10'000'000)
                throw Error(ErrorCode::IntegrationFailure, "step budget exhausted");
        }
        a = b;
    }
    result.state = StateVector(initial.basis(), y);
    return result;
}

inline StateVector integrate_path(const StateVector& initial, const PathSpec& path, const KzConnection& conn) {
    return integrate_path_detailed(initial, path, conn).state;
}

/// Straight move from conn.params().x to `target`.
inline StateVector integrate_to(const StateVector& initial, std::vector<double> target, const KzConnection& conn,
                                double rtol = 1e-10, double atol = 1e-12) {
    PathSpec p;
    p.start = conn.params().x;
    p.waypoints = {std::move(target)};
    p.rtol = rtol;
    p.atol = atol;
    return integrate_path(initial, p, conn);
}

}  // namespace kzcal
