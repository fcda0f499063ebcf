#pragma once

// Operators on weight subspaces.
//
// A LinearOperator is defined by its column action: for basis state k it emits
// the (row, coefficient) pairs of column k. Application streams over basis
// states without building a matrix; materialize() collects the same emissions
// into a row-compressed sparse matrix for the eigensolvers. Sums, scalings and
// products of operators compose column actions, so every derived operator has
// both forms for free.

#include "kzcal/model.hpp"
#include "kzcal/random.hpp"

#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <functional>
#include <type_traits>
#include <utility>

namespace kzcal {

/// Non-owning callable reference; the emit callback is only alive for one column call.
template <class Signature>
class FunctionRef;

template <class R, class... Args>
class FunctionRef<R(Args...)> {
public:
    template <class F>
        requires(!std::is_same_v<std::remove_cvref_t<F>, FunctionRef>)
    FunctionRef(F&& f)  // NOLINT(google-explicit-constructor)
        : obj_(const_cast<void*>(static_cast<const void*>(std::addressof(f)))),
          call_([](void* o, Args... args) -> R { return (*static_cast<std::remove_reference_t<F>*>(o))(args...); }) {}

    R operator()(Args... args) const { return call_(obj_, args...); }

private:
    void* obj_;
    R (*call_)(void*, Args...);
};

class LinearOperator {
public:
    using Emit = FunctionRef<void(std::size_t, cplx)>;
    using ColumnAction = std::function<void(std::size_t, Emit)>;
    using Sparse = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

    LinearOperator(BasisPtr domain, BasisPtr codomain, ColumnAction action)
        : domain_(std::move(domain)), codomain_(std::move(codomain)), action_(std::move(action)) {}

    static LinearOperator identity(const BasisPtr& basis) {
        return {basis, basis, [](std::size_t k, Emit emit) { emit(k, 1.0); }};
    }

    static LinearOperator scalar(const BasisPtr& basis, cplx value) {
        return {basis, basis, [value](std::size_t k, Emit emit) { emit(k, value); }};
    }

    std::size_t rows() const { return codomain_->dim(); }
    std::size_t cols() const { return domain_->dim(); }
    std::size_t dim() const { return cols(); }
    const BasisPtr& domain() const { return domain_; }
    const BasisPtr& codomain() const { return codomain_; }

    void column(std::size_t k, Emit emit) const { action_(k, emit); }

    Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const {
        if (static_cast<std::size_t>(v.size()) != cols())
            throw Error(ErrorCode::InvalidIndex, "vector length does not match operator domain");
        Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(rows()));
        for (std::size_t k = 0; k < cols(); ++k) {
            const cplx vk = v(static_cast<Eigen::Index>(k));
            if (vk == cplx{}) continue;
            action_(k, [&](std::size_t r, cplx c) { out(static_cast<Eigen::Index>(r)) += c * vk; });
        }
        return out;
    }

    StateVector apply(const StateVector& s) const {
        if (s.weight() != domain_->weight()) throw Error(ErrorCode::InvalidWeight, "state lives in another weight subspace");
        return StateVector(codomain_, apply(s.amplitudes()));
    }

    Sparse materialize() const {
        std::vector<Eigen::Triplet<cplx>> trips;
        trips.reserve(cols() * 4);
        for (std::size_t k = 0; k < cols(); ++k)
            action_(k, [&](std::size_t r, cplx c) {
                trips.emplace_back(static_cast<int>(r), static_cast<int>(k), c);
            });
        Sparse m(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
        m.setFromTriplets(trips.begin(), trips.end());
        m.prune(cplx{0.0, 0.0}, 0.0);
        return m;
    }

    Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(materialize()); }

    /// <Omega| A as a row vector: the column sums.
    Eigen::RowVectorXcd omega_covector() const {
        Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(static_cast<Eigen::Index>(cols()));
        for (std::size_t k = 0; k < cols(); ++k)
            action_(k, [&](std::size_t, cplx c) { row(static_cast<Eigen::Index>(k)) += c; });
        return row;
    }

    friend LinearOperator operator+(const LinearOperator& a, const LinearOperator& b) {
        check_same_shape(a, b);
        return {a.domain_, a.codomain_, [a, b](std::size_t k, Emit emit) {
                    a.action_(k, emit);
                    b.action_(k, emit);
                }};
    }

    friend LinearOperator operator*(cplx s, const LinearOperator& a) {
        return {a.domain_, a.codomain_, [a, s](std::size_t k, Emit emit) {
                    a.action_(k, [&](std::size_t r, cplx c) { emit(r, s * c); });
                }};
    }

    friend LinearOperator operator-(const LinearOperator& a, const LinearOperator& b) { return a + cplx{-1.0} * b; }

    /// Composition: (a * b) v = a (b v).
    friend LinearOperator operator*(const LinearOperator& a, const LinearOperator& b) {
        if (b.codomain_->weight() != a.domain_->weight())
            throw Error(ErrorCode::InvalidWeight, "composition across different weight subspaces");
        return {b.domain_, a.codomain_, [a, b](std::size_t k, Emit emit) {
                    b.action_(k, [&](std::size_t mid, cplx cb) {
                        a.action_(mid, [&](std::size_t r, cplx ca) { emit(r, ca * cb); });
                    });
                }};
    }

private:
    static void check_same_shape(const LinearOperator& a, const LinearOperator& b) {
        if (a.domain_->weight() != b.domain_->weight() || a.codomain_->weight() != b.codomain_->weight())
            throw Error(ErrorCode::InvalidWeight, "operator sum across different weight subspaces");
    }

    BasisPtr domain_;
    BasisPtr codomain_;
    ColumnAction action_;
};

/// Max absolute entry of the materialized operator.
inline double max_abs_entry(const LinearOperator& a) {
    const auto m = a.materialize();
    double best = 0.0;
    for (Eigen::Index r = 0; r < m.outerSize(); ++r)
        for (LinearOperator::Sparse::InnerIterator it(m, r); it; ++it) best = std::max(best, std::abs(it.value()));
    return best;
}

/// max ||A v|| / ||v|| over `samples` random complex vectors.
inline double sampled_norm(const LinearOperator& a, CounterRng& rng, int samples = 32) {
    double best = 0.0;
    for (int s = 0; s < samples; ++s) {
        const auto v = random_state(a.domain(), rng);
        best = std::max(best, a.apply(v.amplitudes()).norm() / v.amplitudes().norm());
    }
    return best;
}

// ---------------------------------------------------------------------------
// Elementary actions on basis words

namespace detail {

using Word = std::array<std::uint8_t, kMaxSites>;

inline Word copy_word(std::span<const std::uint8_t> w) {
    Word out{};
    std::copy(w.begin(), w.end(), out.begin());
    return out;
}

inline std::span<const std::uint8_t> view(const Word& w, int n) { return {w.data(), static_cast<std::size_t>(n)}; }

inline void check_site(int n, int i) {
    if (i < 0 || i >= n) throw Error(ErrorCode::InvalidSites, "site " + std::to_string(i + 1) + " outside 1.." + std::to_string(n));
}

inline void check_pair(int n, int i, int j) {
    check_site(n, i);
    check_site(n, j);
    if (i == j) throw Error(ErrorCode::InvalidSites, "sites must differ");
}

inline void check_letter(int N, int a) {
    if (a < 0 || a >= N) throw Error(ErrorCode::InvalidIndex, "letter " + std::to_string(a + 1) + " outside 1.." + std::to_string(N));
}

}  // namespace detail

/// Sign of T_ij on a basis word: +1 if letter_i < letter_j, -1 if greater, 0 if equal.
/// The image (when non-zero) is the word with sites i and j swapped.
inline int t_sign(std::span<const std::uint8_t> word, int i, int j) {
    const auto a = word[static_cast<std::size_t>(i)];
    const auto b = word[static_cast<std::size_t>(j)];
    return a < b ? 1 : (a > b ? -1 : 0);
}

inline LinearOperator permutation_operator(const BasisPtr& basis, int i, int j) {
    detail::check_pair(basis->n(), i, j);
    const Basis* b = basis.get();
    return {basis, basis, [b, i, j](std::size_t k, LinearOperator::Emit emit) {
                auto w = detail::copy_word(b->letters(k));
                std::swap(w[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(j)]);
                emit(b->rank(detail::view(w, b->n())), 1.0);
            }};
}

inline LinearOperator t_operator(const BasisPtr& basis, int i, int j) {
    detail::check_pair(basis->n(), i, j);
    const Basis* b = basis.get();
    return {basis, basis, [b, i, j](std::size_t k, LinearOperator::Emit emit) {
                auto w = detail::copy_word(b->letters(k));
                const int s = t_sign(detail::view(w, b->n()), i, j);
                if (s == 0) return;
                std::swap(w[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(j)]);
                emit(b->rank(detail::view(w, b->n())), static_cast<double>(s));
            }};
}

/// Diagonal operator acting as diag(values) on site i.
inline LinearOperator site_diagonal_operator(const BasisPtr& basis, int i, std::vector<double> values) {
    detail::check_site(basis->n(), i);
    if (static_cast<int>(values.size()) != basis->N()) throw Error(ErrorCode::InvalidParams, "diagonal length differs from N");
    const Basis* b = basis.get();
    return {basis, basis, [b, i, values = std::move(values)](std::size_t k, LinearOperator::Emit emit) {
                emit(k, values[b->letters(k)[static_cast<std::size_t>(i)]]);
            }};
}

/// g^{(i)}.
inline LinearOperator twist_operator(const BasisPtr& basis, int i, const std::vector<double>& g) {
    return site_diagonal_operator(basis, i, g);
}

/// M_a = sum_l e_aa^{(l)}: diagonal, counts letter a.
inline LinearOperator weight_operator(const BasisPtr& basis, int a) {
    detail::check_letter(basis->N(), a);
    const Basis* b = basis.get();
    return {basis, basis, [b, a](std::size_t k, LinearOperator::Emit emit) {
                const auto w = b->letters(k);
                const auto count = std::count(w.begin(), w.end(), static_cast<std::uint8_t>(a));
                emit(k, static_cast<double>(count));
            }};
}

/// e_ab^{(i)}: letter b at site i becomes a, other basis states are annihilated.
/// For a != b the codomain is the shifted weight subspace M + e_a - e_b. When
/// that shift is impossible (M_b = 0) the operator is zero on the original subspace.
inline LinearOperator site_matrix_operator(const BasisPtr& basis, int i, int a, int b) {
    detail::check_site(basis->n(), i);
    detail::check_letter(basis->N(), a);
    detail::check_letter(basis->N(), b);
    if (a != b && basis->weight().M[static_cast<std::size_t>(b)] == 0)
        return {basis, basis, [](std::size_t, LinearOperator::Emit) {}};
    BasisPtr target = basis;
    if (a != b) {
        WeightVector shifted = basis->weight();
        ++shifted.M[static_cast<std::size_t>(a)];
        --shifted.M[static_cast<std::size_t>(b)];
        target = make_basis(basis->n(), shifted, std::numeric_limits<std::size_t>::max());
    }
    const Basis* src = basis.get();
    const Basis* dst = target.get();
    return {basis, target, [src, dst, i, a, b](std::size_t k, LinearOperator::Emit emit) {
                auto w = detail::copy_word(src->letters(k));
                if (w[static_cast<std::size_t>(i)] != b) return;
                w[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(a);
                emit(dst->rank(detail::view(w, dst->n())), 1.0);
            }};
}

// State-level conveniences.

inline StateVector apply_permutation(int i, int j, const StateVector& s) { return permutation_operator(s.basis(), i, j).apply(s); }
inline StateVector apply_T(int i, int j, const StateVector& s) { return t_operator(s.basis(), i, j).apply(s); }
inline StateVector apply_site_matrix(int i, int a, int b, const StateVector& s) {
    return site_matrix_operator(s.basis(), i, a, b).apply(s);
}
inline StateVector apply_twist(int i, const StateVector& s, const ModelParams& p) {
    return twist_operator(s.basis(), i, p.g).apply(s);
}

// ---------------------------------------------------------------------------
// Gaudin Hamiltonians

/// The pair coefficient of P_ij in H_i as a function of d = x_i - x_j, and its
/// derivatives in d. Rational: kappa/d. Trigonometric: kappa gamma coth(gamma d).
inline double pair_kernel(const ModelParams& p, double d, int derivative = 0) {
    const double k = p.kappa;
    if (p.kind == Kind::Rational) {
        switch (derivative) {
            case 0: return k / d;
            case 1: return -k / (d * d);
            case 2: return 2.0 * k / (d * d * d);
        }
    } else {
        const double gd = p.gamma * d;
        const double s = std::sinh(gd);
        const double inv_s2 = 1.0 / (s * s);
        const double coth = 1.0 / std::tanh(gd);
        switch (derivative) {
            case 0: return k * p.gamma * coth;
            case 1: return -k * p.gamma * p.gamma * inv_s2;
            case 2: return 2.0 * k * p.gamma * p.gamma * p.gamma * coth * inv_s2;
        }
    }
    throw Error(ErrorCode::UnsupportedOrder, "pair kernel derivative order " + std::to_string(derivative));
}

/// kappa (kappa - hbar) / d^2 or kappa (kappa - hbar) gamma^2 / sinh^2(gamma d).
inline double calogero_pair_potential(const ModelParams& p, double d) {
    const double c = p.kappa * (p.kappa - p.hbar);
    if (p.kind == Kind::Rational) return c / (d * d);
    const double s = std::sinh(p.gamma * d);
    return c * p.gamma * p.gamma / (s * s);
}

/// sum_{i != j} of the pair potential.
inline double calogero_potential(const ModelParams& p) {
    double v = 0.0;
    for (int i = 0; i < p.n(); ++i)
        for (int j = 0; j < p.n(); ++j)
            if (i != j) v += calogero_pair_potential(p, p.x[static_cast<std::size_t>(i)] - p.x[static_cast<std::size_t>(j)]);
    return v;
}

inline void check_instance(const ModelParams& p, const Basis& basis, double epsilon_x = kDefaultEpsilonX) {
    validate(p, ValidationOptions{epsilon_x, false});
    if (basis.n() != p.n()) throw Error(ErrorCode::InvalidWeight, "basis has a different number of sites than params");
    if (basis.N() != p.N()) throw Error(ErrorCode::InvalidWeight, "weight length differs from N");
}

/// H_i = g^{(i)} + kappa sum_{j != i} P_ij / (x_i - x_j)                      (rational)
/// H_i = g^{(i)} + kappa gamma sum_{j != i} (coth gamma(x_i - x_j) P_ij + T_ij)  (trigonometric)
inline LinearOperator gaudin_hamiltonian(const ModelParams& params, const BasisPtr& basis, int i) {
    check_instance(params, *basis);
    detail::check_site(basis->n(), i);
    const int n = basis->n();
    std::vector<double> pair(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j)
        if (j != i) pair[static_cast<std::size_t>(j)] = pair_kernel(params, params.x[static_cast<std::size_t>(i)] - params.x[static_cast<std::size_t>(j)]);
    const double t_coeff = params.kind == Kind::Trigonometric ? params.kappa * params.gamma : 0.0;
    const Basis* b = basis.get();
    return {basis, basis, [b, i, n, pair = std::move(pair), t_coeff, g = params.g](std::size_t k, LinearOperator::Emit emit) {
                const auto src = b->letters(k);
                emit(k, g[src[static_cast<std::size_t>(i)]]);
                auto w = detail::copy_word(src);
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const int s = t_sign(src, i, j);
                    const double c = pair[static_cast<std::size_t>(j)] + t_coeff * s;
                    if (s == 0) {
                        emit(k, c);
                        continue;
                    }
                    std::swap(w[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(j)]);
                    emit(b->rank(detail::view(w, n)), c);
                    std::swap(w[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(j)]);
                }
            }};
}

inline std::vector<LinearOperator> gaudin_family(const ModelParams& params, const BasisPtr& basis) {
    std::vector<LinearOperator> out;
    out.reserve(static_cast<std::size_t>(params.n()));
    for (int i = 0; i < params.n(); ++i) out.push_back(gaudin_hamiltonian(params, basis, i));
    return out;
}

/// Analytic partial derivative d^order/dx_j^order of H_i, order 1 or 2.
/// Only the pair kernels depend on x; the T_ij term and the twist are constant.
inline LinearOperator gaudin_derivative(const ModelParams& params, const BasisPtr& basis, int i, int j, int order) {
    if (order != 1 && order != 2) throw Error(ErrorCode::UnsupportedOrder, "derivative order must be 1 or 2");
    check_instance(params, *basis);
    detail::check_site(basis->n(), i);
    detail::check_site(basis->n(), j);
    const int n = basis->n();
    std::vector<double> coeff(static_cast<std::size_t>(n), 0.0);
    const auto xi = params.x[static_cast<std::size_t>(i)];
    if (j == i) {
        for (int l = 0; l < n; ++l)
            if (l != i) coeff[static_cast<std::size_t>(l)] = pair_kernel(params, xi - params.x[static_cast<std::size_t>(l)], order);
    } else {
        const double sign = order == 1 ? -1.0 : 1.0;
        coeff[static_cast<std::size_t>(j)] = sign * pair_kernel(params, xi - params.x[static_cast<std::size_t>(j)], order);
    }
    const Basis* b = basis.get();
    return {basis, basis, [b, i, n, coeff = std::move(coeff)](std::size_t k, LinearOperator::Emit emit) {
                auto w = detail::copy_word(b->letters(k));
                for (int l = 0; l < n; ++l) {
                    const double c = coeff[static_cast<std::size_t>(l)];
                    if (l == i || c == 0.0) continue;
                    std::swap(w[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(l)]);
                    emit(b->rank(detail::view(w, n)), c);
                    std::swap(w[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(l)]);
                }
            }};
}

/// max over i < j of max_v ||[H_i, H_j] v|| / ||v||.
inline double max_commutator_ratio(const std::vector<LinearOperator>& family, CounterRng& rng, int samples = 32) {
    double best = 0.0;
    for (std::size_t i = 0; i < family.size(); ++i)
        for (std::size_t j = i + 1; j < family.size(); ++j) {
            const auto c = family[i] * family[j] - family[j] * family[i];
            best = std::max(best, sampled_norm(c, rng, samples));
        }
    return best;
}

}  // namespace kzcal
