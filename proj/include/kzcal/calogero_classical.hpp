#pragma once

// Classical Calogero-Moser side: Lax matrices, trace integrals, joint spectra
// of the Gaudin family and the quantum-classical correspondence check.

#include "kzcal/operators.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <optional>

namespace kzcal {

struct LaxMatrix {
    Eigen::MatrixXcd entries;
    Kind kind = Kind::Rational;
};

/// L_ij = p_i delta_ij + kappa / (x_i - x_j)  or  kappa gamma / sinh gamma (x_i - x_j) off the diagonal.
inline LaxMatrix lax_matrix(std::span<const double> x, std::span<const cplx> p, const ModelParams& params,
                            double epsilon_x = kDefaultEpsilonX) {
    if (x.size() != p.size()) throw Error(ErrorCode::InvalidParams, "x and p differ in length");
    if (min_pairwise_gap(x) <= epsilon_x) throw Error(ErrorCode::SingularConfiguration, "coincident coordinates in Lax matrix");
    const auto n = static_cast<Eigen::Index>(x.size());
    LaxMatrix L{Eigen::MatrixXcd::Zero(n, n), params.kind};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) {
                L.entries(i, i) = p[static_cast<std::size_t>(i)];
                continue;
            }
            const double d = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
            L.entries(i, j) = params.kind == Kind::Rational ? params.kappa / d
                                                            : params.kappa * params.gamma / std::sinh(params.gamma * d);
        }
    return L;
}

/// tr L^k for k = 1..kmax.
inline std::vector<cplx> classical_hamiltonians(const LaxMatrix& L, int kmax) {
    if (kmax < 1) throw Error(ErrorCode::InvalidParams, "kmax must be at least 1");
    std::vector<cplx> out;
    Eigen::MatrixXcd power = L.entries;
    for (int k = 1; k <= kmax; ++k) {
        out.push_back(power.trace());
        if (k < kmax) power = power * L.entries;
    }
    return out;
}

/// Strings g_a - (M_a - 1 - 2 alpha) kappa gamma, alpha = 0..M_a-1, in species order.
/// For the rational kind they collapse onto g_a with multiplicity M_a.
inline std::vector<double> predicted_lax_spectrum(const WeightVector& weight, const ModelParams& params) {
    if (weight.N() != params.N()) throw Error(ErrorCode::InvalidWeight, "weight length differs from N");
    const double kg = params.kind == Kind::Trigonometric ? params.kappa * params.gamma : 0.0;
    std::vector<double> out;
    for (int a = 0; a < params.N(); ++a) {
        const int m = weight.M[static_cast<std::size_t>(a)];
        for (int alpha = 0; alpha < m; ++alpha) out.push_back(params.g[static_cast<std::size_t>(a)] - (m - 1 - 2 * alpha) * kg);
    }
    return out;
}

inline double string_energy(const WeightVector& weight, const ModelParams& params, int k) {
    if (k < 1) throw Error(ErrorCode::InvalidParams, "k must be at least 1");
    double e = 0.0;
    for (double v : predicted_lax_spectrum(weight, params)) e += std::pow(v, k);
    return e;
}

// ---------------------------------------------------------------------------
// Joint spectrum

struct JointSpectrumItem {
    std::vector<cplx> p;
    StateVector eigvec;
    std::vector<double> residuals;  ///< ||H_i v - p_i v|| / ||v|| per site
};

struct JointSpectrumOptions {
    double residual_tol = 1e-8;
    int max_retries = 4;
    std::size_t dense_limit = 2000;  ///< above this, a partial spectrum is extracted iteratively
    std::size_t partial_count = 24;
    int max_restarts = 60;
};

namespace detail {

struct EigenPairs {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd vectors;
};

inline EigenPairs dense_eigenpairs(const Eigen::MatrixXcd& C, bool hermitian) {
    if (hermitian) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(C);
        if (es.info() != Eigen::Success) throw Error(ErrorCode::DegenerateSpectrum, "self-adjoint eigensolver failed");
        return {es.eigenvalues().cast<cplx>(), es.eigenvectors()};
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::DegenerateSpectrum, "complex eigensolver failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

/// Explicitly restarted Arnoldi for `count` largest-magnitude eigenpairs of a sparse matrix.
/// Returns Ritz pairs; callers check residuals and keep the converged ones.
inline EigenPairs arnoldi_partial(const LinearOperator::Sparse& C, std::size_t count, CounterRng& rng, int max_restarts,
                                  double tol) {
    const auto dim = C.rows();
    const auto want = static_cast<Eigen::Index>(std::min<std::size_t>(count, static_cast<std::size_t>(dim)));
    const Eigen::Index m = std::min<Eigen::Index>(dim, std::max<Eigen::Index>(2 * want + 20, 60));
    Eigen::VectorXcd v0(dim);
    for (Eigen::Index k = 0; k < dim; ++k) v0(k) = rng.complex_normal();

    EigenPairs best;
    for (int restart = 0; restart < max_restarts; ++restart) {
        Eigen::MatrixXcd V = Eigen::MatrixXcd::Zero(dim, m + 1);
        Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
        V.col(0) = v0 / v0.norm();
        Eigen::Index built = m;
        for (Eigen::Index j = 0; j < m; ++j) {
            Eigen::VectorXcd w = C * V.col(j);
            for (int pass = 0; pass < 2; ++pass)  // classical Gram-Schmidt, repeated once
                for (Eigen::Index i = 0; i <= j; ++i) {
                    const cplx h = V.col(i).dot(w);
                    H(i, j) += h;
                    w -= h * V.col(i);
                }
            const double beta = w.norm();
            H(j + 1, j) = beta;
            if (beta < 1e-14) {
                built = j + 1;
                break;
            }
            V.col(j + 1) = w / beta;
        }
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.topLeftCorner(built, built));
        std::vector<Eigen::Index> order(static_cast<std::size_t>(built));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](Eigen::Index a, Eigen::Index b) { return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b)); });
        const Eigen::Index take = std::min(want, built);
        best.values.resize(take);
        best.vectors.resize(dim, take);
        double worst = 0.0;
        const double scale = std::max(1.0, std::abs(es.eigenvalues()(order[0])));
        v0.setZero();
        for (Eigen::Index t = 0; t < take; ++t) {
            const Eigen::Index idx = order[static_cast<std::size_t>(t)];
            Eigen::VectorXcd y = V.leftCols(built) * es.eigenvectors().col(idx);
            y /= y.norm();
            best.values(t) = es.eigenvalues()(idx);
            best.vectors.col(t) = y;
            worst = std::max(worst, (C * y - best.values(t) * y).norm() / scale);
            v0 += y;
        }
        if (worst < tol || built < m) break;
    }
    return best;
}

}  // namespace detail

/// Diagonalizes a random real combination sum_i c_i H_i and reads p_i off as Rayleigh quotients.
/// Dense sectors return every joint eigenvector; sectors above opts.dense_limit return the
/// converged subset of an iterative partial spectrum.
/// Same, on an already materialized family H_1..H_n over `basis`.
inline std::vector<JointSpectrumItem> gaudin_joint_spectrum(const std::vector<LinearOperator::Sparse>& H, const BasisPtr& basis,
                                                            bool hermitian, std::uint64_t seed,
                                                            const JointSpectrumOptions& opts = {}) {
    if (H.empty()) throw Error(ErrorCode::InvalidParams, "empty operator family");
    const bool dense = basis->dim() <= opts.dense_limit;
    const auto n = H.size();

    std::string last_failure;
    for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
        CounterRng rng(seed, {fnv1a("joint-spectrum"), static_cast<std::uint64_t>(attempt)});
        LinearOperator::Sparse C(H[0].rows(), H[0].cols());
        for (std::size_t i = 0; i < n; ++i) C += cplx{rng.normal()} * H[i];

        detail::EigenPairs pairs = dense ? detail::dense_eigenpairs(Eigen::MatrixXcd(C), hermitian)
                                         : detail::arnoldi_partial(C, opts.partial_count, rng, opts.max_restarts,
                                                                   opts.residual_tol * 1e-2);
        std::vector<Eigen::MatrixXcd> HV;
        HV.reserve(n);
        for (std::size_t i = 0; i < n; ++i) HV.emplace_back(H[i] * pairs.vectors);

        std::vector<JointSpectrumItem> items;
        bool ok = true;
        for (Eigen::Index k = 0; k < pairs.vectors.cols(); ++k) {
            const Eigen::VectorXcd v = pairs.vectors.col(k);
            const double vv = v.squaredNorm();
            JointSpectrumItem item{{}, StateVector(basis, v), {}};
            bool converged = true;
            for (std::size_t i = 0; i < n; ++i) {
                const Eigen::VectorXcd hv = HV[i].col(k);
                const cplx pi = v.dot(hv) / vv;
                const double res = (hv - pi * v).norm() / std::sqrt(vv);
                item.p.push_back(pi);
                item.residuals.push_back(res);
                if (!(res < opts.residual_tol)) converged = false;
            }
            if (converged) {
                items.push_back(std::move(item));
            } else if (dense) {
                ok = false;
                last_failure = "eigen-residual above tolerance; joint spectrum may be degenerate";
                break;
            }
        }
        if (ok && !items.empty()) return items;
        if (!dense && items.empty()) last_failure = "no Ritz pair converged";
    }
    throw Error(ErrorCode::DegenerateSpectrum, last_failure + " after " + std::to_string(opts.max_retries + 1) +
                                                   " randomized attempts; try another seed or more generic parameters");
}

inline std::vector<JointSpectrumItem> gaudin_joint_spectrum(const ModelParams& params, const WeightVector& weight,
                                                            std::uint64_t seed, const JointSpectrumOptions& opts = {}) {
    const auto basis = make_basis(params.n(), weight);
    std::vector<LinearOperator::Sparse> H;
    for (const auto& h : gaudin_family(params, basis)) H.push_back(h.materialize());
    return gaudin_joint_spectrum(H, basis, params.kind == Kind::Rational, seed, opts);
}

// ---------------------------------------------------------------------------
// Quantum-classical check

struct QcReport {
    std::vector<cplx> lax_eigenvalues;
    std::vector<double> predicted;
    std::vector<cplx> traces;            ///< tr L^k, k = 1..4
    std::vector<double> predicted_traces;
    double max_mismatch = 0.0;       ///< max over groups of equal predicted values of |centroid - value|
    double max_pair_distance = 0.0;  ///< max distance of individually paired eigenvalues
    double max_trace_error = 0.0;    ///< relative, max over k
    bool passed = false;
};

namespace detail {

/// Greedy nearest-pair assignment: returns assignment[computed] = predicted index.
inline std::vector<std::size_t> greedy_assign(const std::vector<cplx>& computed, const std::vector<double>& predicted) {
    struct Cand {
        double d;
        std::size_t c, p;
    };
    std::vector<Cand> cands;
    for (std::size_t c = 0; c < computed.size(); ++c)
        for (std::size_t p = 0; p < predicted.size(); ++p) cands.push_back({std::abs(computed[c] - predicted[p]), c, p});
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.d < b.d; });
    std::vector<std::size_t> assign(computed.size(), static_cast<std::size_t>(-1));
    std::vector<bool> used(predicted.size(), false);
    for (const auto& c : cands)
        if (assign[c.c] == static_cast<std::size_t>(-1) && !used[c.p]) {
            assign[c.c] = c.p;
            used[c.p] = true;
        }
    return assign;
}

}  // namespace detail

/// Compares the Lax spectrum at (x, p) with {g_a}^{M_a} (rational) or the strings (trigonometric).
///
/// A Lax eigenvalue of multiplicity m sits in a single Jordan block, so rounding
/// splits it by roughly eps^{1/m}. The pass criterion therefore compares the
/// centroid of each group of equal predicted values (well conditioned); the raw
/// pairwise distance is reported next to it.
inline QcReport qc_check(const JointSpectrumItem& item, const ModelParams& params, const WeightVector& weight,
                         std::optional<double> tolerance = std::nullopt) {
    const double tol = tolerance.value_or(params.kind == Kind::Rational ? 1e-8 : 1e-7);
    QcReport rep;
    const auto L = lax_matrix(params.x, item.p, params);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(L.entries, false);
    rep.lax_eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    rep.predicted = predicted_lax_spectrum(weight, params);
    if (rep.predicted.size() != rep.lax_eigenvalues.size())
        throw Error(ErrorCode::InvalidWeight, "weight does not match the number of particles");

    const auto assign = detail::greedy_assign(rep.lax_eigenvalues, rep.predicted);
    for (std::size_t c = 0; c < assign.size(); ++c)
        rep.max_pair_distance = std::max(rep.max_pair_distance, std::abs(rep.lax_eigenvalues[c] - rep.predicted[assign[c]]));

    // Group predicted values that coincide.
    std::vector<std::size_t> group(rep.predicted.size());
    std::vector<double> centers;
    for (std::size_t p = 0; p < rep.predicted.size(); ++p) {
        std::size_t gidx = centers.size();
        for (std::size_t q = 0; q < centers.size(); ++q)
            if (std::abs(centers[q] - rep.predicted[p]) <= 1e-6 * std::max(1.0, std::abs(rep.predicted[p]))) gidx = q;
        if (gidx == centers.size()) centers.push_back(rep.predicted[p]);
        group[p] = gidx;
    }
    std::vector<cplx> sum(centers.size());
    std::vector<double> target(centers.size(), 0.0);
    std::vector<int> count(centers.size(), 0);
    for (std::size_t c = 0; c < assign.size(); ++c) {
        const auto gi = group[assign[c]];
        sum[gi] += rep.lax_eigenvalues[c];
        target[gi] += rep.predicted[assign[c]];
        ++count[gi];
    }
    for (std::size_t gi = 0; gi < centers.size(); ++gi)
        rep.max_mismatch = std::max(rep.max_mismatch, std::abs((sum[gi] - target[gi]) / static_cast<double>(count[gi])));

    rep.traces = classical_hamiltonians(L, 4);
    for (int k = 1; k <= 4; ++k) {
        double pred = 0.0;
        for (double v : rep.predicted) pred += std::pow(v, k);
        rep.predicted_traces.push_back(pred);
        rep.max_trace_error =
            std::max(rep.max_trace_error, std::abs(rep.traces[static_cast<std::size_t>(k - 1)] - pred) / std::max(1.0, std::abs(pred)));
    }
    rep.passed = rep.max_mismatch <= tol && rep.max_trace_error <= tol;
    return rep;
}

}  // namespace kzcal
