#pragma once

// Problem instances, weight subspaces of (C^N)^{\otimes n} and states on them.
//
// Letters and sites are 0-based throughout the C++ API. Anything that is
// printed or serialized uses 1-based labels (see to_string / the cli layer).

#include "kzcal/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace kzcal {

using cplx = std::complex<double>;

enum class Kind { Rational, Trigonometric };

inline const char* to_string(Kind kind) {
    return kind == Kind::Rational ? "rational" : "trigonometric";
}

inline constexpr double kDefaultEpsilonX = 1e-8;
inline constexpr std::size_t kDefaultDimensionCap = 200000;
inline constexpr std::size_t kMaxSites = 64;

/// All continuous data of one problem instance.
struct ModelParams {
    std::vector<double> x;  ///< n marked points
    std::vector<double> g;  ///< N twist eigenvalues
    double hbar = 1.0;
    double kappa = 0.0;
    double gamma = 0.0;  ///< only read for Kind::Trigonometric
    Kind kind = Kind::Rational;

    int n() const { return static_cast<int>(x.size()); }
    int N() const { return static_cast<int>(g.size()); }
};

struct ValidationOptions {
    double epsilon_x = kDefaultEpsilonX;
    bool strict = true;  ///< distinct, non-zero twists are an error instead of a warning
};

inline double min_pairwise_gap(std::span<const double> x) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) gap = std::min(gap, std::abs(x[i] - x[j]));
    return gap;
}

/// Throws on hard violations, returns the list of soft warnings.
inline std::vector<std::string> validate(const ModelParams& p, const ValidationOptions& opt = {}) {
    std::vector<std::string> warnings;
    if (p.x.empty()) throw Error(ErrorCode::InvalidParams, "n must be at least 1");
    if (p.g.empty()) throw Error(ErrorCode::InvalidParams, "N must be at least 1");
    if (p.x.size() > kMaxSites)
        throw Error(ErrorCode::InvalidParams, "n exceeds " + std::to_string(kMaxSites) + " sites");
    for (double v : p.x)
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidParams, "non-finite coordinate");
    for (double v : p.g)
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidParams, "non-finite twist");
    if (p.hbar == 0.0 || !std::isfinite(p.hbar)) throw Error(ErrorCode::InvalidParams, "hbar must be finite and non-zero");
    if (!std::isfinite(p.kappa)) throw Error(ErrorCode::InvalidParams, "kappa must be finite");
    if (p.kind == Kind::Trigonometric && !(p.gamma > 0.0 && std::isfinite(p.gamma)))
        throw Error(ErrorCode::InvalidParams, "trigonometric kind needs gamma > 0");
    if (p.kind == Kind::Rational && p.gamma < 0.0) throw Error(ErrorCode::InvalidParams, "gamma must be >= 0");

    const double gap = min_pairwise_gap(p.x);
    if (!(gap > opt.epsilon_x)) {
        std::ostringstream os;
        os << "coordinates closer than epsilon_x=" << opt.epsilon_x << " (min gap " << gap << ")";
        throw Error(ErrorCode::SingularConfiguration, os.str());
    }

    bool twist_issue = false;
    for (std::size_t a = 0; a < p.g.size(); ++a) {
        if (p.g[a] == 0.0) twist_issue = true;
        for (std::size_t b = a + 1; b < p.g.size(); ++b)
            if (p.g[a] == p.g[b]) twist_issue = true;
    }
    if (twist_issue) {
        if (opt.strict) throw Error(ErrorCode::InvalidParams, "twists must be pairwise distinct and non-zero");
        warnings.emplace_back("twists are not pairwise distinct and non-zero");
    }
    if (p.n() < p.N()) warnings.emplace_back("n < N: formulas stay defined but this is outside the usual n >= N setting");
    return warnings;
}

/// Occupation numbers (M_1, ..., M_N).
struct WeightVector {
    std::vector<int> M;

    int N() const { return static_cast<int>(M.size()); }
    int total() const { return std::accumulate(M.begin(), M.end(), 0); }
    bool operator==(const WeightVector&) const = default;
};

/// One multi-index J = (j_1, ..., j_n), letters 0-based.
struct BasisIndex {
    std::vector<int> J;
    bool operator==(const BasisIndex&) const = default;
};

/// 1-based rendering, e.g. "(1,2,1)".
inline std::string to_string(const BasisIndex& idx) {
    std::string s = "(";
    for (std::size_t k = 0; k < idx.J.size(); ++k) {
        if (k) s += ',';
        s += std::to_string(idx.J[k] + 1);
    }
    return s + ")";
}

inline void check_weight(int n, const WeightVector& w) {
    if (w.M.empty()) throw Error(ErrorCode::InvalidWeight, "empty weight");
    for (int m : w.M)
        if (m < 0) throw Error(ErrorCode::InvalidWeight, "negative occupation number");
    if (w.total() != n)
        throw Error(ErrorCode::InvalidWeight,
                    "occupation numbers sum to " + std::to_string(w.total()) + ", expected n=" + std::to_string(n));
}

/// n! / (M_1! ... M_N!), saturating at UINT64_MAX.
inline std::uint64_t multinomial(std::span<const int> M) {
    unsigned __int128 result = 1;
    std::uint64_t filled = 0;
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    for (int m : M) {
        // result *= C(filled + m, m), built incrementally so every step is exact.
        for (int t = 1; t <= m; ++t) {
            ++filled;
            result = result * filled / static_cast<unsigned>(t);
            if (result > kMax) return kMax;
        }
    }
    return static_cast<std::uint64_t>(result);
}

inline WeightVector weight_of(const BasisIndex& idx, int N) {
    WeightVector w{std::vector<int>(static_cast<std::size_t>(N), 0)};
    for (int j : idx.J) {
        if (j < 0 || j >= N)
            throw Error(ErrorCode::InvalidIndex, "letter " + std::to_string(j + 1) + " outside 1.." + std::to_string(N));
        ++w.M[static_cast<std::size_t>(j)];
    }
    return w;
}

/// The lexicographically ordered basis of one weight subspace, with O(nN) ranking.
class Basis {
public:
    Basis(int n, WeightVector weight, std::size_t dimension_cap = kDefaultDimensionCap)
        : n_(n), weight_(std::move(weight)) {
        if (n < 1) throw Error(ErrorCode::InvalidWeight, "n must be at least 1");
        if (static_cast<std::size_t>(n) > kMaxSites)
            throw Error(ErrorCode::InvalidWeight, "n exceeds " + std::to_string(kMaxSites) + " sites");
        check_weight(n, weight_);
        if (weight_.N() > 255) throw Error(ErrorCode::InvalidWeight, "N above 255 is not supported");
        const std::uint64_t d = multinomial(weight_.M);
        if (d > dimension_cap)
            throw Error(ErrorCode::DimensionCap,
                        "subspace dimension " + std::to_string(d) + " exceeds cap " + std::to_string(dimension_cap));
        dim_ = static_cast<std::size_t>(d);

        std::vector<std::uint8_t> word;
        word.reserve(static_cast<std::size_t>(n));
        for (int a = 0; a < weight_.N(); ++a)
            for (int k = 0; k < weight_.M[static_cast<std::size_t>(a)]; ++k) word.push_back(static_cast<std::uint8_t>(a));
        letters_.reserve(dim_ * static_cast<std::size_t>(n));
        do {
            letters_.insert(letters_.end(), word.begin(), word.end());
        } while (std::next_permutation(word.begin(), word.end()));
    }

    int n() const { return n_; }
    int N() const { return weight_.N(); }
    std::size_t dim() const { return dim_; }
    const WeightVector& weight() const { return weight_; }

    std::span<const std::uint8_t> letters(std::size_t k) const {
        return {letters_.data() + k * static_cast<std::size_t>(n_), static_cast<std::size_t>(n_)};
    }

    BasisIndex index(std::size_t k) const {
        auto l = letters(k);
        return BasisIndex{std::vector<int>(l.begin(), l.end())};
    }

    /// Position of a word in the lexicographic order. Throws if the word has another weight.
    std::size_t rank(std::span<const std::uint8_t> word) const {
        if (word.size() != static_cast<std::size_t>(n_)) throw Error(ErrorCode::InvalidIndex, "word length differs from n");
        int counts[256] = {};
        const int Nl = N();
        for (int a = 0; a < Nl; ++a) counts[a] = weight_.M[static_cast<std::size_t>(a)];
        unsigned __int128 perms = dim_;
        std::uint64_t remaining = static_cast<std::uint64_t>(n_);
        std::uint64_t r = 0;
        for (std::uint8_t c : word) {
            if (c >= Nl || counts[c] == 0) throw Error(ErrorCode::InvalidIndex, "word does not belong to this weight subspace");
            for (int b = 0; b < c; ++b)
                if (counts[b] > 0) r += static_cast<std::uint64_t>(perms * static_cast<unsigned>(counts[b]) / remaining);
            perms = perms * static_cast<unsigned>(counts[c]) / remaining;
            --counts[c];
            --remaining;
        }
        return static_cast<std::size_t>(r);
    }

    std::size_t rank(const BasisIndex& idx) const {
        std::vector<std::uint8_t> w;
        w.reserve(idx.J.size());
        for (int j : idx.J) {
            if (j < 0 || j >= N()) throw Error(ErrorCode::InvalidIndex, "letter out of range");
            w.push_back(static_cast<std::uint8_t>(j));
        }
        return rank(w);
    }

private:
    int n_;
    WeightVector weight_;
    std::size_t dim_ = 0;
    std::vector<std::uint8_t> letters_;
};

using BasisPtr = std::shared_ptr<const Basis>;

inline BasisPtr make_basis(int n, const WeightVector& weight, std::size_t dimension_cap = kDefaultDimensionCap) {
    return std::make_shared<const Basis>(n, weight, dimension_cap);
}

inline std::vector<BasisIndex> enumerate_basis(int n, const WeightVector& weight) {
    Basis b(n, weight);
    std::vector<BasisIndex> out;
    out.reserve(b.dim());
    for (std::size_t k = 0; k < b.dim(); ++k) out.push_back(b.index(k));
    return out;
}

/// Complex amplitudes over the canonical basis of one weight subspace.
class StateVector {
public:
    explicit StateVector(BasisPtr basis)
        : basis_(std::move(basis)), amp_(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis_->dim()))) {}

    StateVector(BasisPtr basis, Eigen::VectorXcd amplitudes) : basis_(std::move(basis)), amp_(std::move(amplitudes)) {
        if (static_cast<std::size_t>(amp_.size()) != basis_->dim())
            throw Error(ErrorCode::InvalidIndex, "amplitude count " + std::to_string(amp_.size()) +
                                                     " differs from subspace dimension " + std::to_string(basis_->dim()));
    }

    static StateVector basis_state(BasisPtr basis, std::size_t k) {
        StateVector s(std::move(basis));
        s.amp_(static_cast<Eigen::Index>(k)) = 1.0;
        return s;
    }

    /// All amplitudes equal to 1/sqrt(dim).
    static StateVector uniform(BasisPtr basis) {
        const auto d = static_cast<Eigen::Index>(basis->dim());
        return StateVector(std::move(basis), Eigen::VectorXcd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d))));
    }

    const BasisPtr& basis() const { return basis_; }
    const WeightVector& weight() const { return basis_->weight(); }
    std::size_t dim() const { return basis_->dim(); }
    const Eigen::VectorXcd& amplitudes() const { return amp_; }
    Eigen::VectorXcd& amplitudes() { return amp_; }

private:
    BasisPtr basis_;
    Eigen::VectorXcd amp_;
};

/// <Omega|Phi>: the plain sum of all amplitudes.
inline cplx omega_pairing(const StateVector& state) { return state.amplitudes().sum(); }

}  // namespace kzcal
