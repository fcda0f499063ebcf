#pragma once

// Seeded randomness and random problem instances.
//
// Every draw is a pure function of (seed, stream tags, counter), so a suite or
// a single instance can be regenerated without replaying anything before it.
// Distributions are implemented here rather than taken from <random> because
// the standard distributions are not specified bit-for-bit across platforms.

#include "kzcal/model.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

namespace kzcal {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed) : key_(splitmix64(seed)) {}

    /// Derives an independent stream keyed by extra tags (suite name hash, instance index, ...).
    CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) : key_(splitmix64(seed)) {
        for (std::uint64_t t : tags) key_ = splitmix64(key_ ^ splitmix64(t));
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() { return splitmix64(key_ + 0xD1B54A32D192ED03ull * ++counter_); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [lo, hi].
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(static_cast<unsigned __int128>((*this)()) * span >> 64);
    }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    cplx complex_normal() {
        const double re = normal();
        return {re, normal()};
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

inline StateVector random_state(const BasisPtr& basis, CounterRng& rng) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(basis->dim()));
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = rng.complex_normal();
    return StateVector(basis, v / v.norm());
}

/// Coordinates with unit mean spacing on [0, n), redrawn until the minimum gap exceeds min_gap.
inline std::vector<double> random_coordinates(int n, CounterRng& rng, double min_gap = 0.2) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int attempt = 0; attempt < 10000; ++attempt) {
        for (auto& xi : x) xi = rng.uniform(0.0, static_cast<double>(n));
        if (min_pairwise_gap(x) > min_gap) return x;
    }
    // Dense fallback: evenly spaced with bounded jitter always satisfies the gap.
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = i + rng.uniform(-0.25, 0.25);
    return x;
}

/// Distinct integers from {1, ..., 2N} jittered by at most +-0.2, so they stay distinct and non-zero.
inline std::vector<double> random_twists(int N, CounterRng& rng) {
    std::vector<int> pool(static_cast<std::size_t>(2 * N));
    std::iota(pool.begin(), pool.end(), 1);
    for (std::size_t k = pool.size(); k > 1; --k)
        std::swap(pool[k - 1], pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(k) - 1))]);
    std::vector<double> g(static_cast<std::size_t>(N));
    for (int a = 0; a < N; ++a) g[static_cast<std::size_t>(a)] = pool[static_cast<std::size_t>(a)] + rng.uniform(-0.2, 0.2);
    return g;
}

/// A random composition of n into N non-negative parts whose subspace fits in max_dim.
inline WeightVector random_weight(int n, int N, CounterRng& rng, std::size_t max_dim = kDefaultDimensionCap,
                                  int min_part = 0) {
    if (min_part * N > n) min_part = 0;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        WeightVector w{std::vector<int>(static_cast<std::size_t>(N), min_part)};
        for (int k = min_part * N; k < n; ++k) ++w.M[static_cast<std::size_t>(rng.uniform_int(0, N - 1))];
        if (multinomial(w.M) <= max_dim) return w;
    }
    WeightVector w{std::vector<int>(static_cast<std::size_t>(N), 0)};
    w.M[0] = n;
    return w;
}

struct InstanceRanges {
    int n_min = 2, n_max = 6;
    int N_min = 2, N_max = 3;
    double kappa_min = 0.1, kappa_max = 1.0;
    double hbar_min = 0.5, hbar_max = 1.5;
    double gamma_min = 0.2, gamma_max = 1.0;
    std::size_t max_dim = 400;
    int min_part = 0;
    bool require_n_ge_N = true;
};

struct Instance {
    ModelParams params;
    WeightVector weight;
};

inline Instance random_instance(Kind kind, const InstanceRanges& r, CounterRng& rng) {
    Instance inst;
    int N = rng.uniform_int(r.N_min, r.N_max);
    int n = rng.uniform_int(r.n_min, r.n_max);
    if (r.require_n_ge_N && n < N) n = N;
    inst.params.kind = kind;
    inst.params.x = random_coordinates(n, rng);
    inst.params.g = random_twists(N, rng);
    inst.params.kappa = rng.uniform(r.kappa_min, r.kappa_max);
    inst.params.hbar = rng.uniform(r.hbar_min, r.hbar_max);
    inst.params.gamma = kind == Kind::Trigonometric ? rng.uniform(r.gamma_min, r.gamma_max) : 0.0;
    inst.weight = random_weight(n, N, rng, r.max_dim, r.min_part);
    return inst;
}

}  // namespace kzcal
