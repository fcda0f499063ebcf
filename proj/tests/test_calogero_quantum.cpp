#include "kzcal/calogero_quantum.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace kzcal;

namespace {

// d^order H_i / dx_i^order from the closed forms of the pair kernels (order 1 or 2).
oracle::Mat hamiltonian_self_derivative(const ModelParams& p, const std::vector<int>& M, int i, int order) {
    const int n = p.n(), N = p.N();
    const auto D = static_cast<Eigen::Index>(std::pow(N, n));
    oracle::Mat out = oracle::Mat::Zero(D, D);
    for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = p.x[static_cast<std::size_t>(i)] - p.x[static_cast<std::size_t>(j)];
        double c;
        if (p.kind == Kind::Rational) {
            c = order == 1 ? -p.kappa / (d * d) : 2.0 * p.kappa / (d * d * d);
        } else {
            const double s = std::sinh(p.gamma * d), ch = std::cosh(p.gamma * d);
            c = order == 1 ? -p.kappa * p.gamma * p.gamma / (s * s)
                           : 2.0 * p.kappa * std::pow(p.gamma, 3) * ch / (s * s * s);
        }
        out += c * oracle::perm(N, n, i, j);
    }
    return oracle::restrict_to(out, oracle::sector(N, n, M));
}

double pair_potential_sum(const ModelParams& p) {
    double v = 0.0;
    for (int i = 0; i < p.n(); ++i)
        for (int j = 0; j < p.n(); ++j) {
            if (i == j) continue;
            const double d = p.x[static_cast<std::size_t>(i)] - p.x[static_cast<std::size_t>(j)];
            const double s = p.kind == Kind::Rational ? d : std::sinh(p.gamma * d) / p.gamma;
            v += p.kappa * (p.kappa - p.hbar) / (s * s);
        }
    return v;
}

// Sum_a M_a g_a^k plus the trigonometric shift, summed independently of the library.
double energy(const ModelParams& p, const std::vector<int>& M, int k) {
    double e = 0.0;
    for (std::size_t a = 0; a < M.size(); ++a) e += M[a] * std::pow(p.g[a], k);
    if (p.kind == Kind::Trigonometric && k == 2)
        for (int m : M) e += p.kappa * p.kappa * p.gamma * p.gamma * m * (m * m - 1) / 3.0;
    return e;
}

Eigen::RowVectorXcd ones_row(Eigen::Index d) { return Eigen::RowVectorXcd::Ones(d); }

double oracle_h2_residual(const ModelParams& p, const std::vector<int>& M) {
    oracle::Mat S;
    for (int i = 0; i < p.n(); ++i) {
        const auto H = oracle::hamiltonian(p, M, i);
        const oracle::Mat t = p.hbar * hamiltonian_self_derivative(p, M, i, 1) + H * H;
        S = i == 0 ? t : oracle::Mat(S + t);
    }
    const double e = energy(p, M, 2);
    Eigen::RowVectorXcd row = ones_row(S.rows()) * S;
    row.array() -= pair_potential_sum(p) + e;
    return row.cwiseAbs().maxCoeff() / std::max(1.0, std::abs(e));
}

double oracle_h3_residual(const ModelParams& p, const std::vector<int>& M) {
    const double h = p.hbar, c = 3.0 * p.kappa * (p.kappa - p.hbar);
    oracle::Mat S;
    for (int i = 0; i < p.n(); ++i) {
        const auto H = oracle::hamiltonian(p, M, i);
        const auto d1 = hamiltonian_self_derivative(p, M, i, 1), d2 = hamiltonian_self_derivative(p, M, i, 2);
        double w = 0.0;
        for (int j = 0; j < p.n(); ++j)
            if (j != i) w += 1.0 / std::pow(p.x[static_cast<std::size_t>(i)] - p.x[static_cast<std::size_t>(j)], 2);
        const oracle::Mat t = h * h * d2 + 2.0 * h * d1 * H + h * H * d1 + H * H * H - c * w * H;
        S = i == 0 ? t : oracle::Mat(S + t);
    }
    const double e = energy(p, M, 3);
    Eigen::RowVectorXcd row = ones_row(S.rows()) * S;
    row.array() -= e;
    return row.cwiseAbs().maxCoeff() / std::max(1.0, std::abs(e));
}

std::vector<Instance> random_instances(Kind kind, std::uint64_t seed, int count, int n_max, std::size_t max_dim) {
    CounterRng rng(seed);
    InstanceRanges r;
    r.n_max = n_max;
    r.max_dim = max_dim;
    std::vector<Instance> out;
    for (int k = 0; k < count; ++k) out.push_back(random_instance(kind, r, rng));
    return out;
}

}  // namespace

TEST(CalogeroEnergy, Examples) {
    ModelParams t{{0.0, 0.7}, {1.0, 2.0}, 1.0, 0.5, 1.0, Kind::Trigonometric};
    EXPECT_NEAR(calogero_energy(WeightVector{{2, 0}}, t, 2), 2.5, 1e-15);
    EXPECT_NEAR(calogero_energy(WeightVector{{1, 1}}, t, 2), 5.0, 1e-15);  // M_a = 1 carries no shift

    ModelParams r{{0.0, 1.0, 2.5}, {0.5, -1.0, 2.0}, 1.0, 0.4, 0.0, Kind::Rational};
    EXPECT_NEAR(calogero_energy(WeightVector{{1, 1, 1}}, r, 2), 0.25 + 1.0 + 4.0, 1e-15);
    EXPECT_NEAR(calogero_energy(WeightVector{{1, 1, 1}}, r, 3), 0.125 - 1.0 + 8.0, 1e-15);
    EXPECT_NEAR(momentum_eigenvalue(WeightVector{{1, 1, 1}}, r), 1.5, 1e-15);

    EXPECT_THROW(calogero_energy(WeightVector{{1, 1}}, t, 3), Error);
    EXPECT_THROW(calogero_energy(WeightVector{{1, 1}}, t, 4), Error);
    EXPECT_THROW(calogero_energy(WeightVector{{1, 1, 0}}, t, 2), Error);
}

TEST(CalogeroEnergy, Homogeneity) {
    // g -> c g, kappa -> c kappa scales E_k by c^k
    ModelParams t{{0.0, 0.7, 1.9}, {1.0, -0.3}, 1.0, 0.5, 0.8, Kind::Trigonometric};
    const WeightVector w{{2, 1}};
    const double c = 1.7;
    auto s = t;
    for (auto& g : s.g) g *= c;
    s.kappa *= c;
    EXPECT_NEAR(calogero_energy(w, s, 2), c * c * calogero_energy(w, t, 2), 1e-13);
    t.kind = s.kind = Kind::Rational;
    EXPECT_NEAR(calogero_energy(w, s, 3), c * c * c * calogero_energy(w, t, 3), 1e-13);
}

TEST(Covectors, HandInstance) {
    const ModelParams p{{0.0, 1.0}, {1.0, 2.0}, 1.0, 0.3, 0.0, Kind::Rational};
    const WeightVector w{{1, 1}};
    EXPECT_LT(h2_covector_residual(p, w), 1e-13);
    EXPECT_LT(h3_covector_residual(p, w), 1e-12);
    EXPECT_LT(momentum_covector_residual(p, w), 1e-14);
    EXPECT_LT(oracle_h2_residual(p, w.M), 1e-13);
    EXPECT_LT(oracle_h3_residual(p, w.M), 1e-12);
}

TEST(Covectors, DecoupledLimit) {
    for (Kind kind : {Kind::Rational, Kind::Trigonometric}) {
        ModelParams p{{0.0, 0.6, 1.5, 2.2}, {0.7, -1.1, 0.4}, 0.8, 0.0, kind == Kind::Rational ? 0.0 : 0.9, kind};
        const WeightVector w{{2, 1, 1}};
        EXPECT_LT(h2_covector_residual(p, w), 1e-14);
        EXPECT_LT(momentum_covector_residual(p, w), 1e-14);
        if (kind == Kind::Rational) {
            EXPECT_LT(h3_covector_residual(p, w), 1e-14);
        }
    }
}

TEST(Covectors, RandomInstancesBothKinds) {
    for (Kind kind : {Kind::Rational, Kind::Trigonometric})
        for (const auto& inst : random_instances(kind, kind == Kind::Rational ? 21 : 22, 20, 6, 400)) {
            EXPECT_LT(h2_covector_residual(inst.params, inst.weight), 1e-11);
            EXPECT_LT(momentum_covector_residual(inst.params, inst.weight), 1e-12);
            if (kind == Kind::Rational && inst.params.n() <= 5) {
                EXPECT_LT(h3_covector_residual(inst.params, inst.weight), 1e-10);
            }
        }
}

TEST(Covectors, AgreeWithDenseOracle) {
    for (Kind kind : {Kind::Rational, Kind::Trigonometric})
        for (const auto& inst : random_instances(kind, 23, 6, 4, 40)) {
            const auto& p = inst.params;
            KzConnection conn(p, inst.weight);
            EXPECT_LT(oracle_h2_residual(p, inst.weight.M), 1e-11);
            if (kind == Kind::Rational) {
                EXPECT_LT(oracle_h3_residual(p, inst.weight.M), 1e-10);
            }

            // the library covector itself, entry by entry
            oracle::Mat S = oracle::Mat::Zero(conn.basis()->dim(), conn.basis()->dim());
            for (int i = 0; i < p.n(); ++i) {
                const auto H = oracle::hamiltonian(p, inst.weight.M, i);
                S += p.hbar * hamiltonian_self_derivative(p, inst.weight.M, i, 1) + H * H;
            }
            Eigen::RowVectorXcd row = ones_row(S.rows()) * S;
            row.array() -= pair_potential_sum(p) + energy(p, inst.weight.M, 2);
            EXPECT_LT((h2_covector(conn) - row).cwiseAbs().maxCoeff(), 1e-11 * std::max(1.0, S.cwiseAbs().maxCoeff()));
        }
}

TEST(Covectors, EnergyOffsetIsDetected) {
    ModelParams p{{0.0, 1.0, 2.3}, {1.0, 2.0}, 1.0, 0.4, 0.0, Kind::Rational};
    const WeightVector w{{2, 1}};
    EXPECT_LT(oracle_h2_residual(p, w.M), 1e-13);
    KzConnection conn(p, w);
    auto row = h2_covector(conn);
    row.array() += 0.01;  // an energy offset of 0.01 must show up
    EXPECT_NEAR(row.cwiseAbs().maxCoeff(), 0.01, 1e-12);
    auto q = p;
    q.hbar = 0.7;
    KzConnection c2(q, w);
    EXPECT_LT(detail::max_abs(h2_covector(c2)), 1e-12);  // hbar enters consistently on both sides
}

TEST(PdeResidual, OnIntegratedSolutions) {
    CounterRng rng(31);
    for (Kind kind : {Kind::Rational, Kind::Trigonometric})
        for (const auto& inst : random_instances(kind, 32, 5, 5, 120)) {
            const auto& p = inst.params;
            KzConnection conn(p, inst.weight);
            auto far = p.x;
            const double d = 0.3 * min_pairwise_gap(p.x);
            far[0] += d;
            far[1] -= 0.5 * d;
            const auto phi = integrate_to(random_state(conn.basis(), rng), far, conn, 1e-10, 1e-12);
            auto moved = p;
            moved.x = far;
            KzConnection there(moved, inst.weight);
            const StateVector state(there.basis(), phi.amplitudes());
            const auto h2 = pde_residual_on_solution(state, there, kind == Kind::Rational ? Relation::H2Rational : Relation::H2Trig);
            EXPECT_FALSE(h2.degenerate);
            EXPECT_LT(h2.residual, 1e-9);
            EXPECT_EQ(h2.predicted_eigenvalue, cplx(calogero_energy(inst.weight, p, 2)));
            EXPECT_LT(pde_residual_on_solution(state, there, Relation::Momentum).residual, 1e-10);
            if (kind == Kind::Rational) {
                EXPECT_LT(pde_residual_on_solution(state, there, Relation::H3Rational).residual, 1e-8);
            }
        }
}

// Second derivatives of Psi from differences of integrated solutions, no covariant powers.
TEST(PdeResidual, ByDifferencesOnIntegratedSolutions) {
    CounterRng rng(33);
    for (Kind kind : {Kind::Rational, Kind::Trigonometric})
        for (const auto& inst : random_instances(kind, 34, 4, 4, 40)) {
            KzConnection conn(inst.params, inst.weight);
            const auto phi = random_state(conn.basis(), rng);
            const auto rep = pde_residual_by_differences(phi, conn);
            EXPECT_LT(rep.residual, 1e-8);
            EXPECT_EQ(rep.predicted_eigenvalue, cplx(calogero_energy(inst.weight, inst.params, 2)));

            // the potential term is far above the tolerance, so the check is sensitive to it
            EXPECT_GT(std::abs(pair_potential_sum(inst.params)) / std::abs(rep.predicted_eigenvalue), 1e-4);
        }
}

TEST(PdeResidual, DegenerateProjection) {
    const ModelParams p{{0.0, 1.0}, {1.0, 2.0}, 1.0, 0.3, 0.0, Kind::Rational};
    KzConnection conn(p, WeightVector{{1, 1}});
    Eigen::VectorXcd a(2);
    a << 1.0, -1.0;
    const auto rep = pde_residual_on_solution(StateVector(conn.basis(), a), conn, Relation::Momentum);
    EXPECT_TRUE(rep.degenerate);
    EXPECT_FALSE(rep.summary.empty());
}

TEST(PdeResidual, Errors) {
    const ModelParams p{{0.0, 1.0}, {1.0, 2.0}, 1.0, 0.3, 0.0, Kind::Rational};
    KzConnection conn(p, WeightVector{{1, 1}});
    const auto s = StateVector::uniform(conn.basis());
    EXPECT_THROW(pde_residual_on_solution(s, conn, Relation::H2Trig), Error);
    auto t = p;
    t.kind = Kind::Trigonometric;
    t.gamma = 0.5;
    KzConnection ct(t, WeightVector{{1, 1}});
    EXPECT_THROW(pde_residual_on_solution(StateVector::uniform(ct.basis()), ct, Relation::H3Rational), Error);
    EXPECT_THROW(pde_residual_on_solution(StateVector::uniform(ct.basis()), ct, Relation::H2Rational), Error);
    try {
        h3_covector_residual(t, WeightVector{{1, 1}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Unsupported);
    }
}
