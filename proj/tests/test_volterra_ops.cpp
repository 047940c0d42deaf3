#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "support.hpp"
#include "svlq/volterra_ops.hpp"

using namespace svlq;
using namespace svlq::testing;

TEST(Rint, PointwiseProduct) {
    const TimeGrid g = make_grid(1.0, 8);
    PiPair P = PiPair::zero(g, 1);
    for (int k = 0; k <= 8; ++k) P.P1(k)(0, 0) = 3.0;
    const TriangleKernel M = TriangleKernel::family(g, Mat::Constant(1, 1, 2.0), 1.0);
    const TriangleKernel R = rint(P, M);
    for (int i = 0; i <= 8; ++i)
        for (int k = 0; k <= i; ++k) EXPECT_DOUBLE_EQ(R(i, k)(0, 0), 6.0);
}

TEST(Rint, TailLength) {
    const TimeGrid g = make_grid(1.0, 8);
    PiPair P = PiPair::zero(g, 1);
    for (int k = 0; k <= 8; ++k)
        for (int i = k; i <= 8; ++i)
            for (int j = k; j <= i; ++j) P.P2.set(i, j, k, Mat::Ones(1, 1));
    const TriangleKernel R = rint(P, TriangleKernel::family(g, Mat::Ones(1, 1), 1.0));
    for (int i = 0; i <= 8; ++i)
        for (int k = 0; k <= i; ++k) EXPECT_NEAR(R(i, k)(0, 0), 1.0 - g.t(k), 1e-15);
}

TEST(Rint, MatchesBruteForceOnRandomInstances) {
    std::mt19937_64 rng(11);
    const TimeGrid g = make_grid(1.0, 16);
    for (int d : {1, 2, 3}) {
        const PiPair P = random_pi(g, rng, d);
        const TriangleKernel sampled = random_kernel(g, rng, d, 2);
        const TriangleKernel fam = TriangleKernel::family(g, random_matrix(rng, d, 2), 0.7);
        for (const TriangleKernel* M : {&sampled, &fam}) {
            const TriangleKernel R = rint(P, *M);
            for (int k = 0; k <= 16; ++k)
                for (int i = k; i <= 16; ++i)
                    EXPECT_LE((Mat(R(i, k)) - brute_rint(P, *M, i, k)).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(Lint, AdjointIdentityIsExact) {
    std::mt19937_64 rng(12);
    const TimeGrid g = make_grid(1.0, 16);
    const PiPair P = random_pi(g, rng, 2);
    const TriangleKernel M = random_kernel(g, rng, 2, 3);
    const TriangleKernel lhs = lint(M.transpose(), P);
    const TriangleKernel rhs = rint(P, M).transpose();
    EXPECT_EQ(lhs.raw(), rhs.raw());
}

TEST(Lint, IdentityP1) {
    const TimeGrid g = make_grid(1.0, 6);
    PiPair P = PiPair::zero(g, 2);
    for (int k = 0; k <= 6; ++k) P.P1(k) = Mat::Identity(2, 2);
    Mat row(1, 2);
    row << 1, 0;
    const TriangleKernel L = lint(TriangleKernel::family(g, row, 1.0), P);
    for (int i = 0; i <= 6; ++i)
        for (int k = 0; k <= i; ++k) EXPECT_EQ(Mat(L(i, k)), row);
}

TEST(Lint, MatchesBruteForce) {
    std::mt19937_64 rng(13);
    const TimeGrid g = make_grid(1.0, 16);
    const PiPair P = random_pi(g, rng, 2);
    const TriangleKernel M = random_kernel(g, rng, 2, 2);  // M(t, s) in c x d orientation
    const TriangleKernel L = lint(M, P);
    for (int k = 0; k <= 16; ++k)
        for (int i = k; i <= 16; ++i) {
            const Mat expect = brute_rint(P, M.transpose(), i, k).transpose();
            EXPECT_LE((Mat(L(i, k)) - expect).cwiseAbs().maxCoeff(), 1e-12);
        }
}

TEST(Sandwich, TailLengthExamples) {
    const TimeGrid g = make_grid(1.0, 10);
    const TriangleKernel one = TriangleKernel::family(g, Mat::Ones(1, 1), 1.0);
    PiPair P = PiPair::zero(g, 1);
    for (int k = 0; k <= 10; ++k) P.P1(k)(0, 0) = 1.0;
    MatrixField s = sandwich(one, P, one);
    for (int k = 0; k <= 10; ++k) EXPECT_NEAR(s(k)(0, 0), 1.0 - g.t(k), 1e-15);

    PiPair Q = PiPair::zero(g, 1);
    for (int k = 0; k <= 10; ++k)
        for (int i = k; i <= 10; ++i)
            for (int j = k; j <= i; ++j) Q.P2.set(i, j, k, Mat::Constant(1, 1, 0.7));
    s = sandwich(one, Q, one);
    for (int k = 0; k <= 10; ++k)
        EXPECT_NEAR(s(k)(0, 0), 0.7 * (1.0 - g.t(k)) * (1.0 - g.t(k)), 1e-14);
}

TEST(Sandwich, MatchesBruteForceOnRandomInstances) {
    std::mt19937_64 rng(14);
    const TimeGrid g = make_grid(1.0, 16);
    const PiPair P = random_pi(g, rng, 2);
    const TriangleKernel M1 = random_kernel(g, rng, 3, 2);
    const TriangleKernel M2 = random_kernel(g, rng, 2, 1);
    const TriangleKernel F1 = TriangleKernel::family(g, random_matrix(rng, 3, 2), 0.8);
    const TriangleKernel F2 = TriangleKernel::family(g, random_matrix(rng, 2, 1), 0.65);
    const std::pair<const TriangleKernel*, const TriangleKernel*> cases[] = {
        {&M1, &M2}, {&F1, &M2}, {&M1, &F2}, {&F1, &F2}};
    for (auto [a, b] : cases) {
        const MatrixField s = sandwich(*a, P, *b);
        for (int k = 0; k <= 16; ++k)
            EXPECT_LE((Mat(s(k)) - brute_sandwich(*a, P, *b, k)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Sandwich, SymmetricForTransposedPair) {
    std::mt19937_64 rng(15);
    const TimeGrid g = make_grid(1.0, 12);
    const PiPair P = random_pi(g, rng, 3);
    const TriangleKernel M = random_kernel(g, rng, 3, 2);
    const MatrixField s = sandwich(M.transpose(), P, M);
    for (int k = 0; k <= 12; ++k) EXPECT_EQ(Mat(s(k)), Mat(s(k)).transpose());
}

TEST(KernelAlgebra, LinearInEachArgument) {
    std::mt19937_64 rng(16);
    const TimeGrid g = make_grid(1.0, 10);
    const PiPair P = random_pi(g, rng, 2), Q = random_pi(g, rng, 2);
    const TriangleKernel M = random_kernel(g, rng, 2, 2), N = random_kernel(g, rng, 2, 2);
    const double a = 0.7, b = -1.3;
    TriangleKernel MN = TriangleKernel::zero(g, 2, 2);
    for (int i = 0; i <= 10; ++i)
        for (int j = 0; j <= i; ++j) MN.mut(i, j) = a * Mat(M(i, j)) + b * Mat(N(i, j));
    PiPair PQ = PiPair::zero(g, 2);
    for (int k = 0; k <= 10; ++k) {
        PQ.P1(k) = a * Mat(P.P1(k)) + b * Mat(Q.P1(k));
        for (int i = k; i <= 10; ++i)
            for (int j = k; j <= i; ++j)
                PQ.P2.set(i, j, k, a * P.P2.get(i, j, k) + b * Q.P2.get(i, j, k));
    }
    const TriangleKernel r1 = rint(P, MN), rm = rint(P, M), rn = rint(P, N);
    const TriangleKernel r2 = rint(PQ, M), rp = rint(P, M), rq = rint(Q, M);
    const MatrixField s1 = sandwich(MN.transpose(), P, M), sm = sandwich(M.transpose(), P, M),
                      sn = sandwich(N.transpose(), P, M);
    const MatrixField s2 = sandwich(M.transpose(), P, MN), sn2 = sandwich(M.transpose(), P, N);
    for (int k = 0; k <= 10; ++k) {
        for (int i = k; i <= 10; ++i) {
            EXPECT_LE((Mat(r1(i, k)) - a * Mat(rm(i, k)) - b * Mat(rn(i, k))).norm(), 1e-12);
            EXPECT_LE((Mat(r2(i, k)) - a * Mat(rp(i, k)) - b * Mat(rq(i, k))).norm(), 1e-12);
        }
        EXPECT_LE((Mat(s1(k)) - a * Mat(sm(k)) - b * Mat(sn(k))).norm(), 1e-11);
        EXPECT_LE((Mat(s2(k)) - a * Mat(sm(k)) - b * Mat(sn2(k))).norm(), 1e-11);
    }
}

TEST(Resolvent, ZeroKernel) {
    const TimeGrid g = make_grid(1.0, 8);
    EXPECT_TRUE(resolvent(TriangleKernel::zero(g, 2, 2)).is_zero());
}

TEST(Resolvent, ExponentialWithinOnePercent) {
    const TimeGrid g = make_grid(1.0, 256);
    const TriangleKernel K = TriangleKernel::family(g, Mat::Ones(1, 1), 1.0);
    const TriangleKernel F = resolvent(K);
    EXPECT_NEAR(F(256, 0)(0, 0), std::exp(1.0), 0.01 * std::exp(1.0));
    // first-order grid error
    const TriangleKernel F2 = resolvent(TriangleKernel::family(make_grid(1.0, 512), Mat::Ones(1, 1), 1.0));
    const double r = (std::exp(1.0) - F(256, 0)(0, 0)) / (std::exp(1.0) - F2(512, 0)(0, 0));
    EXPECT_NEAR(r, 2.0, 0.1);
    EXPECT_LE(resolvent_residual(K, F), 1e-10);
}

TEST(Resolvent, NilpotentKernel) {
    const TimeGrid g = make_grid(1.0, 16);
    Mat K0(2, 2);
    K0 << 0, 1, 0, 0;
    const TriangleKernel F = resolvent(TriangleKernel::family(g, K0, 1.0));
    for (int i = 1; i <= 16; ++i)
        for (int j = 0; j < i; ++j) EXPECT_LE((Mat(F(i, j)) - K0).norm(), 1e-15);
}

TEST(Resolvent, ResidualOnRandomAndSingularKernels) {
    std::mt19937_64 rng(17);
    const TimeGrid g = make_grid(1.0, 32);
    const TriangleKernel K = random_kernel(g, rng, 3, 3);
    EXPECT_LE(resolvent_residual(K, resolvent(K)), 1e-10);
    const TriangleKernel S = TriangleKernel::family(g, random_matrix(rng, 2, 2), 0.6);
    EXPECT_LE(resolvent_residual(S, resolvent(S)), 1e-10);
}

TEST(MeanState, NoDynamics) {
    const Problem p = scalar_problem(16, 0, 0, 0, 0, 1, 1);
    const Strategy s = Strategy::zero(p.grid, 1, 1);
    const MeanFlow mf = mean_state(s.Xi, s.Gamma, p, p.x, s.v, 0);
    for (int i = 0; i <= 16; ++i) {
        EXPECT_EQ(mf.X(i)(0, 0), 1.0);
        for (int m = 0; m <= i; ++m) EXPECT_EQ(mf.Theta(i, m)(0, 0), 1.0);
    }
}

TEST(MeanState, ExponentialGrowth) {
    const Problem p = scalar_problem(256, 1, 0, 0, 0, 1, 1);
    const Strategy s = Strategy::zero(p.grid, 1, 1);
    const MeanFlow mf = mean_state(s.Xi, s.Gamma, p, p.x, s.v, 0);
    EXPECT_NEAR(mf.X(256)(0, 0), std::exp(1.0), 3.0 * std::exp(1.0) / 256);
    for (int i = 0; i <= 256; ++i)
        EXPECT_NEAR(mf.Theta(i, i)(0, 0), mf.X(i)(0, 0), 1e-12 * mf.X(i)(0, 0));
}

TEST(MeanState, FeedbackDecay) {
    const Problem p = scalar_problem(256, 0, 1, 0, 0, 1, 1);
    Strategy s = Strategy::zero(p.grid, 1, 1);
    for (int k = 0; k <= 256; ++k) s.Xi(k)(0, 0) = -1.0;
    const MeanFlow mf = mean_state(s.Xi, s.Gamma, p, p.x, s.v, 0);
    EXPECT_NEAR(mf.X(256)(0, 0), std::exp(-1.0), 2.0 * std::exp(-1.0) / 256);
    for (int k = 0; k <= 256; ++k) EXPECT_NEAR(mf.u(k)(0, 0), -mf.X(k)(0, 0), 1e-14);
}

// Independent recursion: step the mean forward state directly.
TEST(MeanState, MatchesDirectForwardRecursion) {
    std::mt19937_64 rng(18);
    const int N = 20;
    Problem p = scalar_problem(N, 0, 0, 0, 0, 1, 1);
    p.d = 2;
    p.l = 1;
    p.A = random_kernel(p.grid, rng, 2, 2);
    p.B = TriangleKernel::family(p.grid, random_matrix(rng, 2, 1), 0.7);
    p.b = random_kernel(p.grid, rng, 2, 1);
    const MatrixField x = random_field(p.grid, rng, 2, 1);
    Strategy s{random_field(p.grid, rng, 1, 2), random_kernel(p.grid, rng, 1, 2),
               random_field(p.grid, rng, 1, 1)};
    const int t0 = 3;
    const MeanFlow mf = mean_state(s.Xi, s.Gamma, p, x, s.v, t0);

    std::vector<Vec> theta(N + 1);
    for (int i = 0; i <= N; ++i) theta[i] = x(i);
    for (int m = t0; m <= N; ++m) {
        const Vec X = theta[m];
        Vec u = s.Xi(m) * X + s.v(m).col(0);
        for (int j = m; j < N; ++j) u += s.Gamma.shape(j, m) * s.Gamma.first_weight(j, m) * theta[j];
        EXPECT_LE((X - mf.X(m).col(0)).norm(), 1e-11) << m;
        EXPECT_LE((u - mf.u(m).col(0)).norm(), 1e-11) << m;
        for (int i = m; i <= N; ++i) EXPECT_LE((theta[i] - mf.Theta(i, m).col(0)).norm(), 1e-11);
        for (int i = m + 1; i <= N; ++i)
            theta[i] += p.A.shape(i, m) * p.A.second_weight(i, m) * X +
                        p.B.shape(i, m) * p.B.second_weight(i, m) * u +
                        p.b.shape(i, m) * p.b.second_weight(i, m);
    }
}
