#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "svlq/ebsvie.hpp"
#include "svlq/riccati.hpp"

using namespace svlq;
using namespace svlq::testing;

namespace {

struct Optimal {
    RiccatiSolution sol;
    Feedforward ff;
};

Optimal solve(const Problem& p) {
    RiccatiSolution sol = kleinman_solve(p);
    Feedforward ff = optimal_inhomogeneous(sol.P, sol.Xi_check, sol.Gamma_check, p);
    return {std::move(sol), std::move(ff)};
}

}  // namespace

TEST(Ebsvie, ZeroDataGivesZero) {
    const Problem p = scalar_problem(16, 1, 1, 0.5, 0.5, 1, 1);
    const Strategy s = Strategy::zero(p.grid, 1, 1);
    const EtaField e = solve_ebsvie(s.Xi, s.Gamma, TriangleKernel::zero(p.grid, 1, 1),
                                    MatrixField::zero(p.grid, 1, 1), p);
    EXPECT_TRUE(e.eta.is_zero());
    EXPECT_TRUE(e.zeta.is_zero());
}

TEST(Ebsvie, NoDynamicsCopiesPsi) {
    const Problem p = scalar_problem(16, 0, 0, 0, 0, 1, 1);
    const Strategy s = Strategy::zero(p.grid, 1, 1);
    const MatrixField q = MatrixField::from_function(p.grid, 1, 1, [](double t) {
        return Mat::Constant(1, 1, 1.0 + t * t);
    });
    const EtaField e = solve_ebsvie(s.Xi, s.Gamma, TriangleKernel::zero(p.grid, 1, 1), q, p);
    for (int i = 0; i <= 16; ++i)
        for (int j = 0; j <= i; ++j) EXPECT_EQ(e.eta(i, j)(0, 0), q(i)(0, 0));
}

TEST(Ebsvie, ExponentialDiagonal) {
    double prev_err = 0.0;
    for (int N : {128, 256}) {
        const Problem p = scalar_problem(N, 1, 0, 0, 0, 1, 1);
        const Strategy s = Strategy::zero(p.grid, 1, 1);
        const EtaField e = solve_ebsvie(s.Xi, s.Gamma, TriangleKernel::zero(p.grid, 1, 1),
                                        MatrixField::constant(p.grid, Mat::Ones(1, 1)), p);
        const double err = std::abs(e.eta(0, 0)(0, 0) - std::exp(1.0));
        EXPECT_LE(err, 2.0 * std::exp(1.0) / N);
        // η(t, s) does not depend on s here.
        for (int j = 0; j <= N / 2; ++j) EXPECT_NEAR(e.eta(N / 2, j)(0, 0), e.eta(N / 2, N / 2)(0, 0), 1e-12);
        if (prev_err > 0) EXPECT_NEAR(prev_err / err, 2.0, 0.2);
        prev_err = err;
    }
}

TEST(Feedforward, HomogeneousGivesZero) {
    const Optimal o = solve(tanh_problem(32));
    EXPECT_TRUE(o.ff.eta.eta.is_zero());
    for (int k = 0; k <= 32; ++k) {
        EXPECT_EQ(o.ff.kappa(k)(0, 0), 0.0);
        EXPECT_EQ(o.ff.v_hat(k)(0, 0), 0.0);
    }
}

TEST(Feedforward, OnlyControlWeightOffset) {
    json cfg = scalar_config(32, 0.7, 0, 0.4, 0, 1, 2);
    cfg["inhomogeneous"]["rho"] = {{"family", "polynomial"}, {"coefficients", {1.0, -0.5}}};
    const Problem p = build_problem(cfg);
    const Optimal o = solve(p);
    for (int k = 0; k <= 32; ++k) {
        EXPECT_NEAR(o.ff.kappa(k)(0, 0), p.rho(k)(0, 0), 1e-14);
        EXPECT_NEAR(o.ff.v_hat(k)(0, 0), -p.rho(k)(0, 0) / 2.0, 1e-14);
    }
}

TEST(Feedforward, DiffusionOnlyWithNoise) {
    const Problem p = d_only_problem(128, 1.0);
    const Optimal o = solve(p);
    for (int k = 0; k <= 128; ++k) {
        const double t = p.grid.t(k);
        EXPECT_NEAR(o.ff.kappa(k)(0, 0), 1.0 - t, 1e-12);
        EXPECT_NEAR(o.ff.v_hat(k)(0, 0), -(1.0 - t) / (2.0 - t), 1e-6);
        EXPECT_LE(o.ff.range_residual[k], 1e-12);
    }
    const double exact = 0.5 - (std::log(2.0) - 0.5);
    EXPECT_NEAR(value_functional(o.sol.P, o.ff.eta, o.ff.kappa, 0, p.x, p), exact, 0.01 * exact);
}

TEST(ValueFunctional, UnitFormAndPointwiseMinimum) {
    const Problem p = scalar_problem(16, 0, 0, 0, 0, 1, 1);
    const Optimal o = solve(p);
    EXPECT_NEAR(value_functional(o.sol.P, o.ff.eta, o.ff.kappa, 0, p.x, p), 1.0, 1e-14);

    json cfg = scalar_config(50, 0, 0, 0, 0, 0, 1);
    cfg["inhomogeneous"]["rho"] = 1.0;
    cfg["input"]["x"] = 0.0;
    const Problem r = build_problem(cfg);
    const Optimal orr = solve(r);
    EXPECT_NEAR(value_functional(orr.sol.P, orr.ff.eta, orr.ff.kappa, 0, r.x, r), -1.0, 1e-13);
}

TEST(ValueFunctional, OptimalFeedforwardMinimizesRepresentedCost) {
    const Problem p = d_only_problem(64, 1.0);
    const Optimal o = solve(p);
    const double V = value_functional(o.sol.P, o.ff.eta, o.ff.kappa, 0, p.x, p);
    const Strategy opt{o.sol.Xi_check, o.sol.Gamma_check, o.ff.v_hat};
    const Feedforward fo = strategy_inhomogeneous(o.sol.P, opt, p);
    EXPECT_NEAR(represented_cost(o.sol.P, fo.eta, fo.kappa, opt.v, 0, p.x, p), V, 1e-12);
    for (double shift : {-0.3, 0.2}) {
        Strategy s = opt;
        for (int k = 0; k <= 64; ++k) s.v(k)(0, 0) += shift;
        const Feedforward f = strategy_inhomogeneous(o.sol.P, s, p);
        EXPECT_GT(represented_cost(o.sol.P, f.eta, f.kappa, s.v, 0, p.x, p), V);
    }
}

TEST(Feedforward, RangeResidualVanishesUnderStrongRegularity) {
    json cfg = scalar_config(40, 0.5, 1.0, 0.3, 0.5, 1, 1, 0.2);
    cfg["inhomogeneous"] = {{"b", {{"family", "constant"}, {"c", 0.3}}},
                            {"sigma", {{"family", "constant"}, {"c", 0.4}}},
                            {"q", 0.2},
                            {"rho", -0.1}};
    const Problem p = build_problem(cfg);
    const Optimal o = solve(p);
    ASSERT_TRUE(o.sol.regularity.strongly_regular);
    for (double r : o.ff.range_residual) EXPECT_LE(r, 1e-12);
}
