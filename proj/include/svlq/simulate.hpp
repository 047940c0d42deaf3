#pragma once

#include <cstdint>
#include <vector>

#include "svlq/fields.hpp"
#include "svlq/lyapunov.hpp"

namespace svlq {

/// Standard normal draw for (seed, path, step); independent of scheduling.
double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step);

struct SimBatch {
    int n_paths = 0, d = 1, l = 1, N = 0, t0 = 0;
    std::uint64_t seed = 0;
    std::vector<double> X;      // [path][node][d]
    std::vector<double> u;      // [path][node][l]
    std::vector<char> flagged;  // non-finite path
    int flagged_count = 0;

    Eigen::Map<const Vec> state(int path, int node) const {
        return {X.data() + (static_cast<std::size_t>(path) * (N + 1) + node) * d, d};
    }
    Eigen::Map<const Vec> control(int path, int node) const {
        return {u.data() + (static_cast<std::size_t>(path) * (N + 1) + node) * l, l};
    }
};

/// Euler–Maruyama for the closed loop under (Ξ, Γ, v). The forward state
/// Θ(s_i, t_m) for all i > m is carried along and advanced once per step.
SimBatch simulate_closed_loop(const Problem& p, const Strategy& s, int t0, const MatrixField& x,
                              int n_paths, std::uint64_t seed, int workers = 1);

struct CostEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    int used_paths = 0;
};

std::vector<double> path_costs(const SimBatch& batch, const Problem& p);
CostEstimate estimate_cost(const SimBatch& batch, const Problem& p);

struct FrechetReport {
    std::vector<double> mus, costs;
    double c0 = 0, c1 = 0, c2 = 0;        // quadratic through the first three μ
    double held_out_residual = 0.0;       // max relative misfit at the remaining μ
    double linear_coef = 0.0;             // c1, mean of the pathwise fits
    double linear_stderr = 0.0;
    double predicted_linear = 0.0;        // <D_v J, ṽ> from (P, η, κ) and the mean flow
};

FrechetReport frechet_check(const Problem& p, const Strategy& base, const MatrixField& direction,
                            int t0, const MatrixField& x, const std::vector<double>& mus,
                            int n_paths, std::uint64_t seed, int workers = 1,
                            const SolverOptions& opts = {});

struct DualityReport {
    double lhs = 0, rhs = 0, residual = 0;
};

DualityReport duality_check(const MatrixField& Xi, const TriangleKernel& Gamma,
                            const TriangleKernel& chi, const MatrixField& psi, const MatrixField& v,
                            int t0, const MatrixField& x, const Problem& p,
                            const SolverOptions& opts = {});

struct OrderingReport {
    CostEstimate optimal;
    std::vector<CostEstimate> perturbed;
    std::vector<double> gain_shift, feedforward_shift;
    bool ordered = false;  // every perturbed mean >= optimal mean - 2 SE
};

/// Costs of (Ξ̌ + δ, Γ̌, v̂ + δ') for fixed shifts against the optimal one,
/// all under common random numbers.
OrderingReport optimality_ordering(const Problem& p, const Strategy& optimal, int t0,
                                   const MatrixField& x, int n_paths, std::uint64_t seed,
                                   int workers = 1);

}  // namespace svlq
