#pragma once

#include "svlq/fields.hpp"
#include "svlq/lyapunov.hpp"

namespace svlq {

/// Solution of the deterministic-data backward Volterra system. The
/// martingale part vanishes for deterministic data and is kept as zeros.
struct EtaField {
    TriangleKernel eta;   // d x 1 on i >= j; the diagonal holds η(t, t)
    TriangleKernel zeta;  // identically zero
};

/// Backward march in s: interior η(t, s) stepped from s + h, then the diagonal
/// constraint solved from the updated column, inside a fixed point per level.
EtaField solve_ebsvie(const MatrixField& Xi, const TriangleKernel& Gamma, const TriangleKernel& chi,
                      const MatrixField& psi, const Problem& p, const SolverOptions& opts = {});

struct Feedforward {
    EtaField eta;
    MatrixField kappa;                  // l x 1
    MatrixField v_hat;                  // l x 1, = -M†κ
    std::vector<double> range_residual; // |(I - M M†)κ| per node
};

/// η, κ and v̂ for the optimal gains of a Riccati–Volterra solution P.
Feedforward optimal_inhomogeneous(const PiPair& P, const MatrixField& Xi_check,
                                  const TriangleKernel& Gamma_check, const Problem& p,
                                  const SolverOptions& opts = {});

/// η and κ for an arbitrary strategy (Ξ, Γ, v), with P its Lyapunov solution.
Feedforward strategy_inhomogeneous(const PiPair& P, const Strategy& s, const Problem& p,
                                   const SolverOptions& opts = {});

double value_functional(const PiPair& P, const EtaField& eta, const MatrixField& kappa, int t0,
                        const MatrixField& x, const Problem& p);

/// Cost of (Ξ, Γ, v) at (t0, x) from its representation through (P, η, κ).
double represented_cost(const PiPair& P, const EtaField& eta, const MatrixField& kappa,
                        const MatrixField& v, int t0, const MatrixField& x, const Problem& p);

}  // namespace svlq
