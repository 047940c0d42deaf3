#pragma once

#include <algorithm>

#include "svlq/fields.hpp"

namespace svlq {

struct SolverOptions {
    double tol = 1e-10;
    int max_inner = 50;
};

struct LyapunovRHS {
    MatrixField Q1;  // d x d, symmetric
    TriangleKernel Q2;
    Pyramid Q3;
};

/// Q¹[Ξ], Q²[Ξ, Γ], Q³[Γ] for the problem weights.
LyapunovRHS lyapunov_rhs(const MatrixField& Xi, const TriangleKernel& Gamma, const Problem& p);

struct GainCoefficients {
    MatrixField F1;
    TriangleKernel F2;
    Pyramid F3;
    LyapunovRHS rhs;
};

GainCoefficients gain_coefficients(const MatrixField& Xi, const TriangleKernel& Gamma,
                                   const PiPair& P, const Problem& p);

/// Backward march from t_N with an inner fixed point at every level.
/// Throws SolverDivergence if a level does not settle within max_inner sweeps.
PiPair solve_lyapunov(const MatrixField& Xi, const TriangleKernel& Gamma, const LyapunovRHS& rhs,
                      const Problem& p, const SolverOptions& opts = {});

/// Same equation with the inhomogeneity generated from the gains on the fly.
PiPair solve_lyapunov(const MatrixField& Xi, const TriangleKernel& Gamma, const Problem& p,
                      const SolverOptions& opts = {});

struct LyapunovResidual {
    double p1 = 0, boundary = 0, interior = 0;
    double max() const { return std::max({p1, boundary, interior}); }
};

LyapunovResidual lyapunov_residual(const MatrixField& Xi, const TriangleKernel& Gamma,
                                   const LyapunovRHS& rhs, const PiPair& P, const Problem& p);

/// ∫ <P¹x, x> + ∬ <P²(s1, s2, t0) x(s2), x(s1)> over [t_{t0}, T].
double quadratic_form(const PiPair& P, int t0, const MatrixField& x);

}  // namespace svlq
