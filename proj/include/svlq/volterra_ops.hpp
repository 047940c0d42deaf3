#pragma once

#include "svlq/fields.hpp"

namespace svlq {

// Kernel algebra on the grid. All integrals over (t, T) are left-endpoint sums
// over the cells [t_j, t_{j+1}], j = k..N-1; family-tagged kernels enter with
// exact cell moments instead of h times a sample.

/// (P ⋄ M)(s_i, t_k) for i >= k.
TriangleKernel rint(const PiPair& P, const TriangleKernel& M);
/// (M ⋄ P)(t_k, s_i), equal to rint(P, Mᵀ)ᵀ.
TriangleKernel lint(const TriangleKernel& M, const PiPair& P);
/// (M1 ⋄ P ⋄ M2)(t_k); symmetrized when M1 is the transpose of M2.
MatrixField sandwich(const TriangleKernel& M1, const PiPair& P, const TriangleKernel& M2);

/// Discrete resolvent: F(t_i, t_j) = K̄(i, j) + sum_{j<r<i} W(i, r) F(t_r, t_j), where
/// W(i, r) is the cell integral of K(t_i, .) over [t_r, t_{r+1}] and K̄ = W / h.
TriangleKernel resolvent(const TriangleKernel& K);
double resolvent_residual(const TriangleKernel& K, const TriangleKernel& F);

struct MeanFlow {
    MatrixField X;          // E[X(t_m)], zero before t0
    MatrixField u;          // E[u(t_m)]
    TriangleKernel Theta;   // E[Θ(s_i, t_m)], diagonal equal to E[X(t_m)]
    TriangleKernel stacked; // (d+l) x (d+l) closed-loop kernel, cell averaged
    TriangleKernel F;       // its resolvent
};

/// Means of the closed-loop state under (Ξ, Γ, v̄) started at (t0, x).
MeanFlow mean_state(const MatrixField& Xi, const TriangleKernel& Gamma, const Problem& p,
                    const MatrixField& x, const MatrixField& v_bar, int t0);

namespace level {

// Building blocks evaluated at a single time level t_k; nodes k..N are
// indexed locally by l = i - k, and n = N - k + 1.

// Block l: shape(k+l, k) * first_weight(k+l, k); the block for node N is zero.
Mat weighted_stack(const TriangleKernel& M, int k);
// Block l: M(k+l, k).
Mat value_stack(const TriangleKernel& M, int k);
// (P ⋄ M)(s_{k+l}, t_k) stacked, given the dense P² level and weighted_stack(M, k).
Mat rint(const MatrixField& P1, const Mat& P2_level, const TriangleKernel& M, int k,
         const Mat& M_weighted);
// (M1 ⋄ P ⋄ M2)(t_k) with M1 passed through its transpose M1t (d x c1).
Mat sandwich_t(const TriangleKernel& M1t, const Mat& M1t_weighted, const MatrixField& P1,
               const Mat& P2_level, const TriangleKernel& M2, const Mat& M2_weighted, int k);

}  // namespace level

}  // namespace svlq
