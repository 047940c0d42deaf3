#pragma once

// Backward level marching shared by the Lyapunov and Riccati solvers.

#include <functional>

#include "svlq/fields.hpp"
#include "svlq/lyapunov.hpp"

namespace svlq::detail {

// ⋄-products of the current level-k iterate with the problem kernels.
struct LevelOps {
    Mat W;    // (P ⋄ B)(s_i, t_k), stacked over i = k..N
    Mat PA;   // (P ⋄ A)(s_i, t_k)
    Mat CPC;  // (Cᵀ ⋄ P ⋄ C)(t_k)
    Mat DPC;  // (Dᵀ ⋄ P ⋄ C)(t_k)
    Mat DPD;  // (Dᵀ ⋄ P ⋄ D)(t_k)
};

struct LevelGains {
    Mat Xi;  // l x d
    Mat Gt;  // Γ(s_i, t_k)ᵀ stacked over i = k..N, (n d) x l
    Mat Q1;  // d x d
    Mat Q2;  // (n d) x d
    Mat Q3;  // (n d) x (n d), only the interior blocks are read
};

using GainProvider = std::function<LevelGains(int k, const LevelOps& ops)>;

struct MarchResult {
    PiPair P;
    MatrixField Xi;
    TriangleKernel Gamma;
    std::vector<int> inner_iterations;
};

class LevelWeights {
public:
    explicit LevelWeights(const Problem& p) : p_(p) {}
    void at(int k);
    Mat Aw, Bw, Cw, Dw;

private:
    const Problem& p_;
};

LevelOps level_ops(const Problem& p, const LevelWeights& w, const MatrixField& P1,
                   const Mat& P2_level, int k);

// Q¹, Q², Q³ generated by the gains (Ξ(t_k), Γ(., t_k)).
void fill_rhs_from_gains(const Problem& p, int k, LevelGains& g);

// Stacked Γ(s_i, t_k)ᵀ for i = k..N.
Mat gamma_t_stack(const TriangleKernel& Gamma, int k);

MarchResult march(const Problem& p, const GainProvider& gains, const SolverOptions& opts);

}  // namespace svlq::detail
