#pragma once

#include <cstdint>
#include <vector>

#include "svlq/fields.hpp"
#include "svlq/lyapunov.hpp"

namespace svlq {

struct RegularityReport {
    std::vector<double> min_eig_profile;    // λ_min(R + Dᵀ⋄P⋄D) per node
    double lambda = 0.0;
    std::vector<double> range_residual_S;   // |(I - M M†)(S + Dᵀ⋄P⋄C)| per node
    double range_residual_B = 0.0;          // max over the triangle of |(I - M M†)(Bᵀ⋄P)|
    bool regular = false;
    bool strongly_regular = false;
};

/// Moore–Penrose pseudoinverse with singular values below rel_tol * σ_max dropped.
Mat pinv_threshold(const Mat& M, double rel_tol = 1e-10);

struct GainPair {
    MatrixField Xi;
    TriangleKernel Gamma;
    bool near_singular = false;  // some M(t_k) was inverted through the cutoff
};

/// Ξ = -M†(S + Dᵀ⋄P⋄C), Γ = -M†(Bᵀ⋄P) with M = R + Dᵀ⋄P⋄D.
GainPair gain_update(const PiPair& P, const Problem& p);

RegularityReport regularity_report(const PiPair& P, const Problem& p, double tol = 1e-8);

struct KleinmanOptions {
    double tol = 1e-8;
    int max_outer = 60;
    SolverOptions inner;
    std::uint64_t probe_seed = 20240917;
    int random_probes = 3;
};

struct IterateRecord {
    double gain_change = 0.0;
    std::vector<double> probe_forms;
};

struct RiccatiSolution {
    PiPair P;
    MatrixField Xi_check;
    TriangleKernel Gamma_check;
    std::vector<IterateRecord> iterate_log;
    RegularityReport regularity;
    bool near_singular = false;
};

/// Probe free terms for the monotonicity log: e_j for each coordinate plus
/// seeded random grid functions.
std::vector<MatrixField> probe_set(const Problem& p, std::uint64_t seed, int random_count);

/// Gain iteration from Ξ = 0, Γ = 0. Throws NonConvergence past max_outer;
/// a solution that is not strongly regular is returned with its report.
RiccatiSolution kleinman_solve(const Problem& p, const KleinmanOptions& opts = {});

/// Level marching of the Riccati–Volterra equation itself.
PiPair direct_march(const Problem& p, const SolverOptions& opts = {});

// Sup over nodes of |ΔΞ| plus the triangle L² norm of ΔΓ.
double gain_distance(const MatrixField& dXi, const TriangleKernel& dGamma);

}  // namespace svlq
