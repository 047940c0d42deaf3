#pragma once

#include <vector>

#include "svlq/config.hpp"
#include "svlq/fields.hpp"
#include "svlq/riccati.hpp"

namespace svlq {

/// Coefficients of the controlled SDE dX = (ĀX + B̄u)dt + (C̄X + D̄u)dW,
/// sampled at the grid nodes, with running cost weights Q, S, R.
struct SDEProblem {
    TimeGrid grid{1.0, 2};
    int d = 1, l = 1;
    MatrixField A, B, C, D, Q, S, R;
};

/// Π at every node for the classical Riccati ODE with Π(T) = 0, by
/// fourth-order Runge–Kutta backward in time; coefficients are linearly
/// interpolated at the half steps. Throws OracleFailure if R + D̄ᵀΠD̄ becomes
/// singular.
std::vector<Mat> riccati_ode(const SDEProblem& sde);

/// The SDE a Volterra problem reduces to. Throws NotAnSDEReduction unless
/// every kernel is constant in its first argument, the inhomogeneous terms
/// vanish and x is constant.
SDEProblem sde_from_problem(const Problem& p);

struct ReductionPoint {
    double time = 0.0;
    int t0 = 0;                      // node index on the coarse grid
    double volterra = 0, ode = 0, rel_error = 0;
    double volterra_fine = 0, ode_fine = 0, rel_error_fine = 0;
    double ratio = 0.0;              // rel_error / rel_error_fine; NaN when both vanish
};

struct ReductionReport {
    int N = 0;
    std::vector<ReductionPoint> points;
    json to_json() const;
};

/// Volterra aggregated value against <Π(t0) x0, x0> at t0 in {0, N/4, N/2}
/// on the grid of `coarse` and of `fine` (same problem, twice the steps).
ReductionReport sde_reduction_compare(const Problem& coarse, const Problem& fine,
                                      const KleinmanOptions& opts = {});

}  // namespace svlq
