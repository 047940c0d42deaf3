#include "svlq/classical.hpp"

#include <cmath>
#include <limits>

#include "svlq/errors.hpp"

namespace svlq {

namespace {

Mat lerp(const MatrixField& f, int k, double theta) {
    if (theta == 0.0) return f(k);
    return (1.0 - theta) * Mat(f(k)) + theta * Mat(f(k + 1));
}

struct Coeffs {
    Mat A, B, C, D, Q, S, R;
};

Coeffs at(const SDEProblem& s, int k, double theta) {
    return {lerp(s.A, k, theta), lerp(s.B, k, theta), lerp(s.C, k, theta), lerp(s.D, k, theta),
            lerp(s.Q, k, theta), lerp(s.S, k, theta), lerp(s.R, k, theta)};
}

// Right side of dΠ/dτ with τ = T - t.
Mat rhs(const Coeffs& c, const Mat& Pi) {
    const Mat L = c.S + c.B.transpose() * Pi + c.D.transpose() * Pi * c.C;
    const Mat M = c.R + c.D.transpose() * Pi * c.D;
    const Eigen::FullPivLU<Mat> lu(M);
    if (!lu.isInvertible() || !M.allFinite())
        throw OracleFailure("riccati_ode: R + DᵀΠD is singular");
    Mat out = c.Q + c.A.transpose() * Pi + Pi * c.A + c.C.transpose() * Pi * c.C -
              L.transpose() * lu.solve(L);
    return 0.5 * (out + out.transpose());
}

// Value of K(., t_j) assuming it does not depend on the first argument.
Mat column_value(const TriangleKernel& K, int j) {
    const int N = K.steps();
    return j < N ? Mat(K.shape(N, j)) : Mat(K(N, N));
}

void require_constant_first_argument(const TriangleKernel& K, const char* name) {
    if (K.is_zero()) return;
    if (K.has_family()) {
        if (K.alpha() != 1.0)
            throw NotAnSDEReduction(std::string("kernel ") + name +
                                    " depends on its first argument");
        return;
    }
    const int N = K.steps();
    for (int j = 0; j < N; ++j) {
        const Mat ref = K(N, j);
        const double scale = std::max(1.0, ref.cwiseAbs().maxCoeff());
        for (int i = j; i < N; ++i)
            if ((Mat(K(i, j)) - ref).cwiseAbs().maxCoeff() > 1e-12 * scale)
                throw NotAnSDEReduction(std::string("kernel ") + name +
                                        " depends on its first argument");
    }
}

MatrixField columns(const TriangleKernel& K, const TimeGrid& grid) {
    MatrixField f(grid, K.rows(), K.cols());
    for (int j = 0; j <= grid.steps(); ++j) f(j) = column_value(K, j);
    return f;
}

double relative(double a, double ref) {
    const double err = std::abs(a - ref);
    if (err == 0.0) return 0.0;
    return err / std::max(std::abs(ref), 1e-300);
}

}  // namespace

std::vector<Mat> riccati_ode(const SDEProblem& s) {
    const int N = s.grid.steps();
    const double h = s.grid.h();
    std::vector<Mat> Pi(N + 1);
    Pi[N] = Mat::Zero(s.d, s.d);
    for (int k = N; k > 0; --k) {
        // Step from t_k to t_{k-1}; in τ the coefficients run from node k to k - 1.
        const Coeffs c0 = at(s, k - 1, 1.0), cm = at(s, k - 1, 0.5), c1 = at(s, k - 1, 0.0);
        const Mat& P = Pi[k];
        const Mat k1 = rhs(c0, P);
        const Mat k2 = rhs(cm, P + 0.5 * h * k1);
        const Mat k3 = rhs(cm, P + 0.5 * h * k2);
        const Mat k4 = rhs(c1, P + h * k3);
        Pi[k - 1] = P + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!Pi[k - 1].allFinite()) throw OracleFailure("riccati_ode: trajectory blew up");
    }
    return Pi;
}

SDEProblem sde_from_problem(const Problem& p) {
    if (!p.homogeneous())
        throw NotAnSDEReduction("inhomogeneous terms must vanish for the SDE comparison");
    require_constant_first_argument(p.A, "A");
    require_constant_first_argument(p.B, "B");
    require_constant_first_argument(p.C, "C");
    require_constant_first_argument(p.D, "D");
    for (int k = 1; k <= p.grid.steps(); ++k)
        if (Mat(p.x(k)) != Mat(p.x(0)))
            throw NotAnSDEReduction("free term x must be constant for the SDE comparison");
    return {p.grid, p.d, p.l, columns(p.A, p.grid), columns(p.B, p.grid), columns(p.C, p.grid),
            columns(p.D, p.grid), p.Q, p.S, p.R};
}

ReductionReport sde_reduction_compare(const Problem& coarse, const Problem& fine,
                                      const KleinmanOptions& opts) {
    if (fine.grid.steps() != 2 * coarse.grid.steps() ||
        fine.grid.horizon() != coarse.grid.horizon())
        throw std::invalid_argument("sde_reduction_compare: fine grid must double the steps");
    const SDEProblem sc = sde_from_problem(coarse), sf = sde_from_problem(fine);
    const std::vector<Mat> pic = riccati_ode(sc), pif = riccati_ode(sf);
    const RiccatiSolution vc = kleinman_solve(coarse, opts), vf = kleinman_solve(fine, opts);
    const int N = coarse.grid.steps();
    const Vec x0c = coarse.x(0).col(0), x0f = fine.x(0).col(0);

    ReductionReport rep;
    rep.N = N;
    for (int t0 : {0, N / 4, N / 2}) {
        ReductionPoint pt;
        pt.t0 = t0;
        pt.time = coarse.grid.t(t0);
        pt.volterra = quadratic_form(vc.P, t0, coarse.x);
        pt.ode = x0c.dot(pic[t0] * x0c);
        pt.rel_error = relative(pt.volterra, pt.ode);
        pt.volterra_fine = quadratic_form(vf.P, 2 * t0, fine.x);
        pt.ode_fine = x0f.dot(pif[2 * t0] * x0f);
        pt.rel_error_fine = relative(pt.volterra_fine, pt.ode_fine);
        pt.ratio = pt.rel_error_fine > 1e-14 ? pt.rel_error / pt.rel_error_fine
                                             : std::numeric_limits<double>::quiet_NaN();
        rep.points.push_back(pt);
    }
    return rep;
}

json ReductionReport::to_json() const {
    json out;
    out["steps"] = N;
    out["fine_steps"] = 2 * N;
    out["points"] = json::array();
    for (const auto& pt : points) {
        json j{{"t0_index", pt.t0},
               {"t0", pt.time},
               {"volterra", pt.volterra},
               {"ode", pt.ode},
               {"rel_error", pt.rel_error},
               {"volterra_fine", pt.volterra_fine},
               {"ode_fine", pt.ode_fine},
               {"rel_error_fine", pt.rel_error_fine}};
        j["order_ratio"] = std::isfinite(pt.ratio) ? json(pt.ratio) : json(nullptr);
        j["order"] = std::isfinite(pt.ratio) && pt.ratio > 0 ? json(std::log2(pt.ratio)) : json(nullptr);
        out["points"].push_back(j);
    }
    return out;
}

}  // namespace svlq
