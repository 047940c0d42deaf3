#include "svlq/lyapunov.hpp"

#include <cmath>

#include "march.hpp"
#include "svlq/errors.hpp"
#include "svlq/volterra_ops.hpp"

namespace svlq {

namespace detail {

void LevelWeights::at(int k) {
    Aw = level::weighted_stack(p_.A, k);
    Bw = level::weighted_stack(p_.B, k);
    Cw = level::weighted_stack(p_.C, k);
    Dw = level::weighted_stack(p_.D, k);
}

LevelOps level_ops(const Problem& p, const LevelWeights& w, const MatrixField& P1,
                   const Mat& P2_level, int k) {
    LevelOps ops;
    ops.W = level::rint(P1, P2_level, p.B, k, w.Bw);
    ops.PA = level::rint(P1, P2_level, p.A, k, w.Aw);
    ops.CPC = level::sandwich_t(p.C, w.Cw, P1, P2_level, p.C, w.Cw, k);
    ops.CPC = (0.5 * (ops.CPC + ops.CPC.transpose())).eval();
    ops.DPC = level::sandwich_t(p.D, w.Dw, P1, P2_level, p.C, w.Cw, k);
    ops.DPD = level::sandwich_t(p.D, w.Dw, P1, P2_level, p.D, w.Dw, k);
    ops.DPD = (0.5 * (ops.DPD + ops.DPD.transpose())).eval();
    return ops;
}

Mat gamma_t_stack(const TriangleKernel& Gamma, int k) {
    const int N = Gamma.steps(), d = Gamma.cols(), l = Gamma.rows();
    Mat out(static_cast<Eigen::Index>(N - k + 1) * d, l);
    for (int i = k; i <= N; ++i) out.block((i - k) * d, 0, d, l) = Gamma(i, k).transpose();
    return out;
}

void fill_rhs_from_gains(const Problem& p, int k, LevelGains& g) {
    const MapC Q = p.Q(k), S = p.S(k), R = p.R(k);
    g.Q1 = Q + g.Xi.transpose() * S + S.transpose() * g.Xi + g.Xi.transpose() * R * g.Xi;
    g.Q1 = (0.5 * (g.Q1 + g.Q1.transpose())).eval();
    g.Q2 = g.Gt * (S + R * g.Xi);
    g.Q3 = g.Gt * R * g.Gt.transpose();
}

MarchResult march(const Problem& p, const GainProvider& gains, const SolverOptions& opts) {
    const int N = p.grid.steps(), d = p.d, l = p.l;
    const double h = p.grid.h();
    MarchResult res{PiPair::zero(p.grid, d), MatrixField::zero(p.grid, l, d),
                    TriangleKernel::zero(p.grid, l, d), std::vector<int>(N + 1, 0)};
    MatrixField& P1 = res.P.P1;
    LevelWeights weights(p);
    Mat prev;  // dense P² level k+1

    for (int k = N; k >= 0; --k) {
        const int n = N - k + 1;
        weights.at(k);
        Mat cur = Mat::Zero(n * d, n * d);
        if (k < N) {
            cur.bottomRightCorner((n - 1) * d, (n - 1) * d) = prev;
            P1(k) = P1(k + 1);
        }
        std::vector<double> history;
        LevelGains g;
        bool settled = false;
        for (int it = 0; it < opts.max_inner; ++it) {
            const LevelOps ops = level_ops(p, weights, P1, cur, k);
            g = gains(k, ops);

            Mat next(n * d, n * d);
            // Boundary P²(s, t_k, t_k) is imposed first; the next sweep sees it in
            // the tail sums of the interior update.
            const Mat bcol = ops.PA + ops.W * g.Xi + g.Gt * (ops.DPC + ops.DPD * g.Xi) + g.Q2;
            next.leftCols(d) = bcol;
            next.topRows(d) = bcol.transpose();
            Mat corner = bcol.topRows(d);
            next.topLeftCorner(d, d) = 0.5 * (corner + corner.transpose());
            if (n > 1) {
                const int m = (n - 1) * d;
                const Mat Wi = ops.W.bottomRows(m), Gi = g.Gt.bottomRows(m);
                Mat F3 = Gi * Wi.transpose();
                F3 += F3.transpose().eval();
                F3.noalias() += Gi * ops.DPD * Gi.transpose();
                next.bottomRightCorner(m, m) = prev + h * (F3 + g.Q3.bottomRightCorner(m, m));
            }
            Mat p1 = g.Q1 + ops.CPC + g.Xi.transpose() * ops.DPC + ops.DPC.transpose() * g.Xi +
                     g.Xi.transpose() * ops.DPD * g.Xi;
            p1 = (0.5 * (p1 + p1.transpose())).eval();

            double change = (next - cur).cwiseAbs().maxCoeff();
            change = std::max(change, (p1 - Mat(P1(k))).cwiseAbs().maxCoeff());
            cur = std::move(next);
            P1(k) = p1;
            history.push_back(change);
            res.inner_iterations[k] = it + 1;
            if (!std::isfinite(change)) break;
            if (change < opts.tol) {
                settled = true;
                break;
            }
        }
        if (!settled)
            throw SolverDivergence("level march did not settle at node " + std::to_string(k), k,
                                   history);
        res.P.P2.set_level(k, cur);
        prev = res.P.P2.level(k);
        res.Xi(k) = g.Xi;
        for (int i = k; i <= N; ++i) res.Gamma.mut(i, k) = g.Gt.block((i - k) * d, 0, d, l).transpose();
    }
    return res;
}

}  // namespace detail

LyapunovRHS lyapunov_rhs(const MatrixField& Xi, const TriangleKernel& Gamma, const Problem& p) {
    const int N = p.grid.steps(), d = p.d;
    LyapunovRHS rhs{MatrixField::zero(p.grid, d, d), TriangleKernel::zero(p.grid, d, d),
                    Pyramid(d, N)};
    for (int k = 0; k <= N; ++k) {
        detail::LevelGains g;
        g.Xi = Xi(k);
        g.Gt = detail::gamma_t_stack(Gamma, k);
        detail::fill_rhs_from_gains(p, k, g);
        rhs.Q1(k) = g.Q1;
        for (int i = k; i <= N; ++i) rhs.Q2.mut(i, k) = g.Q2.block((i - k) * d, 0, d, d);
        rhs.Q3.set_level(k, g.Q3);
    }
    return rhs;
}

GainCoefficients gain_coefficients(const MatrixField& Xi, const TriangleKernel& Gamma,
                                   const PiPair& P, const Problem& p) {
    const int N = p.grid.steps(), d = p.d;
    GainCoefficients out{MatrixField::zero(p.grid, d, d), TriangleKernel::zero(p.grid, d, d),
                         Pyramid(d, N), lyapunov_rhs(Xi, Gamma, p)};
    detail::LevelWeights w(p);
    for (int k = 0; k <= N; ++k) {
        w.at(k);
        const Mat level = P.P2.level(k);
        const detail::LevelOps ops = detail::level_ops(p, w, P.P1, level, k);
        const Mat X = Xi(k);
        const Mat Gt = detail::gamma_t_stack(Gamma, k);
        Mat f1 = ops.CPC + X.transpose() * ops.DPC + ops.DPC.transpose() * X +
                 X.transpose() * ops.DPD * X;
        out.F1(k) = 0.5 * (f1 + f1.transpose());
        const Mat f2 = ops.PA + ops.W * X + Gt * (ops.DPC + ops.DPD * X);
        for (int i = k; i <= N; ++i) out.F2.mut(i, k) = f2.block((i - k) * d, 0, d, d);
        Mat f3 = Gt * ops.W.transpose();
        f3 += f3.transpose().eval();
        f3.noalias() += Gt * ops.DPD * Gt.transpose();
        out.F3.set_level(k, f3);
    }
    return out;
}

PiPair solve_lyapunov(const MatrixField& Xi, const TriangleKernel& Gamma, const LyapunovRHS& rhs,
                      const Problem& p, const SolverOptions& opts) {
    const int N = p.grid.steps(), d = p.d;
    if (Xi.rows() != p.l || Xi.cols() != d || Gamma.rows() != p.l || Gamma.cols() != d ||
        rhs.Q1.rows() != d || rhs.Q2.rows() != d || rhs.Q3.dim() != d)
        throw std::invalid_argument("solve_lyapunov: shape mismatch");
    auto provider = [&](int k, const detail::LevelOps&) {
        detail::LevelGains g;
        g.Xi = Xi(k);
        g.Gt = detail::gamma_t_stack(Gamma, k);
        g.Q1 = rhs.Q1(k);
        g.Q2.resize((N - k + 1) * d, d);
        for (int i = k; i <= N; ++i) g.Q2.block((i - k) * d, 0, d, d) = rhs.Q2(i, k);
        g.Q3 = rhs.Q3.level(k);
        return g;
    };
    // The provider is called once per sweep; cache the level so Q³ is not rebuilt.
    int cached = -1;
    detail::LevelGains cache;
    auto cached_provider = [&](int k, const detail::LevelOps& ops) {
        if (k != cached) {
            cache = provider(k, ops);
            cached = k;
        }
        return cache;
    };
    return detail::march(p, cached_provider, opts).P;
}

PiPair solve_lyapunov(const MatrixField& Xi, const TriangleKernel& Gamma, const Problem& p,
                      const SolverOptions& opts) {
    if (Xi.rows() != p.l || Xi.cols() != p.d || Gamma.rows() != p.l || Gamma.cols() != p.d)
        throw std::invalid_argument("solve_lyapunov: shape mismatch");
    int cached = -1;
    detail::LevelGains cache;
    auto provider = [&](int k, const detail::LevelOps&) {
        if (k != cached) {
            cache.Xi = Xi(k);
            cache.Gt = detail::gamma_t_stack(Gamma, k);
            detail::fill_rhs_from_gains(p, k, cache);
            cached = k;
        }
        return cache;
    };
    return detail::march(p, provider, opts).P;
}

LyapunovResidual lyapunov_residual(const MatrixField& Xi, const TriangleKernel& Gamma,
                                   const LyapunovRHS& rhs, const PiPair& P, const Problem& p) {
    const int N = p.grid.steps();
    const double h = p.grid.h();
    GainCoefficients gc = gain_coefficients(Xi, Gamma, P, p);
    LyapunovResidual r;
    for (int k = 0; k <= N; ++k) {
        r.p1 = std::max(r.p1, (Mat(P.P1(k)) - gc.F1(k) - rhs.Q1(k)).cwiseAbs().maxCoeff());
        // The corner P²(t_k, t_k, t_k) is a diagonal block of a symmetric level, so
        // it is held to the symmetric part of the boundary data.
        for (int i = k; i <= N; ++i) {
            Mat target = Mat(gc.F2(i, k)) + Mat(rhs.Q2(i, k));
            if (i == k) target = (0.5 * (target + target.transpose())).eval();
            r.boundary = std::max(r.boundary, (P.P2.get(i, k, k) - target).cwiseAbs().maxCoeff());
        }
        if (k == N) continue;
        for (int i = k + 1; i <= N; ++i)
            for (int j = k + 1; j <= i; ++j) {
                const Mat lhs = (P.P2.get(i, j, k) - P.P2.get(i, j, k + 1)) / h;
                const Mat rhs3 = gc.F3.get(i, j, k) + rhs.Q3.get(i, j, k);
                r.interior = std::max(r.interior, (lhs - rhs3).cwiseAbs().maxCoeff());
            }
    }
    return r;
}

double quadratic_form(const PiPair& P, int t0, const MatrixField& x) {
    const int N = P.P1.steps(), d = P.dim();
    if (x.rows() != d || x.cols() != 1) throw std::invalid_argument("quadratic_form: x must be d x 1");
    if (t0 < 0 || t0 > N) throw std::invalid_argument("quadratic_form: t0 out of range");
    const double h = P.P1.h();
    Vec xs = Vec::Zero((N - t0 + 1) * d);
    double single = 0.0;
    for (int m = t0; m < N; ++m) {
        xs.segment((m - t0) * d, d) = x(m);
        single += (x(m).transpose() * P.P1(m) * x(m))(0, 0);
    }
    return h * single + h * h * xs.dot(P.P2.level(t0) * xs);
}

}  // namespace svlq
