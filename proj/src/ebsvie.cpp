#include "svlq/ebsvie.hpp"

#include <cmath>

#include "march.hpp"
#include "svlq/errors.hpp"
#include "svlq/riccati.hpp"
#include "svlq/volterra_ops.hpp"

namespace svlq {

EtaField solve_ebsvie(const MatrixField& Xi, const TriangleKernel& Gamma, const TriangleKernel& chi,
                      const MatrixField& psi, const Problem& p, const SolverOptions& opts) {
    const int N = p.grid.steps(), d = p.d, l = p.l;
    const double h = p.grid.h();
    if (chi.rows() != d || chi.cols() != 1 || psi.rows() != d || psi.cols() != 1 ||
        Xi.rows() != l || Gamma.rows() != l)
        throw std::invalid_argument("solve_ebsvie: shape mismatch");

    EtaField out{TriangleKernel::zero(p.grid, d, 1), TriangleKernel::zero(p.grid, d, 1)};
    TriangleKernel& eta = out.eta;
    eta.mut(N, N) = psi(N);
    const Mat I = Mat::Identity(d, d);

    for (int k = N - 1; k >= 0; --k) {
        // Cell weights of A + B Ξ(t_k) and of B over r in [t_j, t_{j+1}], j >= k.
        std::vector<Mat> G(N - k), Bc(N - k);
        for (int j = k; j < N; ++j) {
            Bc[j - k] = p.B.shape(j, k) * p.B.first_weight(j, k);
            G[j - k] = p.A.shape(j, k) * p.A.first_weight(j, k) + Bc[j - k] * Xi(k);
        }
        const Mat lhs = I - G[0].transpose();
        const Eigen::PartialPivLU<Mat> diag_solver(lhs);

        for (int i = k + 1; i <= N; ++i) eta.mut(i, k) = eta(i, k + 1);
        eta.mut(k, k) = eta(k + 1, k + 1);

        std::vector<double> history;
        bool settled = false;
        for (int it = 0; it < opts.max_inner; ++it) {
            Mat beta = Mat::Zero(l, 1);
            for (int j = k; j < N; ++j) beta.noalias() += Bc[j - k].transpose() * eta(j, k);
            double change = 0.0;
            for (int i = k + 1; i <= N; ++i) {
                const Mat next = eta(i, k + 1) + h * (chi(i, k) + Gamma(i, k).transpose() * beta);
                change = std::max(change, (next - eta(i, k)).cwiseAbs().maxCoeff());
                eta.mut(i, k) = next;
            }
            Mat rhs = psi(k);
            for (int j = k + 1; j < N; ++j) rhs.noalias() += G[j - k].transpose() * eta(j, k);
            const Mat dg = diag_solver.solve(rhs);
            change = std::max(change, (dg - eta(k, k)).cwiseAbs().maxCoeff());
            eta.mut(k, k) = dg;
            history.push_back(change);
            if (!std::isfinite(change)) break;
            if (change < opts.tol) {
                settled = true;
                break;
            }
        }
        if (!settled)
            throw SolverDivergence("backward Volterra march did not settle at node " +
                                       std::to_string(k),
                                   k, history);
    }
    return out;
}

namespace {

// Level-wise ⋄ products of P with the inhomogeneous kernels.
struct Inhomogeneous {
    TriangleKernel Pb;       // (P ⋄ b)(s_i, t_k)
    TriangleKernel W;        // (P ⋄ B)(s_i, t_k)
    MatrixField DPsigma;     // (Dᵀ ⋄ P ⋄ σ)
    MatrixField CPsigma;     // (Cᵀ ⋄ P ⋄ σ)
    MatrixField sigmaPsigma; // (σᵀ ⋄ P ⋄ σ)
    MatrixField DPC;         // (Dᵀ ⋄ P ⋄ C)
    MatrixField M;           // R + Dᵀ ⋄ P ⋄ D
};

Inhomogeneous inhomogeneous_products(const PiPair& P, const Problem& p) {
    const int N = p.grid.steps(), d = p.d, l = p.l;
    Inhomogeneous in{TriangleKernel::zero(p.grid, d, 1), TriangleKernel::zero(p.grid, d, l),
                     MatrixField::zero(p.grid, l, 1), MatrixField::zero(p.grid, d, 1),
                     MatrixField::zero(p.grid, 1, 1), MatrixField::zero(p.grid, l, d),
                     MatrixField::zero(p.grid, l, l)};
    detail::LevelWeights w(p);
    for (int k = 0; k <= N; ++k) {
        w.at(k);
        const Mat P2 = P.P2.level(k);
        const detail::LevelOps ops = detail::level_ops(p, w, P.P1, P2, k);
        const Mat sw = level::weighted_stack(p.sigma, k);
        const Mat pb = level::rint(P.P1, P2, p.b, k, level::weighted_stack(p.b, k));
        for (int i = k; i <= N; ++i) {
            in.Pb.mut(i, k) = pb.block((i - k) * d, 0, d, 1);
            in.W.mut(i, k) = ops.W.block((i - k) * d, 0, d, l);
        }
        in.DPsigma(k) = level::sandwich_t(p.D, w.Dw, P.P1, P2, p.sigma, sw, k);
        in.CPsigma(k) = level::sandwich_t(p.C, w.Cw, P.P1, P2, p.sigma, sw, k);
        in.sigmaPsigma(k) = level::sandwich_t(p.sigma, sw, P.P1, P2, p.sigma, sw, k);
        in.DPC(k) = ops.DPC;
        in.M(k) = Mat(p.R(k)) + ops.DPD;
    }
    return in;
}

Feedforward assemble(const PiPair& P, const MatrixField& Xi, const TriangleKernel& Gamma,
                     const MatrixField* v, const Problem& p, const SolverOptions& opts) {
    const int N = p.grid.steps(), d = p.d, l = p.l;
    const Inhomogeneous in = inhomogeneous_products(P, p);

    TriangleKernel chi = TriangleKernel::zero(p.grid, d, 1);
    MatrixField psi = MatrixField::zero(p.grid, d, 1);
    for (int k = 0; k <= N; ++k) {
        const Mat base = Mat(p.rho(k)) + in.DPsigma(k);
        Mat ps = Mat(p.q(k)) + in.CPsigma(k) + Xi(k).transpose() * base;
        if (v)
            ps += (p.S(k).transpose() + in.DPC(k).transpose() + Xi(k).transpose() * in.M(k)) *
                  (*v)(k);
        psi(k) = ps;
        for (int i = k; i <= N; ++i) {
            Mat c = Mat(in.Pb(i, k)) + Gamma(i, k).transpose() * base;
            if (v) c += (in.W(i, k) + Gamma(i, k).transpose() * in.M(k)) * (*v)(k);
            chi.mut(i, k) = c;
        }
    }

    Feedforward ff{solve_ebsvie(Xi, Gamma, chi, psi, p, opts), MatrixField::zero(p.grid, l, 1),
                   MatrixField::zero(p.grid, l, 1), {}};
    for (int k = 0; k <= N; ++k) {
        Mat kap = Mat(p.rho(k)) + in.DPsigma(k);
        for (int j = k; j < N; ++j)
            kap.noalias() +=
                (p.B.shape(j, k) * p.B.first_weight(j, k)).transpose() * ff.eta.eta(j, k);
        ff.kappa(k) = kap;
        const Mat M = in.M(k);
        const Mat Mp = pinv_threshold(0.5 * (M + M.transpose()));
        ff.v_hat(k) = -Mp * kap;
        ff.range_residual.push_back(((Mat::Identity(l, l) - M * Mp) * kap).norm());
    }
    return ff;
}

double cost_terms(const PiPair& P, const EtaField& eta, const MatrixField& kappa,
                  const MatrixField* v, int t0, const MatrixField& x, const Problem& p) {
    const int N = p.grid.steps();
    const double h = p.grid.h();
    const Inhomogeneous in = inhomogeneous_products(P, p);
    double acc = quadratic_form(P, t0, x);
    for (int m = t0; m < N; ++m) {
        acc += 2.0 * h * (eta.eta(m, t0).transpose() * x(m))(0, 0);
        double run = in.sigmaPsigma(m)(0, 0);
        for (int j = m; j < N; ++j)
            run += 2.0 * p.b.first_weight(j, m) *
                   (eta.eta(j, m).transpose() * p.b.shape(j, m))(0, 0);
        const Mat M = in.M(m);
        if (v) {
            const Mat vm = (*v)(m);
            run += (vm.transpose() * M * vm)(0, 0) + 2.0 * (kappa(m).transpose() * vm)(0, 0);
        } else {
            const Mat Mp = pinv_threshold(0.5 * (M + M.transpose()));
            run -= (kappa(m).transpose() * Mp * kappa(m))(0, 0);
        }
        acc += h * run;
    }
    return acc;
}

}  // namespace

Feedforward optimal_inhomogeneous(const PiPair& P, const MatrixField& Xi_check,
                                  const TriangleKernel& Gamma_check, const Problem& p,
                                  const SolverOptions& opts) {
    return assemble(P, Xi_check, Gamma_check, nullptr, p, opts);
}

Feedforward strategy_inhomogeneous(const PiPair& P, const Strategy& s, const Problem& p,
                                   const SolverOptions& opts) {
    return assemble(P, s.Xi, s.Gamma, &s.v, p, opts);
}

double value_functional(const PiPair& P, const EtaField& eta, const MatrixField& kappa, int t0,
                        const MatrixField& x, const Problem& p) {
    return cost_terms(P, eta, kappa, nullptr, t0, x, p);
}

double represented_cost(const PiPair& P, const EtaField& eta, const MatrixField& kappa,
                        const MatrixField& v, int t0, const MatrixField& x, const Problem& p) {
    return cost_terms(P, eta, kappa, &v, t0, x, p);
}

}  // namespace svlq
