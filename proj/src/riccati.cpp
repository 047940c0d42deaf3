#include "svlq/riccati.hpp"

#include <cmath>
#include <random>

#include "march.hpp"
#include "svlq/errors.hpp"
#include "svlq/volterra_ops.hpp"

namespace svlq {

Mat pinv_threshold(const Mat& M, double rel_tol) {
    if (M.size() == 0) return M.transpose();
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    const double cut = rel_tol * (s.size() ? s(0) : 0.0);
    Vec inv = Vec::Zero(s.size());
    for (int i = 0; i < s.size(); ++i)
        if (s(i) > cut && s(i) > 0.0) inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

namespace {

struct Inverse {
    Mat M_inv;
    bool near_singular = false;
};

// True inverse when M is safely positive definite, pseudoinverse otherwise.
Inverse invert_weight(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    const Vec& ev = es.eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    if (ev.minCoeff() > 1e-10 * scale) {
        return {es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose(),
                false};
    }
    return {pinv_threshold(M), std::abs(ev.minCoeff()) < 1e-8 * scale || ev.minCoeff() <= 0.0};
}

}  // namespace

GainPair gain_update(const PiPair& P, const Problem& p) {
    const int N = p.grid.steps(), d = p.d, l = p.l;
    GainPair out{MatrixField::zero(p.grid, l, d), TriangleKernel::zero(p.grid, l, d), false};
    detail::LevelWeights w(p);
    for (int k = 0; k <= N; ++k) {
        w.at(k);
        const detail::LevelOps ops = detail::level_ops(p, w, P.P1, P.P2.level(k), k);
        const Mat M = Mat(p.R(k)) + ops.DPD;
        const Inverse inv = invert_weight(0.5 * (M + M.transpose()));
        out.near_singular = out.near_singular || inv.near_singular;
        out.Xi(k) = -inv.M_inv * (Mat(p.S(k)) + ops.DPC);
        for (int i = k; i <= N; ++i)
            out.Gamma.mut(i, k) = -inv.M_inv * ops.W.block((i - k) * d, 0, d, l).transpose();
    }
    return out;
}

RegularityReport regularity_report(const PiPair& P, const Problem& p, double tol) {
    const int N = p.grid.steps(), d = p.d, l = p.l;
    RegularityReport rep;
    rep.lambda = std::numeric_limits<double>::infinity();
    detail::LevelWeights w(p);
    for (int k = 0; k <= N; ++k) {
        w.at(k);
        const detail::LevelOps ops = detail::level_ops(p, w, P.P1, P.P2.level(k), k);
        Mat M = Mat(p.R(k)) + ops.DPD;
        M = (0.5 * (M + M.transpose())).eval();
        const double lam = Eigen::SelfAdjointEigenSolver<Mat>(M, Eigen::EigenvaluesOnly)
                               .eigenvalues()
                               .minCoeff();
        rep.min_eig_profile.push_back(lam);
        rep.lambda = std::min(rep.lambda, lam);
        const Mat proj = Mat::Identity(l, l) - M * pinv_threshold(M);
        rep.range_residual_S.push_back((proj * (Mat(p.S(k)) + ops.DPC)).norm());
        for (int i = k + 1; i <= N; ++i)
            rep.range_residual_B = std::max(
                rep.range_residual_B, (proj * ops.W.block((i - k) * d, 0, d, l).transpose()).norm());
    }
    double worst_S = 0.0;
    for (double r : rep.range_residual_S) worst_S = std::max(worst_S, r);
    rep.strongly_regular = rep.lambda > 0.0;
    rep.regular = rep.strongly_regular ||
                  (rep.lambda >= -tol && worst_S <= tol && rep.range_residual_B <= tol);
    return rep;
}

std::vector<MatrixField> probe_set(const Problem& p, std::uint64_t seed, int random_count) {
    std::vector<MatrixField> probes;
    for (int j = 0; j < p.d; ++j)
        probes.push_back(MatrixField::constant(p.grid, Mat::Identity(p.d, p.d).col(j)));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (int r = 0; r < random_count; ++r) {
        MatrixField f(p.grid, p.d, 1);
        for (int k = 0; k <= p.grid.steps(); ++k)
            for (int i = 0; i < p.d; ++i) f(k)(i, 0) = normal(rng);
        probes.push_back(std::move(f));
    }
    return probes;
}

double gain_distance(const MatrixField& dXi, const TriangleKernel& dGamma) {
    double sup = 0.0;
    for (int k = 0; k <= dXi.steps(); ++k) sup = std::max(sup, dXi(k).norm());
    const double h = dGamma.h();
    double l2 = 0.0;
    for (int i = 1; i <= dGamma.steps(); ++i)
        for (int k = 0; k < i; ++k) l2 += h * h * dGamma(i, k).squaredNorm();
    return sup + std::sqrt(l2);
}

namespace {

MatrixField diff(const MatrixField& a, const MatrixField& b) {
    MatrixField out = a;
    for (int k = 0; k <= a.steps(); ++k) out(k) -= b(k);
    return out;
}

TriangleKernel diff(const TriangleKernel& a, const TriangleKernel& b) {
    TriangleKernel out = TriangleKernel::zero(TimeGrid(a.steps() * a.h(), a.steps()), a.rows(), a.cols());
    for (int i = 0; i <= a.steps(); ++i)
        for (int j = 0; j <= i; ++j) out.mut(i, j) = a(i, j) - b(i, j);
    return out;
}

}  // namespace

RiccatiSolution kleinman_solve(const Problem& p, const KleinmanOptions& opts) {
    const std::vector<MatrixField> probes = probe_set(p, opts.probe_seed, opts.random_probes);
    MatrixField Xi = MatrixField::zero(p.grid, p.l, p.d);
    TriangleKernel Gamma = TriangleKernel::zero(p.grid, p.l, p.d);
    RiccatiSolution sol;
    std::vector<double> changes;
    for (int it = 0; it < opts.max_outer; ++it) {
        PiPair P = solve_lyapunov(Xi, Gamma, p, opts.inner);
        IterateRecord rec;
        for (const MatrixField& x : probes) rec.probe_forms.push_back(quadratic_form(P, 0, x));
        GainPair next = gain_update(P, p);
        rec.gain_change = gain_distance(diff(next.Xi, Xi), diff(next.Gamma, Gamma));
        changes.push_back(rec.gain_change);
        sol.iterate_log.push_back(rec);
        Xi = std::move(next.Xi);
        Gamma = std::move(next.Gamma);
        if (rec.gain_change < opts.tol) {
            sol.P = std::move(P);
            sol.Xi_check = std::move(Xi);
            sol.Gamma_check = std::move(Gamma);
            sol.near_singular = next.near_singular;
            sol.regularity = regularity_report(sol.P, p);
            return sol;
        }
    }
    throw NonConvergence("gain iteration exceeded " + std::to_string(opts.max_outer) +
                             " outer iterations",
                         changes);
}

PiPair direct_march(const Problem& p, const SolverOptions& opts) {
    auto provider = [&](int k, const detail::LevelOps& ops) {
        detail::LevelGains g;
        Mat M = Mat(p.R(k)) + ops.DPD;
        const Mat Minv = invert_weight(0.5 * (M + M.transpose())).M_inv;
        g.Xi = -Minv * (Mat(p.S(k)) + ops.DPC);
        g.Gt = -ops.W * Minv.transpose();
        detail::fill_rhs_from_gains(p, k, g);
        return g;
    };
    return detail::march(p, provider, opts).P;
}

}  // namespace svlq
