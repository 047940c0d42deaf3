#include "svlq/volterra_ops.hpp"

#include <cmath>

#include "svlq/errors.hpp"

namespace svlq {

namespace level {

Mat weighted_stack(const TriangleKernel& M, int k) {
    const int N = M.steps(), r = M.rows(), c = M.cols(), n = N - k + 1;
    Mat out = Mat::Zero(n * r, c);
    for (int j = k; j < N; ++j) out.block((j - k) * r, 0, r, c) = M.shape(j, k) * M.first_weight(j, k);
    return out;
}

Mat value_stack(const TriangleKernel& M, int k) {
    const int N = M.steps(), r = M.rows(), c = M.cols(), n = N - k + 1;
    Mat out(n * r, c);
    for (int i = k; i <= N; ++i) out.block((i - k) * r, 0, r, c) = M(i, k);
    return out;
}

Mat rint(const MatrixField& P1, const Mat& P2_level, const TriangleKernel& M, int k,
         const Mat& M_weighted) {
    const int N = M.steps(), d = P1.rows(), c = M.cols();
    Mat out = P2_level * M_weighted;
    for (int i = k; i <= N; ++i) out.block((i - k) * d, 0, d, c).noalias() += P1(i) * M(i, k);
    return out;
}

Mat sandwich_t(const TriangleKernel& M1t, const Mat& M1t_weighted, const MatrixField& P1,
               const Mat& P2_level, const TriangleKernel& M2, const Mat& M2_weighted, int k) {
    const int N = M2.steps();
    const double gamma = M1t.alpha() + M2.alpha() - 1.0;
    Mat out = M1t_weighted.transpose() * (P2_level * M2_weighted);
    for (int j = k; j < N; ++j) {
        const double w = (M1t.has_family() || M2.has_family())
                             ? cell_moment(j - k, j - k + 1, M2.h(), gamma)
                             : M2.h();
        out.noalias() += M1t.shape(j, k).transpose() * P1(j) * M2.shape(j, k) * w;
    }
    return out;
}

}  // namespace level

namespace {

void check_square_p(const PiPair& P, int inner, const char* op) {
    if (P.dim() != inner)
        throw std::invalid_argument(std::string(op) + ": dimension mismatch between P and kernel");
}

bool is_transpose_of(const TriangleKernel& M1, const TriangleKernel& M2) {
    if (M1.rows() != M2.cols() || M1.cols() != M2.rows()) return false;
    if (M1.has_family() != M2.has_family()) return false;
    if (M1.has_family() && (M1.alpha() != M2.alpha() ||
                            M1.family_coef() != M2.family_coef().transpose()))
        return false;
    return M1.transpose().raw() == M2.raw();
}

}  // namespace

TriangleKernel rint(const PiPair& P, const TriangleKernel& M) {
    check_square_p(P, M.rows(), "rint");
    const int N = M.steps(), d = P.dim(), c = M.cols();
    TimeGrid g(N * M.h(), N);
    TriangleKernel out = TriangleKernel::zero(g, d, c);
    for (int k = 0; k <= N; ++k) {
        const Mat P2 = P.P2.level(k);
        const Mat st = level::rint(P.P1, P2, M, k, level::weighted_stack(M, k));
        for (int i = k; i <= N; ++i) out.mut(i, k) = st.block((i - k) * d, 0, d, c);
    }
    return out;
}

TriangleKernel lint(const TriangleKernel& M, const PiPair& P) {
    return rint(P, M.transpose()).transpose();
}

MatrixField sandwich(const TriangleKernel& M1, const PiPair& P, const TriangleKernel& M2) {
    check_square_p(P, M1.cols(), "sandwich");
    check_square_p(P, M2.rows(), "sandwich");
    const int N = M2.steps();
    const bool symmetric = is_transpose_of(M1, M2);
    const TriangleKernel M1t = M1.transpose();
    MatrixField out(TimeGrid(N * M2.h(), N), M1.rows(), M2.cols());
    for (int k = 0; k <= N; ++k) {
        const Mat P2 = P.P2.level(k);
        Mat v = level::sandwich_t(M1t, level::weighted_stack(M1t, k), P.P1, P2, M2,
                                  level::weighted_stack(M2, k), k);
        if (symmetric) v = (0.5 * (v + v.transpose())).eval();
        out(k) = v;
    }
    return out;
}

TriangleKernel resolvent(const TriangleKernel& K) {
    if (K.rows() != K.cols()) throw std::invalid_argument("resolvent: kernel must be square");
    const int N = K.steps(), s = K.rows();
    const double h = K.h();
    TriangleKernel F = TriangleKernel::zero(TimeGrid(N * h, N), s, s);
    for (int j = 0; j < N; ++j) {
        for (int i = j + 1; i <= N; ++i) {
            Mat acc = K.shape(i, j) * (K.second_weight(i, j) / h);
            for (int r = j + 1; r < i; ++r)
                acc.noalias() += K.shape(i, r) * K.second_weight(i, r) * F(r, j);
            F.mut(i, j) = acc;
        }
    }
    F.fill_diagonal();
    return F;
}

double resolvent_residual(const TriangleKernel& K, const TriangleKernel& F) {
    const int N = K.steps();
    const double h = K.h();
    double worst = 0.0;
    for (int j = 0; j < N; ++j)
        for (int i = j + 1; i <= N; ++i) {
            Mat conv = Mat::Zero(K.rows(), K.cols());
            for (int r = j + 1; r < i; ++r) conv += K.shape(i, r) * K.second_weight(i, r) * F(r, j);
            const Mat res = F(i, j) - K.shape(i, j) * (K.second_weight(i, j) / h) - conv;
            worst = std::max(worst, res.cwiseAbs().maxCoeff());
        }
    return worst;
}

MeanFlow mean_state(const MatrixField& Xi, const TriangleKernel& Gamma, const Problem& p,
                    const MatrixField& x, const MatrixField& v_bar, int t0) {
    const int d = p.d, l = p.l, s = d + l, N = p.grid.steps();
    const double h = p.grid.h();
    if (Xi.rows() != l || Xi.cols() != d || Gamma.rows() != l || Gamma.cols() != d ||
        x.rows() != d || v_bar.rows() != l)
        throw std::invalid_argument("mean_state: shape mismatch");
    if (t0 < 0 || t0 >= N) throw std::invalid_argument("mean_state: t0 out of range");

    // Cell integrals of the drift kernels against their second argument.
    auto AB = [&](int i, int j) {
        Mat w(d, s);
        w.leftCols(d) = p.A.shape(i, j) * p.A.second_weight(i, j);
        w.rightCols(l) = p.B.shape(i, j) * p.B.second_weight(i, j);
        return w;
    };
    // Feedback weights at level m: Ξ(t_m) on node m plus the Γ cell weights.
    auto feedback = [&](int m, int i) {
        Mat g = Gamma.shape(i, m) * Gamma.first_weight(i, m);
        if (i == N) g.setZero();
        if (i == m) g += Xi(m);
        return g;
    };

    // base(i, m) = x(t_i) + sum_{t0 <= j < m} of the b cell integral.
    TriangleKernel base = TriangleKernel::zero(p.grid, d, 1);
    for (int i = t0; i <= N; ++i) {
        Mat acc = x(i);
        for (int m = t0; m <= i; ++m) {
            if (m > t0) acc += p.b.shape(i, m - 1) * p.b.second_weight(i, m - 1);
            base.mut(i, m) = acc;
        }
    }

    TriangleKernel W = TriangleKernel::zero(p.grid, s, s);
    std::vector<Mat> f(N + 1, Mat::Zero(s, 1));
    for (int m = t0; m <= N; ++m) {
        for (int j = t0; j < m; ++j) {
            Mat blk(s, s);
            const Mat top = AB(m, j);
            blk.topRows(d) = top;
            Mat bottom = Mat::Zero(l, s);
            for (int i = m; i <= N; ++i) bottom += feedback(m, i) * (i == m ? top : AB(i, j));
            blk.bottomRows(l) = bottom;
            W.mut(m, j) = blk / h;
        }
        Mat fm(s, 1);
        fm.topRows(d) = base(m, m);
        Mat ub = v_bar(m);
        for (int i = m; i <= N; ++i) ub += feedback(m, i) * base(i, m);
        fm.bottomRows(l) = ub;
        f[m] = fm;
    }
    W.fill_diagonal();
    TriangleKernel F = resolvent(W);

    MeanFlow out{MatrixField::zero(p.grid, d, 1), MatrixField::zero(p.grid, l, 1),
                 TriangleKernel::zero(p.grid, d, 1), W, F};
    std::vector<Mat> Y(N + 1, Mat::Zero(s, 1));
    for (int m = t0; m <= N; ++m) {
        Mat y = f[m];
        for (int j = t0; j < m; ++j) y.noalias() += h * F(m, j) * f[j];
        Y[m] = y;
        out.X(m) = y.topRows(d);
        out.u(m) = y.bottomRows(l);
    }
    for (int i = t0; i <= N; ++i) {
        Mat acc = x(i);
        for (int m = t0; m <= i; ++m) {
            if (m > t0) {
                acc += AB(i, m - 1) * Y[m - 1];
                acc += p.b.shape(i, m - 1) * p.b.second_weight(i, m - 1);
            }
            out.Theta.mut(i, m) = acc;
        }
    }
    return out;
}

}  // namespace svlq
