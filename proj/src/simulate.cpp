#include "svlq/simulate.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "svlq/ebsvie.hpp"
#include "svlq/volterra_ops.hpp"

namespace svlq {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;  // in (0, 1)
}

struct KernelCells {
    // Cell integrals against the second argument, stored densely for i > m.
    std::vector<double> w;
    int r = 0, c = 0, N = 0;
    bool zero = true;

    KernelCells(const TriangleKernel& K) : r(K.rows()), c(K.cols()), N(K.steps()) {
        zero = K.is_zero();
        if (zero) return;
        w.assign(static_cast<std::size_t>(N + 1) * (N + 1) * r * c, 0.0);
        for (int i = 1; i <= N; ++i)
            for (int m = 0; m < i; ++m)
                MapM(ptr(i, m), r, c) = K.shape(i, m) * K.second_weight(i, m);
    }
    double* ptr(int i, int m) {
        return w.data() + (static_cast<std::size_t>(i) * (N + 1) + m) * r * c;
    }
    MapC at(int i, int m) const {
        return {w.data() + (static_cast<std::size_t>(i) * (N + 1) + m) * r * c, r, c};
    }
};

}  // namespace

double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step) {
    const std::uint64_t key = splitmix(seed ^ splitmix(path * 0x632be59bd9b4e019ULL + 1));
    const std::uint64_t a = splitmix(key ^ (2 * step));
    const std::uint64_t b = splitmix(key ^ (2 * step + 1));
    const double u1 = to_unit(a), u2 = to_unit(b);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SimBatch simulate_closed_loop(const Problem& p, const Strategy& s, int t0, const MatrixField& x,
                              int n_paths, std::uint64_t seed, int workers) {
    const int N = p.grid.steps(), d = p.d, l = p.l;
    const double h = p.grid.h(), sqh = std::sqrt(h);
    if (n_paths < 0) throw std::invalid_argument("simulate: negative path count");
    if (t0 < 0 || t0 >= N) throw std::invalid_argument("simulate: t0 out of range");
    if (s.Xi.rows() != l || s.Xi.cols() != d || s.Gamma.rows() != l || s.Gamma.cols() != d ||
        s.v.rows() != l || x.rows() != d)
        throw std::invalid_argument("simulate: strategy shape does not match the problem");

    SimBatch batch;
    batch.n_paths = n_paths;
    batch.d = d;
    batch.l = l;
    batch.N = N;
    batch.t0 = t0;
    batch.seed = seed;
    batch.X.assign(static_cast<std::size_t>(n_paths) * (N + 1) * d, 0.0);
    batch.u.assign(static_cast<std::size_t>(n_paths) * (N + 1) * l, 0.0);
    batch.flagged.assign(n_paths, 0);

    const KernelCells A(p.A), B(p.B), C(p.C), D(p.D), b(p.b), sig(p.sigma);
    // Γ enters through cell integrals in its first argument.
    std::vector<double> gw(static_cast<std::size_t>(N + 1) * (N + 1) * l * d, 0.0);
    const bool has_gamma = !s.Gamma.is_zero();
    if (has_gamma)
        for (int m = 0; m <= N; ++m)
            for (int j = m; j < N; ++j)
                MapM(gw.data() + (static_cast<std::size_t>(j) * (N + 1) + m) * l * d, l, d) =
                    s.Gamma.shape(j, m) * s.Gamma.first_weight(j, m);

    auto run_path = [&](int path) {
        Mat theta = Mat::Zero(d, N + 1);
        for (int i = t0; i <= N; ++i) theta.col(i) = x(i);
        Vec u(l), noise_drift(d);
        double* Xp = batch.X.data() + static_cast<std::size_t>(path) * (N + 1) * d;
        double* Up = batch.u.data() + static_cast<std::size_t>(path) * (N + 1) * l;
        bool bad = false;
        for (int m = t0; m <= N; ++m) {
            const Vec Xm = theta.col(m);
            u.noalias() = s.Xi(m) * Xm + s.v(m);
            if (has_gamma)
                for (int j = m; j < N; ++j)
                    u.noalias() +=
                        MapC(gw.data() + (static_cast<std::size_t>(j) * (N + 1) + m) * l * d, l, d) *
                        theta.col(j);
            Eigen::Map<Vec>(Xp + static_cast<std::size_t>(m) * d, d) = Xm;
            Eigen::Map<Vec>(Up + static_cast<std::size_t>(m) * l, l) = u;
            if (!Xm.allFinite() || !u.allFinite()) {
                bad = true;
                break;
            }
            if (m == N) break;
            const double dW = sqh * counter_normal(seed, path, m);
            const double scale = dW / h;
            for (int i = m + 1; i <= N; ++i) {
                auto col = theta.col(i);
                if (!A.zero) col.noalias() += A.at(i, m) * Xm;
                if (!B.zero) col.noalias() += B.at(i, m) * u;
                if (!b.zero) col += b.at(i, m);
                if (!C.zero) col.noalias() += scale * (C.at(i, m) * Xm);
                if (!D.zero) col.noalias() += scale * (D.at(i, m) * u);
                if (!sig.zero) col += scale * sig.at(i, m);
            }
        }
        batch.flagged[path] = bad ? 1 : 0;
    };

    workers = std::max(1, workers);
    if (workers == 1 || n_paths < 2) {
        for (int path = 0; path < n_paths; ++path) run_path(path);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int path = w; path < n_paths; path += workers) run_path(path);
            });
        for (auto& t : pool) t.join();
    }
    for (char f : batch.flagged) batch.flagged_count += f;
    return batch;
}

std::vector<double> path_costs(const SimBatch& batch, const Problem& p) {
    const int N = batch.N;
    const double h = p.grid.h();
    std::vector<double> out(batch.n_paths, std::numeric_limits<double>::quiet_NaN());
    for (int path = 0; path < batch.n_paths; ++path) {
        if (batch.flagged[path]) continue;
        double acc = 0.0;
        for (int m = batch.t0; m < N; ++m) {
            const auto X = batch.state(path, m);
            const auto u = batch.control(path, m);
            acc += X.dot(p.Q(m) * X) + 2.0 * u.dot(p.S(m) * X) + u.dot(p.R(m) * u) +
                   2.0 * X.dot(p.q(m).col(0)) + 2.0 * u.dot(p.rho(m).col(0));
        }
        out[path] = h * acc;
    }
    return out;
}

CostEstimate estimate_cost(const SimBatch& batch, const Problem& p) {
    if (batch.n_paths - batch.flagged_count <= 0)
        throw std::invalid_argument("estimate_cost: batch has no usable paths");
    const std::vector<double> costs = path_costs(batch, p);
    CostEstimate est;
    double sum = 0.0;
    for (int i = 0; i < batch.n_paths; ++i)
        if (!batch.flagged[i]) {
            sum += costs[i];
            ++est.used_paths;
        }
    est.mean = sum / est.used_paths;
    double ss = 0.0;
    for (int i = 0; i < batch.n_paths; ++i)
        if (!batch.flagged[i]) ss += (costs[i] - est.mean) * (costs[i] - est.mean);
    est.stderr_ = est.used_paths > 1 ? std::sqrt(ss / (est.used_paths - 1) / est.used_paths) : 0.0;
    return est;
}

namespace {

// Coefficients of the quadratic through (m_k, y_k), k = 0, 1, 2.
std::array<double, 3> quadratic_through(const double* m, const double* y) {
    const double d01 = (y[1] - y[0]) / (m[1] - m[0]);
    const double d12 = (y[2] - y[1]) / (m[2] - m[1]);
    const double c2 = (d12 - d01) / (m[2] - m[0]);
    const double c1 = d01 - c2 * (m[0] + m[1]);
    const double c0 = y[0] - c1 * m[0] - c2 * m[0] * m[0];
    return {c0, c1, c2};
}

}  // namespace

FrechetReport frechet_check(const Problem& p, const Strategy& base, const MatrixField& direction,
                            int t0, const MatrixField& x, const std::vector<double>& mus,
                            int n_paths, std::uint64_t seed, int workers,
                            const SolverOptions& opts) {
    if (mus.size() < 4) throw std::invalid_argument("frechet_check: need at least four μ values");
    const int N = p.grid.steps();
    const double h = p.grid.h();
    FrechetReport rep;
    rep.mus = mus;

    std::vector<std::vector<double>> per_path;
    for (double mu : mus) {
        Strategy s = base;
        for (int k = 0; k <= N; ++k) s.v(k) += mu * direction(k);
        const SimBatch batch = simulate_closed_loop(p, s, t0, x, n_paths, seed, workers);
        rep.costs.push_back(estimate_cost(batch, p).mean);
        per_path.push_back(path_costs(batch, p));
    }
    const auto c = quadratic_through(mus.data(), rep.costs.data());
    rep.c0 = c[0];
    rep.c1 = c[1];
    rep.c2 = c[2];
    for (std::size_t i = 3; i < mus.size(); ++i) {
        const double fit = c[0] + c[1] * mus[i] + c[2] * mus[i] * mus[i];
        const double scale = std::max(std::abs(rep.costs[i]), std::abs(fit));
        rep.held_out_residual =
            std::max(rep.held_out_residual, std::abs(fit - rep.costs[i]) / std::max(scale, 1e-300));
    }

    std::vector<double> slopes;
    for (int path = 0; path < n_paths; ++path) {
        const double y[3] = {per_path[0][path], per_path[1][path], per_path[2][path]};
        if (!std::isfinite(y[0]) || !std::isfinite(y[1]) || !std::isfinite(y[2])) continue;
        slopes.push_back(quadratic_through(mus.data(), y)[1]);
    }
    double mean = 0.0;
    for (double s : slopes) mean += s;
    mean /= std::max<std::size_t>(slopes.size(), 1);
    double ss = 0.0;
    for (double s : slopes) ss += (s - mean) * (s - mean);
    rep.linear_coef = c[1];
    rep.linear_stderr =
        slopes.size() > 1 ? std::sqrt(ss / (slopes.size() - 1) / slopes.size()) : 0.0;

    // Derivative from the representation: 2 E∫ <N X + ∫(Bᵀ⋄P + MΓ)Θ + κ + M v, ṽ>.
    const PiPair P = solve_lyapunov(base.Xi, base.Gamma, p, opts);
    const Feedforward ff = strategy_inhomogeneous(P, base, p, opts);
    const MeanFlow mf = mean_state(base.Xi, base.Gamma, p, x, base.v, t0);
    const TriangleKernel W = rint(P, p.B);
    const MatrixField DPD = sandwich(p.D.transpose(), P, p.D);
    const MatrixField DPC = sandwich(p.D.transpose(), P, p.C);
    double pred = 0.0;
    for (int m = t0; m < N; ++m) {
        const Mat M = Mat(p.R(m)) + DPD(m);
        Vec g = (Mat(p.S(m)) + DPC(m) + M * base.Xi(m)) * mf.X(m) + ff.kappa(m) + M * base.v(m);
        for (int j = m; j < N; ++j)
            g += (h * W(j, m).transpose() +
                  M * base.Gamma.shape(j, m) * base.Gamma.first_weight(j, m)) *
                 mf.Theta(j, m);
        pred += h * g.dot(direction(m).col(0));
    }
    rep.predicted_linear = 2.0 * pred;
    return rep;
}

DualityReport duality_check(const MatrixField& Xi, const TriangleKernel& Gamma,
                            const TriangleKernel& chi, const MatrixField& psi, const MatrixField& v,
                            int t0, const MatrixField& x, const Problem& p,
                            const SolverOptions& opts) {
    const int N = p.grid.steps();
    const double h = p.grid.h();
    const MeanFlow mf = mean_state(Xi, Gamma, p, x, v, t0);
    DualityReport rep;
    for (int m = t0; m < N; ++m) {
        double acc = psi(m).col(0).dot(mf.X(m).col(0));
        for (int j = m; j < N; ++j)
            acc += chi.first_weight(j, m) * (chi.shape(j, m).transpose() * mf.Theta(j, m))(0, 0);
        rep.lhs += h * acc;
    }
    const EtaField eta = solve_ebsvie(Xi, Gamma, chi, psi, p, opts);
    for (int m = t0; m < N; ++m) {
        double acc = eta.eta(m, t0).col(0).dot(x(m).col(0));
        Mat beta = Mat::Zero(p.l, 1);
        for (int j = m; j < N; ++j) {
            acc += p.b.first_weight(j, m) * (eta.eta(j, m).transpose() * p.b.shape(j, m))(0, 0);
            beta += (p.B.shape(j, m) * p.B.first_weight(j, m)).transpose() * eta.eta(j, m);
        }
        acc += beta.col(0).dot(v(m).col(0));
        rep.rhs += h * acc;
    }
    const double scale = std::max(std::abs(rep.lhs), std::abs(rep.rhs));
    rep.residual = scale > 0.0 ? std::abs(rep.lhs - rep.rhs) / scale : 0.0;
    return rep;
}

OrderingReport optimality_ordering(const Problem& p, const Strategy& optimal, int t0,
                                   const MatrixField& x, int n_paths, std::uint64_t seed,
                                   int workers) {
    OrderingReport rep;
    rep.gain_shift = {0.25, -0.25, 0.0, 0.0, 0.2};
    rep.feedforward_shift = {0.0, 0.0, 0.25, -0.25, -0.2};
    rep.optimal = estimate_cost(simulate_closed_loop(p, optimal, t0, x, n_paths, seed, workers), p);
    rep.ordered = true;
    for (std::size_t i = 0; i < rep.gain_shift.size(); ++i) {
        Strategy s = optimal;
        for (int k = 0; k <= p.grid.steps(); ++k) {
            s.Xi(k).array() += rep.gain_shift[i];
            s.v(k).array() += rep.feedforward_shift[i];
        }
        rep.perturbed.push_back(
            estimate_cost(simulate_closed_loop(p, s, t0, x, n_paths, seed, workers), p));
        if (rep.perturbed.back().mean < rep.optimal.mean - 2.0 * rep.optimal.stderr_)
            rep.ordered = false;
    }
    return rep;
}

}  // namespace svlq
