#pragma once

#include <cmath>
#include <random>

#include "svlq/config.hpp"
#include "svlq/fields.hpp"

namespace svlq::testing {

// Scalar problem on [0, 1] with constant-family kernels; zero entries are omitted.
inline json scalar_config(int N, double A, double B, double C, double D, double Q, double R,
                          double S = 0.0) {
    json cfg{{"dimensions", {{"d", 1}, {"l", 1}}},
             {"horizon", 1.0},
             {"steps", N},
             {"kernels", json::object()},
             {"weights", {{"Q", Q}, {"R", R}, {"S", S}}},
             {"input", {{"t0_index", 0}, {"x", 1.0}}}};
    auto put = [&](const char* name, double c) {
        if (c != 0.0) cfg["kernels"][name] = {{"family", "constant"}, {"c", c}};
    };
    put("A", A);
    put("B", B);
    put("C", C);
    put("D", D);
    return cfg;
}

inline Problem scalar_problem(int N, double A, double B, double C, double D, double Q, double R,
                              double S = 0.0) {
    return build_problem(scalar_config(N, A, B, C, D, Q, R, S));
}

inline Problem tanh_problem(int N) { return scalar_problem(N, 0, 1, 0, 0, 1, 1); }

inline Problem d_only_problem(int N, double sigma = 0.0) {
    json cfg = scalar_config(N, 0, 0, 0, 1, 1, 1);
    if (sigma != 0.0) cfg["inhomogeneous"]["sigma"] = {{"family", "constant"}, {"c", sigma}};
    cfg["input"]["x"] = 0.0;
    return build_problem(cfg);
}

inline Mat random_matrix(std::mt19937_64& rng, int r, int c) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
}

inline TriangleKernel random_kernel(const TimeGrid& g, std::mt19937_64& rng, int r, int c) {
    return TriangleKernel::sampled(g, r, c, [&](int, int) { return random_matrix(rng, r, c); });
}

inline MatrixField random_field(const TimeGrid& g, std::mt19937_64& rng, int r, int c) {
    MatrixField f(g, r, c);
    for (int k = 0; k <= g.steps(); ++k) f(k) = random_matrix(rng, r, c);
    return f;
}

// Random Π-pair with symmetric P¹ and transpose-consistent P².
inline PiPair random_pi(const TimeGrid& g, std::mt19937_64& rng, int d) {
    PiPair P = PiPair::zero(g, d);
    for (int k = 0; k <= g.steps(); ++k) {
        const Mat a = random_matrix(rng, d, d);
        P.P1(k) = a + a.transpose();
    }
    for (int k = 0; k <= g.steps(); ++k)
        for (int i = k; i <= g.steps(); ++i)
            for (int j = k; j <= i; ++j) P.P2.set(i, j, k, random_matrix(rng, d, d));
    return P;
}

// d = 2, l = 1, R = 1, Q = SᵀS + (psd), with random kernels of moderate size.
inline Problem standard_condition_problem(std::uint64_t seed, int N) {
    std::mt19937_64 rng(seed);
    Problem p = scalar_problem(N, 0, 0, 0, 0, 1, 1);
    p.d = 2;
    p.l = 1;
    p.A = TriangleKernel::family(p.grid, 0.5 * random_matrix(rng, 2, 2), 1.0);
    p.B = TriangleKernel::sampled(p.grid, 2, 1, [&](int i, int j) {
        Mat m = 0.5 * random_matrix(rng, 2, 1);
        return Mat(m * (1.0 + 0.5 * std::cos(p.grid.t(i) - p.grid.t(j))));
    });
    p.C = TriangleKernel::family(p.grid, 0.3 * random_matrix(rng, 2, 2), 0.8);
    p.D = TriangleKernel::family(p.grid, 0.3 * random_matrix(rng, 2, 1), 1.0);
    const Mat S = random_matrix(rng, 1, 2);
    const Mat E = random_matrix(rng, 2, 2);
    p.S = MatrixField::constant(p.grid, S);
    p.Q = MatrixField::constant(p.grid, S.transpose() * S + 0.1 * E * E.transpose());
    p.R = MatrixField::constant(p.grid, Mat::Ones(1, 1));
    p.b = TriangleKernel::zero(p.grid, 2, 1);
    p.sigma = TriangleKernel::zero(p.grid, 2, 1);
    p.q = MatrixField::zero(p.grid, 2, 1);
    p.rho = MatrixField::zero(p.grid, 1, 1);
    p.x = MatrixField::constant(p.grid, Mat::Ones(2, 1));
    return p;
}

}  // namespace svlq::testing
