#pragma once

#include <span>
#include <vector>

namespace svlq {

/// Uniform partition 0 = t_0 < ... < t_N = T.
class TimeGrid {
public:
    TimeGrid(double horizon, int n_steps);

    double horizon() const { return T_; }
    int steps() const { return N_; }
    double h() const { return h_; }
    double t(int k) const { return k == N_ ? T_ : k * h_; }
    std::vector<double> nodes() const;

private:
    double T_;
    int N_;
    double h_;
};

TimeGrid make_grid(double T, int N);

/// Kernel family c * (t - s)^(alpha - 1). alpha = 1 is the constant kernel.
struct KernelFamily {
    double c = 1.0;
    double alpha = 1.0;

    static KernelFamily constant(double c) { return {c, 1.0}; }
    static KernelFamily fractional(double c, double alpha);
};

// Integral of u^(gamma - 1) over [a, b] with 0 <= a <= b, gamma > 0.
double power_moment(double a, double b, double gamma);

// Same integral over [n0 h, n1 h] for integer cell offsets; avoids the
// cancellation in b^gamma - a^gamma when both ends are large.
double cell_moment(int n0, int n1, double h, double gamma);

/// w(m, j) approximates the integral of K(t_m, s) over [t_j, t_{j+1}], j < m.
class WeightTable {
public:
    WeightTable(const TimeGrid& grid, KernelFamily family);

    double operator()(int m, int j) const;
    int steps() const { return N_; }

private:
    int N_;
    std::vector<double> by_gap_;  // weights depend only on m - j
};

WeightTable singular_weights(const TimeGrid& grid, KernelFamily family);

/// Left-endpoint sum h * sum_{j=k}^{N-1} samples[j].
double tail_integral(std::span<const double> samples, int k, const TimeGrid& grid);

}  // namespace svlq
