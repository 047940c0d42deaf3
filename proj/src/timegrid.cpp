#include "svlq/timegrid.hpp"

#include <cmath>
#include <string>

#include "svlq/errors.hpp"

namespace svlq {

TimeGrid::TimeGrid(double horizon, int n_steps) : T_(horizon), N_(n_steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("time grid: horizon must be positive and finite");
    if (n_steps < 2) throw std::invalid_argument("time grid: need at least 2 steps");
    h_ = horizon / n_steps;
}

std::vector<double> TimeGrid::nodes() const {
    std::vector<double> out(N_ + 1);
    for (int k = 0; k <= N_; ++k) out[k] = t(k);
    return out;
}

TimeGrid make_grid(double T, int N) { return TimeGrid(T, N); }

KernelFamily KernelFamily::fractional(double c, double alpha) {
    if (!(alpha > 0.5))
        throw KernelNotSquareIntegrable("fractional kernel needs alpha > 1/2, got " +
                                        std::to_string(alpha));
    if (alpha > 1.0) throw ValidationError("fractional kernel needs alpha <= 1");
    return {c, alpha};
}

double power_moment(double a, double b, double gamma) {
    if (gamma == 1.0) return b - a;
    return (std::pow(b, gamma) - std::pow(a, gamma)) / gamma;
}

double cell_moment(int n0, int n1, double h, double gamma) {
    if (gamma == 1.0) return (n1 - n0) * h;
    const double scale = std::pow(h, gamma) / gamma;
    return scale * (std::pow(static_cast<double>(n1), gamma) -
                    std::pow(static_cast<double>(n0), gamma));
}

WeightTable::WeightTable(const TimeGrid& grid, KernelFamily family) : N_(grid.steps()) {
    if (family.alpha != 1.0) family = KernelFamily::fractional(family.c, family.alpha);
    by_gap_.resize(N_ + 1, 0.0);
    for (int g = 1; g <= N_; ++g)
        by_gap_[g] = family.c * cell_moment(g - 1, g, grid.h(), family.alpha);
}

double WeightTable::operator()(int m, int j) const {
    if (m < 0 || m > N_ || j < 0 || j >= m)
        throw std::invalid_argument("weight table: need 0 <= j < m <= N");
    return by_gap_[m - j];
}

WeightTable singular_weights(const TimeGrid& grid, KernelFamily family) {
    return WeightTable(grid, family);
}

double tail_integral(std::span<const double> samples, int k, const TimeGrid& grid) {
    const int N = grid.steps();
    if (k < 0 || k > N) throw std::invalid_argument("tail_integral: start index out of range");
    if (static_cast<int>(samples.size()) < N)
        throw std::invalid_argument("tail_integral: need at least N samples");
    double acc = 0.0;
    for (int j = k; j < N; ++j) acc += samples[j];
    return grid.h() * acc;
}

}  // namespace svlq
