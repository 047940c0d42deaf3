#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "svlq/timegrid.hpp"

namespace svlq {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using MapC = Eigen::Map<const Mat>;
using MapM = Eigen::Map<Mat>;

/// One matrix per grid node, k = 0..N.
class MatrixField {
public:
    MatrixField() = default;
    MatrixField(const TimeGrid& grid, int rows, int cols);

    static MatrixField zero(const TimeGrid& grid, int rows, int cols);
    static MatrixField constant(const TimeGrid& grid, const Mat& value);
    static MatrixField from_function(const TimeGrid& grid, int rows, int cols,
                                     const std::function<Mat(double)>& f);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int steps() const { return N_; }
    double h() const { return h_; }

    MapC operator()(int k) const { return {data_.data() + offset(k), rows_, cols_}; }
    MapM operator()(int k) { return {data_.data() + offset(k), rows_, cols_}; }

    const std::vector<double>& raw() const { return data_; }
    double sup_norm() const;  // max over nodes of the spectral norm
    bool all_finite() const;

private:
    std::size_t offset(int k) const;
    int rows_ = 0, cols_ = 0, N_ = 0;
    double h_ = 0.0;
    std::vector<double> data_;
};

/// Matrix samples on {(t_i, t_j) : i >= j}.
///
/// Off-diagonal entries are pointwise values. The diagonal entry (k, k) holds
/// the average of K(., t_k) over the first cell [t_k, t_{k+1}]; the kernel is
/// never evaluated at t = s. A family tag K = coef * (t - s)^(alpha - 1)
/// switches every cell integral to exact moments.
class TriangleKernel {
public:
    TriangleKernel() = default;

    static TriangleKernel zero(const TimeGrid& grid, int rows, int cols);
    static TriangleKernel family(const TimeGrid& grid, const Mat& coef, double alpha);
    // f(i, j) is called for i > j only; the diagonal is filled from (k+1, k).
    static TriangleKernel sampled(const TimeGrid& grid, int rows, int cols,
                                  const std::function<Mat(int, int)>& f);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int steps() const { return N_; }
    double h() const { return h_; }

    MapC operator()(int i, int j) const { return {data_.data() + offset(i, j), rows_, cols_}; }
    // Writing drops the family tag; the caller owns consistency of the diagonal.
    MapM mut(int i, int j);

    bool has_family() const { return coef_.has_value(); }
    double alpha() const { return alpha_; }
    const Mat& family_coef() const { return *coef_; }

    // Matrix factor of a cell integral: the family coefficient, or the sample.
    MapC shape(int i, int j) const;
    // Scalar factor of the integral of K(r, t_k) over r in [t_j, t_{j+1}], j >= k.
    double first_weight(int j, int k) const;
    // Scalar factor of the integral of K(t_m, s) over s in [t_j, t_{j+1}], j < m.
    double second_weight(int m, int j) const;

    TriangleKernel transpose() const;
    bool is_zero() const;
    bool all_finite() const;
    const std::vector<double>& raw() const { return data_; }

    void fill_diagonal();

private:
    std::size_t offset(int i, int j) const;
    int rows_ = 0, cols_ = 0, N_ = 0;
    double h_ = 0.0;
    double alpha_ = 1.0;
    std::optional<Mat> coef_;
    std::vector<double> data_;
};

/// d x d blocks on the pyramid {(i, j, k) : k <= min(i, j)}, stored for i >= j
/// with the other half given by transposition.
class Pyramid {
public:
    Pyramid() = default;
    Pyramid(int d, int N);

    int dim() const { return d_; }
    int steps() const { return N_; }

    Mat get(int i, int j, int k) const;
    void set(int i, int j, int k, const Mat& value);

    // Dense (n d) x (n d) block matrix of level k over nodes k..N, n = N - k + 1.
    Mat level(int k) const;
    // Stores the lower half of a dense level; the input is symmetrized first.
    void set_level(int k, const Mat& dense);

    MapC block(int i, int j, int k) const;  // requires i >= j >= k
    bool all_finite() const;

private:
    int d_ = 0, N_ = 0;
    std::vector<std::vector<double>> levels_;
};

struct PiPair {
    MatrixField P1;
    Pyramid P2;

    static PiPair zero(const TimeGrid& grid, int d);
    int dim() const { return P1.rows(); }
    // Max deviation from symmetry of P1 and from the transpose rule of P2 diagonals.
    double symmetry_defect() const;
};

struct Strategy {
    MatrixField Xi;         // l x d
    TriangleKernel Gamma;   // l x d
    MatrixField v;          // l x 1

    static Strategy zero(const TimeGrid& grid, int d, int l);
};

struct Problem {
    int d = 1, l = 1;
    TimeGrid grid{1.0, 2};
    TriangleKernel A, B, C, D;  // d x d, d x l, d x d, d x l
    MatrixField Q, S, R;        // d x d, l x d, l x l
    TriangleKernel b, sigma;    // d x 1
    MatrixField q, rho;         // d x 1, l x 1
    int t0 = 0;
    MatrixField x;              // d x 1
    std::string source;         // JSON the problem was built from, if any

    bool homogeneous() const;
};

struct ProblemDiagnostics {
    double A_l2 = 0, B_l2 = 0;
    double C_tail_sup = 0, D_tail_sup = 0;
    double Q_sup = 0, R_sup = 0, S_sup = 0;
};

ProblemDiagnostics validate_problem(const Problem& p);

}  // namespace svlq
