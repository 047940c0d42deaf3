#include "svlq/fields.hpp"

#include <cmath>

#include "svlq/errors.hpp"

namespace svlq {

namespace {

double spectral_norm(const MapC& m) {
    if (m.size() == 0) return 0.0;
    if (m.size() == 1) return std::abs(m(0, 0));
    return Eigen::JacobiSVD<Mat>(m).singularValues()(0);
}

bool finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

MatrixField::MatrixField(const TimeGrid& grid, int rows, int cols)
    : rows_(rows), cols_(cols), N_(grid.steps()), h_(grid.h()),
      data_(static_cast<std::size_t>(rows) * cols * (grid.steps() + 1), 0.0) {}

MatrixField MatrixField::zero(const TimeGrid& grid, int rows, int cols) {
    return MatrixField(grid, rows, cols);
}

MatrixField MatrixField::constant(const TimeGrid& grid, const Mat& value) {
    MatrixField f(grid, static_cast<int>(value.rows()), static_cast<int>(value.cols()));
    for (int k = 0; k <= f.N_; ++k) f(k) = value;
    return f;
}

MatrixField MatrixField::from_function(const TimeGrid& grid, int rows, int cols,
                                       const std::function<Mat(double)>& fn) {
    MatrixField f(grid, rows, cols);
    for (int k = 0; k <= f.N_; ++k) {
        Mat v = fn(grid.t(k));
        if (v.rows() != rows || v.cols() != cols)
            throw ValidationError("matrix field: sample has wrong shape");
        f(k) = v;
    }
    return f;
}

std::size_t MatrixField::offset(int k) const {
    return static_cast<std::size_t>(k) * rows_ * cols_;
}

double MatrixField::sup_norm() const {
    double s = 0.0;
    for (int k = 0; k <= N_; ++k) s = std::max(s, spectral_norm((*this)(k)));
    return s;
}

bool MatrixField::all_finite() const { return finite(data_); }

// ---------------------------------------------------------------------------

TriangleKernel TriangleKernel::zero(const TimeGrid& grid, int rows, int cols) {
    TriangleKernel K;
    K.rows_ = rows;
    K.cols_ = cols;
    K.N_ = grid.steps();
    K.h_ = grid.h();
    const std::size_t n = static_cast<std::size_t>(K.N_ + 1) * (K.N_ + 2) / 2;
    K.data_.assign(n * rows * cols, 0.0);
    return K;
}

TriangleKernel TriangleKernel::family(const TimeGrid& grid, const Mat& coef, double alpha) {
    if (alpha != 1.0) KernelFamily::fractional(1.0, alpha);  // validates alpha
    TriangleKernel K = zero(grid, static_cast<int>(coef.rows()), static_cast<int>(coef.cols()));
    const double h = grid.h();
    for (int i = 0; i <= K.N_; ++i) {
        for (int j = 0; j < i; ++j)
            K.mut(i, j) = coef * std::pow((i - j) * h, alpha - 1.0);
        K.mut(i, i) = coef * (std::pow(h, alpha - 1.0) / alpha);
    }
    K.coef_ = coef;
    K.alpha_ = alpha;
    return K;
}

TriangleKernel TriangleKernel::sampled(const TimeGrid& grid, int rows, int cols,
                                       const std::function<Mat(int, int)>& f) {
    TriangleKernel K = zero(grid, rows, cols);
    for (int i = 1; i <= K.N_; ++i)
        for (int j = 0; j < i; ++j) {
            Mat v = f(i, j);
            if (v.rows() != rows || v.cols() != cols)
                throw ValidationError("triangle kernel: sample has wrong shape");
            K.mut(i, j) = v;
        }
    K.fill_diagonal();
    return K;
}

std::size_t TriangleKernel::offset(int i, int j) const {
    const std::size_t idx = static_cast<std::size_t>(i) * (i + 1) / 2 + j;
    return idx * rows_ * cols_;
}

MapM TriangleKernel::mut(int i, int j) {
    coef_.reset();
    alpha_ = 1.0;
    return {data_.data() + offset(i, j), rows_, cols_};
}

void TriangleKernel::fill_diagonal() {
    for (int k = 0; k <= N_; ++k) {
        const int src = k < N_ ? k + 1 : N_;
        const int col = k < N_ ? k : N_ - 1;
        MapM(data_.data() + offset(k, k), rows_, cols_) =
            MapC(data_.data() + offset(src, col), rows_, cols_);
    }
}

MapC TriangleKernel::shape(int i, int j) const {
    if (coef_) return {coef_->data(), rows_, cols_};
    return (*this)(i, j);
}

double TriangleKernel::first_weight(int j, int k) const {
    if (!coef_ || alpha_ == 1.0) return h_;
    return cell_moment(j - k, j - k + 1, h_, alpha_);
}

double TriangleKernel::second_weight(int m, int j) const {
    if (!coef_ || alpha_ == 1.0) return h_;
    return cell_moment(m - j - 1, m - j, h_, alpha_);
}

TriangleKernel TriangleKernel::transpose() const {
    TriangleKernel T;
    T.rows_ = cols_;
    T.cols_ = rows_;
    T.N_ = N_;
    T.h_ = h_;
    T.alpha_ = alpha_;
    if (coef_) T.coef_ = coef_->transpose();
    T.data_.resize(data_.size());
    for (int i = 0; i <= N_; ++i)
        for (int j = 0; j <= i; ++j)
            MapM(T.data_.data() + T.offset(i, j), T.rows_, T.cols_) = (*this)(i, j).transpose();
    return T;
}

bool TriangleKernel::is_zero() const {
    for (double x : data_)
        if (x != 0.0) return false;
    return true;
}

bool TriangleKernel::all_finite() const { return finite(data_); }

// ---------------------------------------------------------------------------

Pyramid::Pyramid(int d, int N) : d_(d), N_(N), levels_(N + 1) {
    for (int k = 0; k <= N; ++k) {
        const std::size_t n = N - k + 1;
        levels_[k].assign(n * (n + 1) / 2 * d * d, 0.0);
    }
}

MapC Pyramid::block(int i, int j, int k) const {
    const std::size_t a = i - k, b = j - k;
    return {levels_[k].data() + (a * (a + 1) / 2 + b) * d_ * d_, d_, d_};
}

Mat Pyramid::get(int i, int j, int k) const {
    if (k < 0 || k > std::min(i, j) || std::max(i, j) > N_)
        throw std::out_of_range("pyramid index outside k <= min(i, j) <= N");
    if (i >= j) return block(i, j, k);
    return block(j, i, k).transpose();
}

void Pyramid::set(int i, int j, int k, const Mat& value) {
    if (k < 0 || k > std::min(i, j) || std::max(i, j) > N_)
        throw std::out_of_range("pyramid index outside k <= min(i, j) <= N");
    const int a = std::max(i, j) - k, b = std::min(i, j) - k;
    MapM dst(levels_[k].data() + (static_cast<std::size_t>(a) * (a + 1) / 2 + b) * d_ * d_, d_, d_);
    if (i == j)
        dst = 0.5 * (value + value.transpose());
    else if (i > j)
        dst = value;
    else
        dst = value.transpose();
}

Mat Pyramid::level(int k) const {
    const int n = N_ - k + 1;
    Mat out(n * d_, n * d_);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b <= a; ++b) {
            MapC blk = block(a + k, b + k, k);
            out.block(a * d_, b * d_, d_, d_) = blk;
            if (a != b) out.block(b * d_, a * d_, d_, d_) = blk.transpose();
        }
    return out;
}

void Pyramid::set_level(int k, const Mat& dense) {
    const int n = N_ - k + 1;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b <= a; ++b) {
            Mat lo = dense.block(a * d_, b * d_, d_, d_);
            Mat up = dense.block(b * d_, a * d_, d_, d_);
            Mat v = 0.5 * (lo + up.transpose());
            if (a == b) v = 0.5 * (v + v.transpose()).eval();
            MapM(levels_[k].data() + (static_cast<std::size_t>(a) * (a + 1) / 2 + b) * d_ * d_,
                 d_, d_) = v;
        }
}

bool Pyramid::all_finite() const {
    for (const auto& l : levels_)
        if (!finite(l)) return false;
    return true;
}

PiPair PiPair::zero(const TimeGrid& grid, int d) {
    return {MatrixField::zero(grid, d, d), Pyramid(d, grid.steps())};
}

double PiPair::symmetry_defect() const {
    double defect = 0.0;
    for (int k = 0; k <= P1.steps(); ++k)
        defect = std::max(defect, (P1(k) - P1(k).transpose()).cwiseAbs().maxCoeff());
    for (int k = 0; k <= P2.steps(); ++k)
        for (int i = k; i <= P2.steps(); ++i) {
            MapC blk = P2.block(i, i, k);
            defect = std::max(defect, (blk - blk.transpose()).cwiseAbs().maxCoeff());
        }
    return defect;
}

Strategy Strategy::zero(const TimeGrid& grid, int d, int l) {
    return {MatrixField::zero(grid, l, d), TriangleKernel::zero(grid, l, d),
            MatrixField::zero(grid, l, 1)};
}

bool Problem::homogeneous() const {
    auto zero_field = [](const MatrixField& f) {
        for (double v : f.raw())
            if (v != 0.0) return false;
        return true;
    };
    return b.is_zero() && sigma.is_zero() && zero_field(q) && zero_field(rho);
}

// ---------------------------------------------------------------------------

namespace {

double squared_l2(const TriangleKernel& K) {
    const int N = K.steps();
    const double h = K.h();
    const double gamma = 2.0 * K.alpha() - 1.0;
    double acc = 0.0;
    for (int m = 1; m <= N; ++m)
        for (int j = 0; j < m; ++j) {
            const double w = K.has_family() ? cell_moment(m - j - 1, m - j, h, gamma) : h;
            acc += h * K.shape(m, j).squaredNorm() * w;
        }
    return acc;
}

double tail_sup(const TriangleKernel& K) {
    const int N = K.steps();
    const double h = K.h();
    const double gamma = 2.0 * K.alpha() - 1.0;
    double best = 0.0;
    for (int k = 0; k < N; ++k) {
        double acc = 0.0;
        for (int j = k; j < N; ++j) {
            const double w = K.has_family() ? cell_moment(j - k, j - k + 1, h, gamma) : h;
            acc += K.shape(j, k).squaredNorm() * w;
        }
        best = std::max(best, acc);
    }
    return best;
}

void require_shape(const char* name, int r, int c, int er, int ec) {
    if (r != er || c != ec)
        throw ValidationError(std::string("problem field ") + name + " has shape " +
                              std::to_string(r) + "x" + std::to_string(c) + ", expected " +
                              std::to_string(er) + "x" + std::to_string(ec));
}

}  // namespace

ProblemDiagnostics validate_problem(const Problem& p) {
    const int d = p.d, l = p.l;
    require_shape("A", p.A.rows(), p.A.cols(), d, d);
    require_shape("B", p.B.rows(), p.B.cols(), d, l);
    require_shape("C", p.C.rows(), p.C.cols(), d, d);
    require_shape("D", p.D.rows(), p.D.cols(), d, l);
    require_shape("Q", p.Q.rows(), p.Q.cols(), d, d);
    require_shape("S", p.S.rows(), p.S.cols(), l, d);
    require_shape("R", p.R.rows(), p.R.cols(), l, l);
    require_shape("b", p.b.rows(), p.b.cols(), d, 1);
    require_shape("sigma", p.sigma.rows(), p.sigma.cols(), d, 1);
    require_shape("q", p.q.rows(), p.q.cols(), d, 1);
    require_shape("rho", p.rho.rows(), p.rho.cols(), l, 1);
    require_shape("x", p.x.rows(), p.x.cols(), d, 1);
    if (p.t0 < 0 || p.t0 >= p.grid.steps()) throw ValidationError("input t0_index out of range");

    for (int k = 0; k <= p.grid.steps(); ++k) {
        if ((p.Q(k) - p.Q(k).transpose()).cwiseAbs().maxCoeff() > 0.0)
            throw ValidationError("weight Q is not symmetric");
        if ((p.R(k) - p.R(k).transpose()).cwiseAbs().maxCoeff() > 0.0)
            throw ValidationError("weight R is not symmetric");
    }

    ProblemDiagnostics diag;
    diag.A_l2 = std::sqrt(squared_l2(p.A));
    diag.B_l2 = std::sqrt(squared_l2(p.B));
    diag.C_tail_sup = tail_sup(p.C);
    diag.D_tail_sup = tail_sup(p.D);
    diag.Q_sup = p.Q.sup_norm();
    diag.R_sup = p.R.sup_norm();
    diag.S_sup = p.S.sup_norm();

    const double all[] = {diag.A_l2, diag.B_l2, diag.C_tail_sup, diag.D_tail_sup,
                          diag.Q_sup, diag.R_sup, diag.S_sup};
    const char* names[] = {"A", "B", "C", "D", "Q", "R", "S"};
    for (int i = 0; i < 7; ++i)
        if (!std::isfinite(all[i]))
            throw ValidationError(std::string("non-finite norm for ") + names[i]);
    return diag;
}

}  // namespace svlq
