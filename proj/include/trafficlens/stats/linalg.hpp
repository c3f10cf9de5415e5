#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "trafficlens/common.hpp"

namespace trafficlens::stats {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return std::span<const double>(data_).subspan(r * cols_, cols_); }
  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }

  std::vector<double> col(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw InputError("matrix product: dimension mismatch");
    Matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Householder QR with column pivoting, A P = Q R.
class PivotedQR {
 public:
  /// Columns whose remaining norm falls below tol_factor * (largest column norm) are treated as dependent.
  explicit PivotedQR(const Matrix& a, double tol_factor = 1e-10) : qr_(a), perm_(a.cols()) {
    const std::size_t n = a.rows(), p = a.cols();
    std::iota(perm_.begin(), perm_.end(), 0);
    double max_norm = 0.0;
    for (std::size_t j = 0; j < p; ++j) max_norm = std::max(max_norm, column_norm(j, 0));
    tol_ = tol_factor * max_norm;
    tau_.assign(p, 0.0);
    rank_ = 0;
    for (std::size_t k = 0; k < std::min(n, p); ++k) {
      std::size_t best = k;
      double best_norm = -1.0;
      for (std::size_t j = k; j < p; ++j) {
        double nj = column_norm(j, k);
        if (nj > best_norm) {
          best_norm = nj;
          best = j;
        }
      }
      if (best_norm <= tol_ || best_norm == 0.0) break;
      if (best != k) {
        for (std::size_t r = 0; r < n; ++r) std::swap(qr_(r, k), qr_(r, best));
        std::swap(perm_[k], perm_[best]);
      }
      householder(k);
      ++rank_;
    }
  }

  std::size_t rank() const { return rank_; }
  const std::vector<std::size_t>& permutation() const { return perm_; }

  /// Applies Q^T to b in place.
  void apply_qt(std::vector<double>& b) const {
    const std::size_t n = qr_.rows();
    for (std::size_t k = 0; k < rank_; ++k) {
      double dot = b[k];
      for (std::size_t r = k + 1; r < n; ++r) dot += qr_(r, k) * b[r];
      dot *= tau_[k];
      b[k] -= dot;
      for (std::size_t r = k + 1; r < n; ++r) b[r] -= dot * qr_(r, k);
    }
  }

  /// Least-squares solution for a full-rank system.
  std::vector<double> solve(std::vector<double> b) const {
    const std::size_t p = qr_.cols();
    if (rank_ < p) throw NumericError("least squares: design matrix is rank deficient");
    apply_qt(b);
    std::vector<double> z(p);
    for (std::size_t i = p; i-- > 0;) {
      double s = b[i];
      for (std::size_t j = i + 1; j < p; ++j) s -= r(i, j) * z[j];
      z[i] = s / r(i, i);
    }
    std::vector<double> x(p);
    for (std::size_t i = 0; i < p; ++i) x[perm_[i]] = z[i];
    return x;
  }

  /// (A^T A)^{-1} in the original column order, via R^{-1} R^{-T}.
  Matrix normal_inverse() const {
    const std::size_t p = qr_.cols();
    if (rank_ < p) throw NumericError("least squares: design matrix is rank deficient");
    Matrix rinv(p, p);
    for (std::size_t j = p; j-- > 0;) {
      rinv(j, j) = 1.0 / r(j, j);
      for (std::size_t i = j; i-- > 0;) {
        double s = 0.0;
        for (std::size_t k = i + 1; k <= j; ++k) s += r(i, k) * rinv(k, j);
        rinv(i, j) = -s / r(i, i);
      }
    }
    Matrix out(p, p);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b) {
        double s = 0.0;
        for (std::size_t k = std::max(a, b); k < p; ++k) s += rinv(a, k) * rinv(b, k);
        out(perm_[a], perm_[b]) = s;
      }
    return out;
  }

 private:
  double r(std::size_t i, std::size_t j) const { return i == j ? diag_[i] : qr_(i, j); }

  double column_norm(std::size_t j, std::size_t from) const {
    double s = 0.0;
    for (std::size_t r = from; r < qr_.rows(); ++r) s += qr_(r, j) * qr_(r, j);
    return std::sqrt(s);
  }

  // Reflector H = I - tau v v^T with v(k) = 1 stored below the diagonal.
  void householder(std::size_t k) {
    const std::size_t n = qr_.rows(), p = qr_.cols();
    const double norm = column_norm(k, k);
    const double alpha = qr_(k, k) > 0 ? -norm : norm;
    const double v0 = qr_(k, k) - alpha;
    for (std::size_t r = k + 1; r < n; ++r) qr_(r, k) /= v0;
    tau_[k] = -v0 / alpha;
    for (std::size_t j = k + 1; j < p; ++j) {
      double dot = qr_(k, j);
      for (std::size_t r = k + 1; r < n; ++r) dot += qr_(r, k) * qr_(r, j);
      dot *= tau_[k];
      qr_(k, j) -= dot;
      for (std::size_t r = k + 1; r < n; ++r) qr_(r, j) -= dot * qr_(r, k);
    }
    if (diag_.size() < p) diag_.resize(p, 0.0);
    diag_[k] = alpha;
  }

  Matrix qr_;
  std::vector<std::size_t> perm_;
  std::vector<double> tau_;
  std::vector<double> diag_;
  std::size_t rank_ = 0;
  double tol_ = 0.0;
};

/// Indices of columns lying in the span of the columns before them (in order).
inline std::vector<std::size_t> dependent_columns(const Matrix& a, double tol_factor = 1e-10) {
  std::vector<std::size_t> out;
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    kept.push_back(j);
    Matrix sub(a.rows(), kept.size());
    for (std::size_t r = 0; r < a.rows(); ++r)
      for (std::size_t c = 0; c < kept.size(); ++c) sub(r, c) = a(r, kept[c]);
    if (PivotedQR(sub, tol_factor).rank() < kept.size()) {
      out.push_back(j);
      kept.pop_back();
    }
  }
  return out;
}

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // unit eigenvectors as columns, matching `values`
};

/// Cyclic Jacobi rotations until the off-diagonal mass is below tol relative to the matrix norm.
inline SymmetricEigen jacobi_eigen(Matrix a, double tol = 1e-12, int max_sweeps = 100) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw InputError("jacobi_eigen: matrix is not square");
  Matrix v = Matrix::identity(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) total += a(i, j) * a(i, j);
  const double threshold = tol * std::sqrt(total);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    if (std::sqrt(off) <= threshold) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

}  // namespace trafficlens::stats
