#pragma once

// Minimal dense / sparse kernels in 64-bit floating point.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tea/error.hpp"
#include "tea/rng.hpp"

namespace tea {

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) throw ShapeError("DenseMatrix: value count does not match shape");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {values_.data() + r * cols_, cols_}; }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct SparseEntry {
  std::size_t col;
  double weight;
  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Row-compressed matrix. Column indices are strictly increasing in each row.
class SparseRowMatrix {
 public:
  SparseRowMatrix() = default;
  SparseRowMatrix(std::size_t rows, std::size_t cols) : cols_(cols), rows_(rows) {}

  std::size_t rows() const noexcept { return rows_.size(); }
  std::size_t cols() const noexcept { return cols_; }

  std::span<const SparseEntry> row(std::size_t r) const noexcept { return rows_[r]; }

  /// Replaces row r; entries are sorted and must not repeat a column.
  void set_row(std::size_t r, std::vector<SparseEntry> entries) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.col < b.col; });
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].col >= cols_) throw ShapeError("SparseRowMatrix: column index out of range");
      if (i > 0 && entries[i].col == entries[i - 1].col)
        throw ShapeError("SparseRowMatrix: duplicate column in row");
      if (!std::isfinite(entries[i].weight)) throw ShapeError("SparseRowMatrix: non-finite weight");
    }
    rows_[r] = std::move(entries);
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows(), cols_);
    for (std::size_t r = 0; r < rows(); ++r)
      for (const auto& e : rows_[r]) d(r, e.col) = e.weight;
    return d;
  }

  friend bool operator==(const SparseRowMatrix&, const SparseRowMatrix&) = default;

 private:
  std::size_t cols_ = 0;
  std::vector<std::vector<SparseEntry>> rows_;
};

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

/// Exact sparse-dense product a * b.
inline DenseMatrix spmm(const SparseRowMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("spmm: a.cols != b.rows");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    for (const auto& e : a.row(r)) axpy(e.weight, b.row(e.col), dst);
  }
  return out;
}

/// a^T * b, the adjoint of spmm with respect to its dense operand.
inline DenseMatrix spmm_transposed(const SparseRowMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("spmm_transposed: a.rows != b.rows");
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto src = b.row(r);
    for (const auto& e : a.row(r)) axpy(e.weight, src, out.row(e.col));
  }
  return out;
}

/// a * b^T.
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  return out;
}

/// a * b.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double v = a(i, k);
      if (v != 0.0) axpy(v, b.row(k), dst);
    }
  }
  return out;
}

/// a^T * b.
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto src = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      double v = a(k, i);
      if (v != 0.0) axpy(v, src, out.row(i));
    }
  }
  return out;
}

/// In-place softmax of one row with max subtraction. Throws when every entry is -inf.
inline void softmax_inplace(std::span<double> row) {
  if (row.empty()) return;
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : row) {
    if (std::isnan(v)) {  // let NaN reach the divergence check instead of failing here
      std::fill(row.begin(), row.end(), v);
      return;
    }
    mx = std::max(mx, v);
  }
  if (mx == -std::numeric_limits<double>::infinity()) throw InvalidParameter("softmax: degenerate row (all -inf)");
  double sum = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : row) v /= sum;
}

inline DenseMatrix row_softmax(const DenseMatrix& m) {
  DenseMatrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) softmax_inplace(out.row(r));
  return out;
}

/// Backward of softmax for one row: given p = softmax(z) and dL/dp, returns dL/dz.
inline void softmax_backward(std::span<const double> p, std::span<const double> dp, std::span<double> dz) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += p[k] * dp[k];
  for (std::size_t k = 0; k < p.size(); ++k) dz[k] = p[k] * (dp[k] - s);
}

inline constexpr double kNormFloor = 1e-12;

inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("cosine: length mismatch");
  double nu = norm(u), nv = norm(v);
  if (nu < kNormFloor || nv < kNormFloor) return 0.0;
  return dot(u, v) / (nu * nv);
}

/// Accumulates g * d cos(u, v) / du into du and g * d cos(u, v) / dv into dv.
inline void cosine_backward(std::span<const double> u, std::span<const double> v, double g, std::span<double> du,
                            std::span<double> dv) noexcept {
  double nu = norm(u), nv = norm(v);
  if (nu < kNormFloor || nv < kNormFloor || g == 0.0) return;
  double c = dot(u, v) / (nu * nv);
  double inv = 1.0 / (nu * nv);
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (!du.empty()) du[k] += g * (v[k] * inv - c * u[k] / (nu * nu));
    if (!dv.empty()) dv[k] += g * (u[k] * inv - c * v[k] / (nv * nv));
  }
}

/// Row-wise L2 normalization; rows with norm below the floor become zero.
inline DenseMatrix normalize_rows(const DenseMatrix& m) {
  DenseMatrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double n = norm(row);
    if (n < kNormFloor) {
      std::fill(row.begin(), row.end(), 0.0);
    } else {
      for (double& v : row) v /= n;
    }
  }
  return out;
}

/// Backward of normalize_rows: `input` is the pre-normalization matrix.
inline DenseMatrix normalize_rows_backward(const DenseMatrix& input, const DenseMatrix& grad_out) {
  DenseMatrix grad(input.rows(), input.cols());
  for (std::size_t r = 0; r < input.rows(); ++r) {
    auto x = input.row(r);
    double n = norm(x);
    if (n < kNormFloor) continue;
    auto g = grad_out.row(r);
    double proj = dot(x, g) / (n * n);
    auto dst = grad.row(r);
    for (std::size_t k = 0; k < x.size(); ++k) dst[k] = (g[k] - x[k] * proj) / n;
  }
  return grad;
}

/// Horizontal concatenation [a | b].
inline DenseMatrix hconcat(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("hconcat: row counts differ");
  DenseMatrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

/// Columns [begin, begin + count) of m.
inline DenseMatrix column_block(const DenseMatrix& m, std::size_t begin, std::size_t count) {
  if (begin + count > m.cols()) throw ShapeError("column_block: out of range");
  DenseMatrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = m.row(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

inline void add_inplace(DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add_inplace: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a.values()[i] += b.values()[i];
}

/// Binary keep-mask scaled by 1/(1-rate), deterministic in (seed, site).
inline DenseMatrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::uint64_t seed,
                                std::uint64_t site = site_id("dropout")) {
  if (!(rate >= 0.0) || rate >= 1.0) throw InvalidParameter("dropout rate must be in [0, 1)");
  DenseMatrix mask(rows, cols, 1.0);
  if (rate == 0.0) return mask;
  Rng rng(seed, site);
  const double keep = 1.0 / (1.0 - rate);
  for (double& v : mask.values()) v = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

}  // namespace tea
