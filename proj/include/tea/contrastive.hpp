#pragma once

// Bi-directional in-batch contrastive loss over aligned rows.
//
// With x_i, y_i the L2-normalised left/right embeddings of pair i in a batch of b:
//   M = X Y^T / tau,   P = row-softmax(M),   Q = column-softmax(M)
//   loss = (1/b) sum_i -log((P_ii + Q_ii) / 2)
// P_ii is p(e_i, e_i') against the other right batch entities; Q_ii is the
// reverse direction against the other left batch entities.

#include <cmath>

#include "tea/numeric.hpp"

namespace tea {

struct ContrastiveResult {
  double loss = 0.0;
  DenseMatrix grad_left;   // w.r.t. the un-normalised left rows
  DenseMatrix grad_right;  // w.r.t. the un-normalised right rows
};

inline ContrastiveResult contrastive_loss(const DenseMatrix& left, const DenseMatrix& right, double tau) {
  if (!(tau > 0.0)) throw InvalidParameter("contrastive_loss: temperature must be > 0");
  if (left.rows() != right.rows() || left.cols() != right.cols())
    throw ShapeError("contrastive_loss: left/right batch shapes differ");
  const std::size_t b = left.rows();
  ContrastiveResult out{0.0, DenseMatrix(b, left.cols()), DenseMatrix(b, right.cols())};
  if (b == 0) return out;
  DenseMatrix x = normalize_rows(left), y = normalize_rows(right);
  DenseMatrix m = matmul_nt(x, y);
  for (double& v : m.values()) v /= tau;
  DenseMatrix p = row_softmax(m);
  DenseMatrix q = m;
  for (std::size_t c = 0; c < b; ++c) {
    std::vector<double> col(b);
    for (std::size_t r = 0; r < b; ++r) col[r] = q(r, c);
    softmax_inplace(col);
    for (std::size_t r = 0; r < b; ++r) q(r, c) = col[r];
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  DenseMatrix dm(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    double s = p(i, i) + q(i, i);
    out.loss += -std::log(s / 2.0) * inv_b;
    double g = -inv_b / s;  // dL/dP_ii = dL/dQ_ii
    for (std::size_t k = 0; k < b; ++k) {
      dm(i, k) += g * p(i, i) * ((k == i ? 1.0 : 0.0) - p(i, k));
      dm(k, i) += g * q(i, i) * ((k == i ? 1.0 : 0.0) - q(k, i));
    }
  }
  for (double& v : dm.values()) v /= tau;
  out.grad_left = normalize_rows_backward(left, matmul(dm, y));
  out.grad_right = normalize_rows_backward(right, matmul_tn(dm, x));
  return out;
}

}  // namespace tea
