#pragma once

// Adaptive weighting of the structural and temporal halves.
//   x_i = (s_E, s_R, s_T, s_I)  final-layer reference similarities of entity i
//   w_i = sigmoid(W2 relu(W1 x_i + b1) + b2)
//   h_i = [w_i h_stru(i) | (1 - w_i) h_temp(i)]

#include <vector>

#include "tea/mlp.hpp"
#include "tea/numeric.hpp"

namespace tea {

struct FusionWeights {
  std::vector<double> w;
  MlpCache cache;
};

/// Columns must be in (E, R, T, I) order.
inline FusionWeights fusion_weights(const DenseMatrix& reference_matrix, const MlpParams& mlp) {
  if (reference_matrix.cols() != 4) throw ShapeError("fusion_weights: reference matrix must have 4 columns");
  if (mlp.output_dim() != 1 || mlp.output_activation != OutputActivation::sigmoid)
    throw ShapeError("fusion_weights: MLP must produce one sigmoid output");
  auto [out, cache] = mlp_forward(mlp, reference_matrix);
  return FusionWeights{std::move(out.values()), std::move(cache)};
}

inline MlpParams make_fusion_mlp(std::size_t hidden, std::uint64_t seed) {
  return MlpParams::random(4, hidden, 1, OutputActivation::sigmoid, seed, site_id("fusion.mlp"));
}

inline DenseMatrix mixed_embed(const DenseMatrix& h_stru, const DenseMatrix& h_temp, std::span<const double> w) {
  if (h_stru.rows() != h_temp.rows() || w.size() != h_stru.rows()) throw ShapeError("mixed_embed: row counts differ");
  DenseMatrix out = hconcat(h_stru, h_temp);
  const std::size_t ds = h_stru.cols();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] *= c < ds ? w[i] : 1.0 - w[i];
  }
  return out;
}

struct MixedEmbedGrads {
  DenseMatrix d_stru;
  DenseMatrix d_temp;
  std::vector<double> d_w;
};

inline MixedEmbedGrads mixed_embed_backward(const DenseMatrix& h_stru, const DenseMatrix& h_temp,
                                            std::span<const double> w, const DenseMatrix& d_out) {
  const std::size_t n = h_stru.rows(), ds = h_stru.cols(), dt = h_temp.cols();
  if (d_out.rows() != n || d_out.cols() != ds + dt) throw ShapeError("mixed_embed_backward: gradient shape");
  MixedEmbedGrads g{DenseMatrix(n, ds), DenseMatrix(n, dt), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    auto src = d_out.row(i);
    auto gs = src.subspan(0, ds), gt = src.subspan(ds, dt);
    axpy(w[i], gs, g.d_stru.row(i));
    axpy(1.0 - w[i], gt, g.d_temp.row(i));
    g.d_w[i] = dot(gs, h_stru.row(i)) - dot(gt, h_temp.row(i));
  }
  return g;
}

}  // namespace tea
