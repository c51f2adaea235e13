#pragma once

// Two-layer perceptron: out = act(W2 * relu(W1 * x + b1) + b2), rows of x are samples.

#include <cstdint>

#include "tea/numeric.hpp"

namespace tea {

enum class OutputActivation { sigmoid, identity };

struct MlpParams {
  DenseMatrix w1;  // hidden x input
  DenseMatrix b1;  // 1 x hidden
  DenseMatrix w2;  // output x hidden
  DenseMatrix b2;  // 1 x output
  OutputActivation output_activation = OutputActivation::sigmoid;
  /// Bumped by every optimizer update; forward caches remember it.
  std::uint64_t generation = 0;

  std::size_t input_dim() const noexcept { return w1.cols(); }
  std::size_t hidden_dim() const noexcept { return w1.rows(); }
  std::size_t output_dim() const noexcept { return w2.rows(); }

  void check_shapes() const {
    if (b1.rows() != 1 || b1.cols() != w1.rows() || w2.cols() != w1.rows() || b2.rows() != 1 ||
        b2.cols() != w2.rows())
      throw ShapeError("MlpParams: inconsistent shape chain");
  }

  static MlpParams zeros(std::size_t in, std::size_t hidden, std::size_t out, OutputActivation act) {
    return MlpParams{DenseMatrix(hidden, in), DenseMatrix(1, hidden), DenseMatrix(out, hidden), DenseMatrix(1, out),
                     act, 0};
  }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static MlpParams random(std::size_t in, std::size_t hidden, std::size_t out, OutputActivation act,
                          std::uint64_t seed, std::uint64_t site) {
    MlpParams p = zeros(in, hidden, out, act);
    Rng rng(seed, site);
    double s1 = 1.0 / std::sqrt(static_cast<double>(in));
    double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& v : p.w1.values()) v = (2.0 * rng.uniform() - 1.0) * s1;
    for (double& v : p.w2.values()) v = (2.0 * rng.uniform() - 1.0) * s2;
    return p;
  }

  friend bool operator==(const MlpParams& a, const MlpParams& b) {
    return a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2 &&
           a.output_activation == b.output_activation;
  }
};

struct MlpCache {
  DenseMatrix input;
  DenseMatrix hidden_pre;
  DenseMatrix hidden;
  DenseMatrix output;
  std::uint64_t generation = 0;
  const MlpParams* owner = nullptr;
};

struct MlpGrads {
  DenseMatrix w1, b1, w2, b2;

  static MlpGrads zeros_like(const MlpParams& p) {
    return {DenseMatrix(p.w1.rows(), p.w1.cols()), DenseMatrix(1, p.b1.cols()), DenseMatrix(p.w2.rows(), p.w2.cols()),
            DenseMatrix(1, p.b2.cols())};
  }
  void accumulate(const MlpGrads& o) {
    add_inplace(w1, o.w1);
    add_inplace(b1, o.b1);
    add_inplace(w2, o.w2);
    add_inplace(b2, o.b2);
  }
};

inline double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline std::pair<DenseMatrix, MlpCache> mlp_forward(const MlpParams& p, const DenseMatrix& x) {
  p.check_shapes();
  if (x.cols() != p.input_dim()) throw ShapeError("mlp_forward: input width does not match W1");
  MlpCache cache;
  cache.input = x;
  cache.hidden_pre = matmul_nt(x, p.w1);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t h = 0; h < p.hidden_dim(); ++h) cache.hidden_pre(r, h) += p.b1(0, h);
  cache.hidden = cache.hidden_pre;
  for (double& v : cache.hidden.values()) v = v > 0.0 ? v : 0.0;
  DenseMatrix out = matmul_nt(cache.hidden, p.w2);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t o = 0; o < p.output_dim(); ++o) {
      double& v = out(r, o);
      v += p.b2(0, o);
      if (p.output_activation == OutputActivation::sigmoid) v = sigmoid(v);
    }
  cache.output = out;
  cache.generation = p.generation;
  cache.owner = &p;
  return {std::move(out), std::move(cache)};
}

/// Returns parameter gradients and the gradient with respect to the input.
inline std::pair<MlpGrads, DenseMatrix> mlp_backward(const MlpParams& p, const MlpCache& cache,
                                                     const DenseMatrix& upstream) {
  if (cache.owner != &p || cache.generation != p.generation)
    throw ContractViolation("mlp_backward: cache does not belong to the current parameters");
  if (upstream.rows() != cache.output.rows() || upstream.cols() != cache.output.cols())
    throw ShapeError("mlp_backward: upstream gradient shape mismatch");
  DenseMatrix d_pre2 = upstream;
  if (p.output_activation == OutputActivation::sigmoid) {
    for (std::size_t i = 0; i < d_pre2.size(); ++i) {
      double y = cache.output.values()[i];
      d_pre2.values()[i] *= y * (1.0 - y);
    }
  }
  MlpGrads g;
  g.w2 = matmul_tn(d_pre2, cache.hidden);
  g.b2 = DenseMatrix(1, p.output_dim());
  for (std::size_t r = 0; r < d_pre2.rows(); ++r) axpy(1.0, d_pre2.row(r), g.b2.row(0));
  DenseMatrix d_hidden = matmul(d_pre2, p.w2);
  for (std::size_t i = 0; i < d_hidden.size(); ++i)
    if (cache.hidden_pre.values()[i] <= 0.0) d_hidden.values()[i] = 0.0;
  g.w1 = matmul_tn(d_hidden, cache.input);
  g.b1 = DenseMatrix(1, p.hidden_dim());
  for (std::size_t r = 0; r < d_hidden.rows(); ++r) axpy(1.0, d_hidden.row(r), g.b1.row(0));
  DenseMatrix d_input = matmul(d_hidden, p.w1);
  return {std::move(g), std::move(d_input)};
}

}  // namespace tea
