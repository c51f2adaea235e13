#pragma once

// Neighbourhood-consensus refinement of a top-k similarity.
//
// Left entities get Gaussian "colours" I. Propagating I over the left graph
// gives O; transporting I through the current soft correspondence S and
// propagating over the right graph gives O'. Where S agrees with the graph
// structure o_i and o'_j coincide for matched neighbourhoods, and an MLP turns
// the difference o_i - o'_j into an additive score update:
//
//   S^t        = row-softmax(Shat^t)           (over retained candidates)
//   O'^t       = Prop_right(S^t^T I)
//   Shat^{t+1} = Shat^t + mlp(O_i - O'^t_j)
//
// Prop is parameter-free mean aggregation with a self term, repeated s times,
// returning all intermediate states side by side.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "tea/mlp.hpp"
#include "tea/numeric.hpp"
#include "tea/rng.hpp"
#include "tea/tkg.hpp"

namespace tea {

struct ConsensusParams {
  std::size_t random_dim = 32;
  std::size_t propagation_steps = 5;
  std::size_t hidden = 32;
  std::size_t k = 15;
  int epochs = 90;

  void validate() const {
    if (k < 1) throw ConfigError("consensus k must be >= 1");
    if (propagation_steps < 1) throw ConfigError("propagation steps must be >= 1");
    if (random_dim < 1) throw ConfigError("random dim must be >= 1");
    if (hidden < 1) throw ConfigError("consensus hidden dim must be >= 1");
  }
};

/// Row-major (rows x k) retained candidates. `score` holds the logits, `prob`
/// their per-row softmax.
struct TopKSimilarity {
  std::size_t rows = 0;
  std::size_t k = 0;
  std::size_t right_count = 0;
  bool clamped = false;
  std::vector<Index> index;
  std::vector<double> score;
  std::vector<double> prob;

  std::span<const Index> row_index(std::size_t r) const { return {index.data() + r * k, k}; }
  std::span<const double> row_score(std::size_t r) const { return {score.data() + r * k, k}; }
  std::span<const double> row_prob(std::size_t r) const { return {prob.data() + r * k, k}; }

  /// Position of `right` in row r, or k when it was not retained.
  std::size_t find(std::size_t r, Index right) const {
    auto idx = row_index(r);
    return static_cast<std::size_t>(std::find(idx.begin(), idx.end(), right) - idx.begin());
  }

  void recompute_prob() {
    prob = score;
    for (std::size_t r = 0; r < rows; ++r) softmax_inplace({prob.data() + r * k, k});
  }
};

/// H = normalize([normalize(H_stru) | normalize(H_temp)]).
inline DenseMatrix dual_view_concat(const DenseMatrix& h_stru, const DenseMatrix& h_temp) {
  if (h_stru.rows() != h_temp.rows()) throw ShapeError("dual_view_concat: row counts differ");
  return normalize_rows(hconcat(normalize_rows(h_stru), normalize_rows(h_temp)));
}

inline std::pair<DenseMatrix, DenseMatrix> dual_view_concat_backward(const DenseMatrix& h_stru,
                                                                     const DenseMatrix& h_temp,
                                                                     const DenseMatrix& d_out) {
  DenseMatrix ns = normalize_rows(h_stru), nt = normalize_rows(h_temp);
  DenseMatrix d_cat = normalize_rows_backward(hconcat(ns, nt), d_out);
  return {normalize_rows_backward(h_stru, column_block(d_cat, 0, ns.cols())),
          normalize_rows_backward(h_temp, column_block(d_cat, ns.cols(), nt.cols()))};
}

/// Exact top-k by scale * dot product; ties go to the smaller right index.
inline TopKSimilarity topk_retrieve(const DenseMatrix& h, const DenseMatrix& h_right, std::size_t k,
                                    double scale = 1.0) {
  if (h.cols() != h_right.cols()) throw ShapeError("topk_retrieve: embedding dimensions differ");
  if (k < 1) throw InvalidParameter("topk_retrieve: k must be >= 1");
  TopKSimilarity out;
  out.rows = h.rows();
  out.right_count = h_right.rows();
  out.clamped = k > h_right.rows();
  out.k = std::min(k, h_right.rows());
  out.index.resize(out.rows * out.k);
  out.score.resize(out.rows * out.k);
  std::vector<Index> order(h_right.rows());
  std::vector<double> s(h_right.rows());
  constexpr std::size_t kBlock = 64;
  for (std::size_t r0 = 0; r0 < h.rows(); r0 += kBlock) {
    const std::size_t r1 = std::min(h.rows(), r0 + kBlock);
    for (std::size_t r = r0; r < r1; ++r) {
      for (std::size_t j = 0; j < h_right.rows(); ++j) s[j] = scale * dot(h.row(r), h_right.row(j));
      std::iota(order.begin(), order.end(), Index{0});
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(out.k), order.end(),
                        [&](Index a, Index b) { return s[a] > s[b] || (s[a] == s[b] && a < b); });
      for (std::size_t c = 0; c < out.k; ++c) {
        out.index[r * out.k + c] = order[c];
        out.score[r * out.k + c] = s[order[c]];
      }
    }
  }
  out.recompute_prob();
  return out;
}

/// I ~ N(0, 1), rows x dim, keyed by (seed, epoch).
inline DenseMatrix random_colors(std::size_t rows, std::size_t dim, std::uint64_t seed, std::uint64_t epoch) {
  DenseMatrix out(rows, dim);
  Rng rng(seed, "consensus.colors", epoch);
  for (double& v : out.values()) v = rng.normal();
  return out;
}

/// X^{t+1}_i = (X^t_i + sum_{j in N(i)} X^t_j) / (1 + |N(i)|);  O = [X^0 | ... | X^s].
inline DenseMatrix randomized_propagation(const std::vector<std::vector<Index>>& neighbors, const DenseMatrix& x0,
                                          std::size_t steps) {
  if (x0.rows() != neighbors.size()) throw ShapeError("randomized_propagation: row count != node count");
  const std::size_t n = x0.rows(), d = x0.cols();
  DenseMatrix out(n, d * (steps + 1));
  DenseMatrix cur = x0;
  for (std::size_t t = 0;; ++t) {
    for (std::size_t i = 0; i < n; ++i)
      std::copy(cur.row(i).begin(), cur.row(i).end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(t * d));
    if (t == steps) break;
    DenseMatrix next(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = next.row(i);
      axpy(1.0, cur.row(i), dst);
      for (Index j : neighbors[i]) axpy(1.0, cur.row(j), dst);
      const double inv = 1.0 / (1.0 + static_cast<double>(neighbors[i].size()));
      for (double& v : dst) v *= inv;
    }
    cur = std::move(next);
  }
  return out;
}

/// Gradient w.r.t. x0 given the gradient w.r.t. the propagation output.
inline DenseMatrix randomized_propagation_backward(const std::vector<std::vector<Index>>& neighbors,
                                                   const DenseMatrix& d_out, std::size_t steps) {
  const std::size_t n = neighbors.size();
  const std::size_t d = d_out.cols() / (steps + 1);
  DenseMatrix dx = column_block(d_out, steps * d, d);
  for (std::size_t t = steps; t-- > 0;) {
    DenseMatrix prev = column_block(d_out, t * d, d);
    for (std::size_t i = 0; i < n; ++i) {
      const double inv = 1.0 / (1.0 + static_cast<double>(neighbors[i].size()));
      axpy(inv, dx.row(i), prev.row(i));
      for (Index j : neighbors[i]) axpy(inv, dx.row(i), prev.row(j));
    }
    dx = std::move(prev);
  }
  return dx;
}

inline MlpParams make_refine_mlp(const ConsensusParams& p, std::uint64_t seed) {
  return MlpParams::random(p.random_dim * (p.propagation_steps + 1), p.hidden, 1, OutputActivation::identity, seed,
                           site_id("consensus.mlp"));
}

/// S^T I for a top-k correspondence: right_count x dim.
inline DenseMatrix transport(const TopKSimilarity& s, std::span<const double> prob, const DenseMatrix& colors) {
  DenseMatrix out(s.right_count, colors.cols());
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t c = 0; c < s.k; ++c) axpy(prob[i * s.k + c], colors.row(i), out.row(s.index[i * s.k + c]));
  return out;
}

struct RefineCache {
  std::vector<std::vector<double>> probs;  // S^t per step
  std::vector<MlpCache> mlp;               // inputs are the differences o_i - o'_j
};

struct RefineInputs {
  const DenseMatrix* left_output = nullptr;  // O, propagated colours of the left graph
  const DenseMatrix* colors = nullptr;       // I
  const std::vector<std::vector<Index>>* right_neighbors = nullptr;
  std::size_t propagation_steps = 0;
};

/// Runs `steps` refinement updates; the sparsity pattern never changes.
inline TopKSimilarity refine(const TopKSimilarity& base, const RefineInputs& in, const MlpParams& mlp,
                             std::size_t steps, RefineCache* cache = nullptr) {
  if (in.colors->rows() != base.rows || in.left_output->rows() != base.rows)
    throw ShapeError("refine: colour rows must match the top-k rows");
  if (in.right_neighbors->size() != base.right_count) throw ShapeError("refine: right graph size mismatch");
  TopKSimilarity cur = base;
  const std::size_t width = in.left_output->cols();
  for (std::size_t t = 0; t < steps; ++t) {
    cur.recompute_prob();
    DenseMatrix o_right =
        randomized_propagation(*in.right_neighbors, transport(cur, cur.prob, *in.colors), in.propagation_steps);
    DenseMatrix diff(base.rows * base.k, width);
    for (std::size_t i = 0; i < base.rows; ++i)
      for (std::size_t c = 0; c < base.k; ++c) {
        auto dst = diff.row(i * base.k + c);
        std::span<const double> oi = in.left_output->row(i), oj = o_right.row(cur.index[i * base.k + c]);
        for (std::size_t x = 0; x < width; ++x) dst[x] = oi[x] - oj[x];
      }
    auto [upd, mc] = mlp_forward(mlp, diff);
    for (std::size_t e = 0; e < cur.score.size(); ++e) cur.score[e] += upd.values()[e];
    if (cache) {
      cache->probs.push_back(cur.prob);
      cache->mlp.push_back(std::move(mc));
    }
  }
  cur.recompute_prob();
  return cur;
}

/// Back-propagates d(final logits) to d(initial logits) and accumulates MLP gradients.
inline std::vector<double> refine_backward(const TopKSimilarity& base, const RefineInputs& in, const MlpParams& mlp,
                                           const RefineCache& cache, std::vector<double> d_logits,
                                           MlpGrads& grads) {
  const std::size_t k = base.k, width = in.left_output->cols();
  for (std::size_t t = cache.mlp.size(); t-- > 0;) {
    DenseMatrix du(base.rows * k, 1, d_logits);
    auto [g, d_diff] = mlp_backward(mlp, cache.mlp[t], du);
    grads.accumulate(g);
    DenseMatrix d_oright(base.right_count, width);
    for (std::size_t e = 0; e < base.rows * k; ++e) axpy(-1.0, d_diff.row(e), d_oright.row(base.index[e]));
    DenseMatrix d_x = randomized_propagation_backward(*in.right_neighbors, d_oright, in.propagation_steps);
    const auto& prob = cache.probs[t];
    std::vector<double> dp(k), dz(k);
    for (std::size_t i = 0; i < base.rows; ++i) {
      for (std::size_t c = 0; c < k; ++c) dp[c] = dot(in.colors->row(i), d_x.row(base.index[i * k + c]));
      softmax_backward({prob.data() + i * k, k}, dp, dz);
      for (std::size_t c = 0; c < k; ++c) d_logits[i * k + c] += dz[c];
    }
  }
  return d_logits;
}

struct ConsensusLoss {
  double loss = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;
  std::vector<double> d_logits;  // w.r.t. the final refined logits
};

/// L_nc = -sum over seeds (i, i') of log S^L_{i, i'}. Seeds whose counterpart
/// was not retrieved are skipped and counted.
inline ConsensusLoss consensus_loss(const TopKSimilarity& refined, const SeedAlignment& seeds) {
  ConsensusLoss out;
  out.d_logits.assign(refined.score.size(), 0.0);
  for (auto [a, b] : seeds.pairs) {
    if (a >= refined.rows) throw ShapeError("consensus_loss: seed row out of range");
    std::size_t pos = refined.find(a, b);
    if (pos == refined.k) {
      ++out.excluded;
      continue;
    }
    ++out.used;
    out.loss -= std::log(refined.prob[a * refined.k + pos]);
    for (std::size_t c = 0; c < refined.k; ++c)
      out.d_logits[a * refined.k + c] += refined.prob[a * refined.k + c] - (c == pos ? 1.0 : 0.0);
  }
  return out;
}

struct SinkhornResult {
  DenseMatrix matrix;
  std::size_t iterations = 0;
  double max_deviation = 0.0;
};

/// Alternating row/column normalisation of exp(S) after a per-row max shift.
inline SinkhornResult sinkhorn(const DenseMatrix& s, std::size_t iterations = 100, double tolerance = 1e-9) {
  if (s.rows() != s.cols()) throw ShapeError("sinkhorn: matrix must be square");
  if (!s.all_finite()) throw InvalidParameter("sinkhorn: non-finite input");
  const std::size_t n = s.rows();
  SinkhornResult out{DenseMatrix(n, n), 0, 0.0};
  DenseMatrix& m = out.matrix;
  for (std::size_t r = 0; r < n; ++r) {
    auto src = s.row(r);
    double mx = src.empty() ? 0.0 : *std::max_element(src.begin(), src.end());
    for (std::size_t c = 0; c < n; ++c) m(r, c) = std::exp(src[c] - mx);
  }
  std::vector<double> col(n);
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t r = 0; r < n; ++r) {
      auto row = m.row(r);
      double sum = std::accumulate(row.begin(), row.end(), 0.0);
      for (double& v : row) v /= sum;
    }
    std::fill(col.begin(), col.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r) axpy(1.0, m.row(r), col);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) m(r, c) /= col[c];
    out.iterations = it + 1;
    double dev = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      auto row = m.row(r);
      dev = std::max(dev, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
    }
    out.max_deviation = dev;  // columns are exactly normalised at this point
    if (dev < tolerance) break;
  }
  return out;
}

}  // namespace tea
