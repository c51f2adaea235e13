#pragma once

// Type-specific graph encoder:
//
//   h^0_i     = A[i]^T F                              (bipartite selection)
//   s^l_j     = cos(h^l_j, F[ref])                     (reference similarity)
//   b^l_ij    = softmax_{j in N(i)} (-s^l_j)           (richness-guided attention)
//   h^{l+1}_i = relu(sum_j b^l_ij W^l h^l_j)           (isolates carry h^l forward)
//   out_i     = [h^0_i | h^1_i | ... | h^L_i]
//
// The reference entity is the last row of F. It has no neighbours, so its
// embedding is F[ref] at every layer. Gradients are exact, including the
// path through the attention weights.

#include <cstdint>
#include <vector>

#include "tea/features.hpp"
#include "tea/numeric.hpp"
#include "tea/rng.hpp"
#include "tea/tkg.hpp"

namespace tea {

enum class AttentionMode {
  richness,  // exp(-reference similarity)
  uniform,   // attention removed: plain mean over neighbours
  gat,       // softmax of a learned score a . W h_j
  relation,  // softmax of a learned per-relation score
};

struct EncoderConfig {
  std::size_t dim = 50;
  std::size_t depth = 2;
  std::size_t attention_layers = 1;
  std::size_t batch_size = 512;
  double dropout = 0.3;
  double temperature = 0.05;
  double learning_rate = 0.005;
  int epochs_structural = 20;
  int epochs_temporal = 60;
  int epochs_mixed = 5;
  std::size_t fusion_hidden = 4;
  double finetune_lr_scale = 0.1;
  bool freeze_reference = false;  // keep the reference feature row at its initial value

  void validate() const {
    if (depth < 1) throw ConfigError("gnn depth must be >= 1");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  }
};

/// Undirected entity adjacency plus the relations carried by each edge.
struct EntityGraph {
  std::vector<std::vector<Index>> neighbors;
  std::vector<std::vector<std::vector<Index>>> edge_relations;  // parallel to neighbors

  std::size_t size() const noexcept { return neighbors.size(); }

  static EntityGraph from(const TemporalKnowledgeGraph& g) {
    EntityGraph out;
    out.neighbors = g.neighbor_lists();
    out.edge_relations.resize(g.entity_count());
    for (Index e = 0; e < g.entity_count(); ++e) {
      const auto& nb = out.neighbors[e];
      out.edge_relations[e].assign(nb.size(), {});
      for (std::size_t f : g.incident(e)) {
        const Fact& x = g.facts()[f];
        Index other = x.head == e ? x.tail : x.head;
        auto k = static_cast<std::size_t>(std::lower_bound(nb.begin(), nb.end(), other) - nb.begin());
        out.edge_relations[e][k].push_back(x.relation);
      }
    }
    return out;
  }

  static EntityGraph from_neighbors(std::vector<std::vector<Index>> nb) {
    EntityGraph out;
    out.edge_relations.resize(nb.size());
    for (std::size_t i = 0; i < nb.size(); ++i) out.edge_relations[i].assign(nb[i].size(), {Index{0}});
    out.neighbors = std::move(nb);
    return out;
  }
};

struct TypeEncoderParams {
  DenseMatrix features;                        // (V + 1) x d, last row = reference
  std::vector<DenseMatrix> transforms;         // depth x (d x d)
  std::vector<DenseMatrix> gat_vectors;        // depth x (1 x d)
  std::vector<DenseMatrix> relation_scores;    // depth x (1 x relation_count)

  std::size_t dim() const noexcept { return features.cols(); }
  std::size_t depth() const noexcept { return transforms.size(); }
  std::size_t reference_row() const noexcept { return features.rows() - 1; }
  std::span<const double> reference() const noexcept { return features.row(reference_row()); }

  static TypeEncoderParams create(FeatureType type, std::size_t vocabulary, std::size_t relation_count,
                                  std::size_t dim, std::size_t depth, std::uint64_t seed) {
    TypeEncoderParams p;
    p.features = init_features(type, vocabulary, dim, seed);
    Rng rng(seed, "encoder.transform", type_index(type));
    const double bound = std::sqrt(6.0 / (2.0 * static_cast<double>(dim)));
    for (std::size_t l = 0; l < depth; ++l) {
      DenseMatrix w(dim, dim);
      for (double& v : w.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
      p.transforms.push_back(std::move(w));
      DenseMatrix a(1, dim);
      for (double& v : a.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
      p.gat_vectors.push_back(std::move(a));
      p.relation_scores.emplace_back(1, std::max<std::size_t>(relation_count, 1));
    }
    return p;
  }

  static TypeEncoderParams zeros_like(const TypeEncoderParams& o) {
    TypeEncoderParams p;
    p.features = DenseMatrix(o.features.rows(), o.features.cols());
    for (const auto& w : o.transforms) p.transforms.emplace_back(w.rows(), w.cols());
    for (const auto& a : o.gat_vectors) p.gat_vectors.emplace_back(a.rows(), a.cols());
    for (const auto& q : o.relation_scores) p.relation_scores.emplace_back(q.rows(), q.cols());
    return p;
  }

  std::vector<DenseMatrix*> parameters() {
    std::vector<DenseMatrix*> out{&features};
    for (auto& w : transforms) out.push_back(&w);
    for (auto& a : gat_vectors) out.push_back(&a);
    for (auto& q : relation_scores) out.push_back(&q);
    return out;
  }
  std::vector<const DenseMatrix*> parameters() const {
    std::vector<const DenseMatrix*> out{&features};
    for (const auto& w : transforms) out.push_back(&w);
    for (const auto& a : gat_vectors) out.push_back(&a);
    for (const auto& q : relation_scores) out.push_back(&q);
    return out;
  }

  friend bool operator==(const TypeEncoderParams&, const TypeEncoderParams&) = default;
};

struct DropoutSpec {
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t site = 0;
};

/// Everything backward needs from one forward pass over one graph.
struct TypeForward {
  std::vector<DenseMatrix> h;                          // depth + 1 layers, n x d
  std::vector<DenseMatrix> u;                          // W^l h^l_j per layer
  std::vector<DenseMatrix> z;                          // pre-activation per layer
  std::vector<DenseMatrix> mask;                       // dropout masks (empty = none)
  std::vector<std::vector<std::vector<double>>> beta;  // per layer, per entity, per neighbour
  std::vector<std::vector<double>> sims;               // per layer reference similarities
  std::vector<AttentionMode> modes;                    // attention used at each layer
};

/// Richness-guided attention: for each entity, softmax of -S over its neighbours.
/// Isolated entities get an empty row.
inline std::vector<std::vector<double>> richness_attention(std::span<const double> sims,
                                                           const std::vector<std::vector<Index>>& neighbors) {
  std::vector<std::vector<double>> beta(neighbors.size());
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    auto& row = beta[i];
    row.resize(neighbors[i].size());
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = -sims[neighbors[i][k]];
    softmax_inplace(row);
  }
  return beta;
}

inline std::vector<double> attention_logits(const TypeEncoderParams& p, std::size_t layer, AttentionMode mode,
                                            const EntityGraph& g, Index i, std::span<const double> sims,
                                            const DenseMatrix& u) {
  const auto& nb = g.neighbors[i];
  std::vector<double> logits(nb.size(), 0.0);
  for (std::size_t k = 0; k < nb.size(); ++k) {
    switch (mode) {
      case AttentionMode::richness: logits[k] = -sims[nb[k]]; break;
      case AttentionMode::uniform: logits[k] = 0.0; break;
      case AttentionMode::gat: logits[k] = dot(p.gat_vectors[layer].row(0), u.row(nb[k])); break;
      case AttentionMode::relation: {
        const auto& rels = g.edge_relations[i][k];
        double s = 0.0;
        for (Index r : rels) s += p.relation_scores[layer](0, r);
        logits[k] = rels.empty() ? 0.0 : s / static_cast<double>(rels.size());
        break;
      }
    }
  }
  return logits;
}

/// The first `attention_layers` layers use `attention`; deeper layers aggregate uniformly.
inline TypeForward forward_type(const TypeEncoderParams& p, const SparseRowMatrix& bipartite, const EntityGraph& g,
                                AttentionMode attention, const DropoutSpec& drop = {},
                                std::size_t attention_layers = static_cast<std::size_t>(-1)) {
  if (bipartite.cols() != p.features.rows()) throw ShapeError("forward_type: bipartite columns != feature rows");
  if (bipartite.rows() != g.size()) throw ShapeError("forward_type: bipartite rows != entity count");
  const std::size_t n = g.size(), d = p.dim();
  TypeForward fw;
  fw.h.push_back(spmm(bipartite, p.features));
  auto ref = p.reference();
  for (std::size_t l = 0; l < p.depth(); ++l) {
    const DenseMatrix& h = fw.h[l];
    const AttentionMode mode = l < attention_layers ? attention : AttentionMode::uniform;
    DenseMatrix u = matmul_nt(h, p.transforms[l]);
    std::vector<double> sims(n, 0.0);
    if (mode == AttentionMode::richness)
      for (std::size_t j = 0; j < n; ++j) sims[j] = cosine(h.row(j), ref);
    std::vector<std::vector<double>> beta(n);
    DenseMatrix z(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      if (g.neighbors[i].empty()) continue;
      beta[i] = attention_logits(p, l, mode, g, i, sims, u);
      softmax_inplace(beta[i]);
      for (std::size_t k = 0; k < beta[i].size(); ++k) axpy(beta[i][k], u.row(g.neighbors[i][k]), z.row(i));
    }
    DenseMatrix mask;
    if (drop.rate > 0.0) mask = dropout_mask(n, d, drop.rate, drop.seed, splitmix64(drop.site + l));
    DenseMatrix next(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = next.row(i);
      if (g.neighbors[i].empty()) {
        std::copy(h.row(i).begin(), h.row(i).end(), dst.begin());
        continue;
      }
      for (std::size_t c = 0; c < d; ++c) {
        double v = z(i, c) > 0.0 ? z(i, c) : 0.0;
        dst[c] = mask.size() ? v * mask(i, c) : v;
      }
    }
    fw.u.push_back(std::move(u));
    fw.z.push_back(std::move(z));
    fw.mask.push_back(std::move(mask));
    fw.beta.push_back(std::move(beta));
    fw.sims.push_back(std::move(sims));
    fw.modes.push_back(mode);
    fw.h.push_back(std::move(next));
  }
  return fw;
}

/// [h^0 | ... | h^L], layer 0 first.
inline DenseMatrix concat_layers(const TypeForward& fw) {
  DenseMatrix out = fw.h.front();
  for (std::size_t l = 1; l < fw.h.size(); ++l) out = hconcat(out, fw.h[l]);
  return out;
}

/// Final-layer reference similarity of every entity (one column of the reference matrix).
inline std::vector<double> final_reference_similarity(const TypeEncoderParams& p, const TypeForward& fw) {
  return reference_similarity(fw.h.back(), p.reference()).values;
}

/// Accumulates parameter gradients into `grads`.
/// d_out: gradient w.r.t. concat_layers output (may be empty = zero).
/// d_final_sim: gradient w.r.t. final_reference_similarity (may be empty).
inline void backward_type(const TypeEncoderParams& p, const SparseRowMatrix& bipartite, const EntityGraph& g,
                          const TypeForward& fw, const DenseMatrix& d_out,
                          std::span<const double> d_final_sim, TypeEncoderParams& grads) {
  if (fw.h.size() != p.depth() + 1) throw ContractViolation("backward_type: forward cache does not match depth");
  const std::size_t n = g.size(), d = p.dim(), depth = p.depth();
  std::vector<DenseMatrix> dh;
  for (std::size_t l = 0; l <= depth; ++l) {
    if (d_out.size()) {
      if (d_out.rows() != n || d_out.cols() != (depth + 1) * d) throw ShapeError("backward_type: d_out shape");
      dh.push_back(column_block(d_out, l * d, d));
    } else {
      dh.emplace_back(n, d);
    }
  }
  auto ref = p.reference();
  std::vector<double> dref(d, 0.0);
  if (!d_final_sim.empty()) {
    for (std::size_t i = 0; i < n; ++i) cosine_backward(fw.h[depth].row(i), ref, d_final_sim[i], dh[depth].row(i), dref);
  }
  for (std::size_t l = depth; l-- > 0;) {
    const DenseMatrix& h = fw.h[l];
    const AttentionMode mode = fw.modes[l];
    const DenseMatrix& u = fw.u[l];
    const DenseMatrix& z = fw.z[l];
    const DenseMatrix& mask = fw.mask[l];
    const DenseMatrix& dnext = dh[l + 1];
    DenseMatrix du(n, d);
    std::vector<double> dsim(n, 0.0);
    std::vector<double> dz(d), dbeta, dlogit;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& nb = g.neighbors[i];
      if (nb.empty()) {
        axpy(1.0, dnext.row(i), dh[l].row(i));
        continue;
      }
      for (std::size_t c = 0; c < d; ++c) {
        double gz = z(i, c) > 0.0 ? dnext(i, c) : 0.0;
        dz[c] = mask.size() ? gz * mask(i, c) : gz;
      }
      const auto& beta = fw.beta[l][i];
      dbeta.assign(nb.size(), 0.0);
      dlogit.assign(nb.size(), 0.0);
      for (std::size_t k = 0; k < nb.size(); ++k) {
        axpy(beta[k], dz, du.row(nb[k]));
        dbeta[k] = dot(dz, u.row(nb[k]));
      }
      softmax_backward(beta, dbeta, dlogit);
      for (std::size_t k = 0; k < nb.size(); ++k) {
        switch (mode) {
          case AttentionMode::richness: dsim[nb[k]] -= dlogit[k]; break;
          case AttentionMode::uniform: break;
          case AttentionMode::gat:
            axpy(dlogit[k], u.row(nb[k]), grads.gat_vectors[l].row(0));
            axpy(dlogit[k], p.gat_vectors[l].row(0), du.row(nb[k]));
            break;
          case AttentionMode::relation: {
            const auto& rels = g.edge_relations[i][k];
            for (Index r : rels) grads.relation_scores[l](0, r) += dlogit[k] / static_cast<double>(rels.size());
            break;
          }
        }
      }
    }
    add_inplace(grads.transforms[l], matmul_tn(du, h));
    add_inplace(dh[l], matmul(du, p.transforms[l]));
    if (mode == AttentionMode::richness)
      for (std::size_t j = 0; j < n; ++j) cosine_backward(h.row(j), ref, dsim[j], dh[l].row(j), dref);
  }
  add_inplace(grads.features, spmm_transposed(bipartite, dh[0]));
  axpy(1.0, dref, grads.features.row(p.reference_row()));
}

}  // namespace tea
