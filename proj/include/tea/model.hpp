#pragma once

// The full two-graph model: four type encoders shared by both graphs, the
// fusion MLP and the consensus MLP, plus the forward/backward glue that turns
// encoder outputs into the structural, temporal, mixed and dual-view embeddings.

#include <array>
#include <vector>

#include "tea/consensus.hpp"
#include "tea/encoder.hpp"
#include "tea/features.hpp"
#include "tea/fusion.hpp"

namespace tea {

struct SideInputs {
  EntityGraph graph;
  std::array<SparseRowMatrix, 4> bipartite;  // columns in the shared vocabulary
};

struct ModelInputs {
  SideInputs left;
  SideInputs right;
  std::array<std::size_t, 4> vocabulary{};  // shared feature count per type (reference excluded)
  std::size_t relation_count = 0;
};

inline ModelInputs build_inputs(const AlignmentTask& task) {
  ModelInputs in;
  in.left.graph = EntityGraph::from(task.left);
  in.right.graph = EntityGraph::from(task.right);
  for (FeatureType t : kAllFeatureTypes) {
    auto vocab = shared_vocabulary(task, t);
    const auto k = type_index(t);
    in.vocabulary[k] = vocab.size;
    in.left.bipartite[k] = remap_columns(build_bipartite(task.left, t), vocab.left, vocab.size);
    in.right.bipartite[k] = remap_columns(build_bipartite(task.right, t), vocab.right, vocab.size);
  }
  in.relation_count = std::max(task.left.relation_count(), task.right.relation_count());
  return in;
}

struct ModelOptions {
  std::array<bool, 4> active{true, true, true, true};
  std::array<AttentionMode, 4> attention{AttentionMode::richness, AttentionMode::richness, AttentionMode::richness,
                                         AttentionMode::richness};
  bool equal_weights = false;
  bool dynamic_weighting = true;
  bool consensus = true;
  bool dual_view = true;
  std::size_t attention_layers = 1;
};

struct ModelParams {
  std::array<TypeEncoderParams, 4> encoders;
  MlpParams fusion;
  MlpParams refine;

  static ModelParams create(const ModelInputs& in, const EncoderConfig& ec, const ConsensusParams& cp,
                            std::uint64_t seed) {
    ModelParams p;
    for (FeatureType t : kAllFeatureTypes) {
      const auto k = type_index(t);
      p.encoders[k] = TypeEncoderParams::create(t, in.vocabulary[k], in.relation_count, ec.dim, ec.depth, seed);
    }
    p.fusion = make_fusion_mlp(ec.fusion_hidden, seed);
    p.refine = make_refine_mlp(cp, seed);
    return p;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct ModelGrads {
  std::array<TypeEncoderParams, 4> encoders;
  MlpGrads fusion;
  MlpGrads refine;

  static ModelGrads zeros_like(const ModelParams& p) {
    ModelGrads g;
    for (std::size_t k = 0; k < 4; ++k) g.encoders[k] = TypeEncoderParams::zeros_like(p.encoders[k]);
    g.fusion = MlpGrads::zeros_like(p.fusion);
    g.refine = MlpGrads::zeros_like(p.refine);
    return g;
  }
};

/// Encoder outputs of one graph.
struct SideEncoding {
  std::array<bool, 4> computed{};
  std::array<TypeForward, 4> forward;
  DenseMatrix stru;       // [h_E | h_R], n x 2(L+1)d
  DenseMatrix temp;       // [h_T | h_I]
  DenseMatrix reference;  // n x 4 final-layer reference similarities (0 for skipped types)
};

inline std::size_t encoder_width(const ModelParams& p) {
  return (p.encoders[0].depth() + 1) * p.encoders[0].dim();
}

/// `which` selects the types to run; unselected or inactive types contribute zero blocks.
inline SideEncoding encode_side(const ModelParams& p, const SideInputs& in, const ModelOptions& opt,
                                std::array<bool, 4> which, const DropoutSpec& drop = {}) {
  const std::size_t n = in.graph.size(), width = encoder_width(p);
  SideEncoding enc;
  enc.reference = DenseMatrix(n, 4);
  std::array<DenseMatrix, 4> out;
  for (std::size_t k = 0; k < 4; ++k) {
    if (!which[k] || !opt.active[k]) {
      out[k] = DenseMatrix(n, width);
      continue;
    }
    DropoutSpec d = drop;
    d.site = splitmix64(drop.site ^ (0x51ull + k));
    enc.forward[k] = forward_type(p.encoders[k], in.bipartite[k], in.graph, opt.attention[k], d, opt.attention_layers);
    enc.computed[k] = true;
    out[k] = concat_layers(enc.forward[k]);
    auto sims = final_reference_similarity(p.encoders[k], enc.forward[k]);
    for (std::size_t i = 0; i < n; ++i) enc.reference(i, k) = sims[i];
  }
  enc.stru = hconcat(out[0], out[1]);
  enc.temp = hconcat(out[2], out[3]);
  return enc;
}

/// Routes gradients w.r.t. stru / temp / reference (any may be empty) into encoder grads.
inline void encode_side_backward(const ModelParams& p, const SideInputs& in, const ModelOptions&,
                                 const SideEncoding& enc, const DenseMatrix& d_stru, const DenseMatrix& d_temp,
                                 const DenseMatrix& d_reference, ModelGrads& grads) {
  const std::size_t width = encoder_width(p), n = in.graph.size();
  for (std::size_t k = 0; k < 4; ++k) {
    if (!enc.computed[k]) continue;
    const DenseMatrix& src = k < 2 ? d_stru : d_temp;
    DenseMatrix d_out = src.size() ? column_block(src, (k % 2) * width, width) : DenseMatrix();
    std::vector<double> d_sim;
    if (d_reference.size()) {
      d_sim.resize(n);
      for (std::size_t i = 0; i < n; ++i) d_sim[i] = d_reference(i, k);
    }
    backward_type(p.encoders[k], in.bipartite[k], in.graph, enc.forward[k], d_out, d_sim,
                  grads.encoders[k]);
  }
}

enum class EmbeddingKind { structural, temporal, mixed, dual };

struct HeadCache {
  DenseMatrix stru_n;
  DenseMatrix temp_n;
  DenseMatrix cat;  // [stru_n | temp_n] for the dual view
  std::vector<double> w;
  FusionWeights fusion;
  bool learned = false;
};

/// Per-entity fusion weight: learned, or 0.5 under equal weights / no dynamic weighting.
inline bool learned_weights(const ModelOptions& opt) { return opt.dynamic_weighting && !opt.equal_weights; }

inline DenseMatrix head_forward(EmbeddingKind kind, const SideEncoding& enc, const MlpParams& fusion,
                                const ModelOptions& opt, HeadCache& cache) {
  switch (kind) {
    case EmbeddingKind::structural: return enc.stru;
    case EmbeddingKind::temporal: return enc.temp;
    case EmbeddingKind::mixed: {
      cache.stru_n = normalize_rows(enc.stru);
      cache.temp_n = normalize_rows(enc.temp);
      cache.learned = learned_weights(opt);
      if (cache.learned) {
        cache.fusion = fusion_weights(enc.reference, fusion);
        cache.w = cache.fusion.w;
      } else {
        cache.w.assign(enc.stru.rows(), 0.5);
      }
      return mixed_embed(cache.stru_n, cache.temp_n, cache.w);
    }
    case EmbeddingKind::dual: {
      if (!opt.dual_view) return normalize_rows(enc.stru);
      cache.stru_n = normalize_rows(enc.stru);
      cache.temp_n = normalize_rows(enc.temp);
      cache.cat = hconcat(cache.stru_n, cache.temp_n);
      return normalize_rows(cache.cat);
    }
  }
  return {};
}

inline void head_backward(EmbeddingKind kind, const ModelParams& p, const SideInputs& in, const ModelOptions& opt,
                          const SideEncoding& enc, const HeadCache& cache, const DenseMatrix& d_h, ModelGrads& grads) {
  const DenseMatrix none;
  switch (kind) {
    case EmbeddingKind::structural:
      encode_side_backward(p, in, opt, enc, d_h, none, none, grads);
      return;
    case EmbeddingKind::temporal:
      encode_side_backward(p, in, opt, enc, none, d_h, none, grads);
      return;
    case EmbeddingKind::mixed: {
      auto g = mixed_embed_backward(cache.stru_n, cache.temp_n, cache.w, d_h);
      DenseMatrix d_ref;
      if (cache.learned) {
        DenseMatrix dw(g.d_w.size(), 1, g.d_w);
        auto [mg, d_in] = mlp_backward(p.fusion, cache.fusion.cache, dw);
        grads.fusion.accumulate(mg);
        d_ref = std::move(d_in);
      }
      encode_side_backward(p, in, opt, enc, normalize_rows_backward(enc.stru, g.d_stru),
                           normalize_rows_backward(enc.temp, g.d_temp), d_ref, grads);
      return;
    }
    case EmbeddingKind::dual: {
      if (!opt.dual_view) {
        encode_side_backward(p, in, opt, enc, normalize_rows_backward(enc.stru, d_h), none, none, grads);
        return;
      }
      auto [ds, dt] = dual_view_concat_backward(enc.stru, enc.temp, d_h);
      encode_side_backward(p, in, opt, enc, ds, dt, none, grads);
      return;
    }
  }
}

/// Types a head needs encoded.
inline std::array<bool, 4> head_types(EmbeddingKind kind, const ModelOptions& opt) {
  switch (kind) {
    case EmbeddingKind::structural: return {true, true, false, false};
    case EmbeddingKind::temporal: return {false, false, true, true};
    case EmbeddingKind::dual:
      if (!opt.dual_view) return {true, true, false, false};
      return {true, true, true, true};
    case EmbeddingKind::mixed: return {true, true, true, true};
  }
  return {};
}

/// Inference-time embedding of one side (no dropout).
inline DenseMatrix embed(EmbeddingKind kind, const ModelParams& p, const SideInputs& in, const ModelOptions& opt) {
  auto enc = encode_side(p, in, opt, head_types(kind, opt));
  HeadCache cache;
  return head_forward(kind, enc, p.fusion, opt, cache);
}

}  // namespace tea
