#pragma once

// Type-specific bipartite entity x feature matrices, with one extra reference
// column per matrix, and the richness measurements built on them.

#include <cmath>
#include <map>
#include <vector>

#include "tea/numeric.hpp"
#include "tea/rng.hpp"
#include "tea/tkg.hpp"

namespace tea {

struct BipartiteFeatureMatrix {
  FeatureType type = FeatureType::E;
  /// entity_count x (feature_count + 1); the last column is the reference entity.
  SparseRowMatrix matrix;

  std::size_t feature_count() const noexcept { return matrix.cols() - 1; }
  std::size_t reference_column() const noexcept { return matrix.cols() - 1; }
};

inline std::size_t feature_vocabulary_size(const TemporalKnowledgeGraph& g, FeatureType type) {
  switch (type) {
    case FeatureType::E: return g.entity_count();
    case FeatureType::R: return g.relation_count();
    case FeatureType::T: return g.timestamp_count();
    case FeatureType::I: return g.interval_vocab().size();
  }
  return 0;
}

/// Log-normalised weights a_ic = log(|F_ic|+1) / sum_c' log(|F_ic'|+1), where the
/// sum also runs over the reference column. Rows without features of the type
/// put all of their weight on the reference column.
inline BipartiteFeatureMatrix build_bipartite(const TemporalKnowledgeGraph& g, FeatureType type) {
  const std::size_t nf = feature_vocabulary_size(g, type);
  BipartiteFeatureMatrix out{type, SparseRowMatrix(g.entity_count(), nf + 1)};
  for (Index e = 0; e < g.entity_count(); ++e) {
    auto counts = feature_counts(g, e, type);
    std::vector<SparseEntry> row;
    row.reserve(counts.size() + 1);
    if (counts.empty()) {
      row.push_back({nf, 1.0});
    } else {
      double total = 0.0;
      for (auto [c, n] : counts) {
        double w = std::log(static_cast<double>(n) + 1.0);
        row.push_back({c, w});
        total += w;
      }
      double ref = std::log(static_cast<double>(reference_count(g, e, type)) + 1.0);
      if (ref > 0.0) row.push_back({nf, ref});
      total += ref;
      for (auto& x : row) x.weight /= total;
    }
    out.matrix.set_row(e, std::move(row));
  }
  return out;
}

/// Maps each side's local feature ids onto one shared row space of size `size`;
/// the shared reference row is `size` itself.
struct SharedVocabulary {
  std::size_t size = 0;
  std::vector<Index> left;
  std::vector<Index> right;
};

/// E: left entity i -> row i; a right entity in a training seed pair reuses its
/// partner's row, every other right entity gets a fresh row.
/// R, T: ids are shared between the two graphs.
/// I: intervals are matched by their (start, end) value.
inline SharedVocabulary shared_vocabulary(const AlignmentTask& task, FeatureType type) {
  SharedVocabulary v;
  const auto& l = task.left;
  const auto& r = task.right;
  switch (type) {
    case FeatureType::E: {
      v.left.resize(l.entity_count());
      for (Index i = 0; i < l.entity_count(); ++i) v.left[i] = i;
      v.right.assign(r.entity_count(), static_cast<Index>(-1));
      for (auto [a, b] : task.train_seeds.pairs) v.right[b] = a;
      Index next = l.entity_count();
      for (auto& x : v.right)
        if (x == static_cast<Index>(-1)) x = next++;
      v.size = next;
      break;
    }
    case FeatureType::R:
    case FeatureType::T: {
      std::size_t nl = feature_vocabulary_size(l, type), nr = feature_vocabulary_size(r, type);
      v.size = std::max(nl, nr);
      v.left.resize(nl);
      v.right.resize(nr);
      for (Index i = 0; i < nl; ++i) v.left[i] = i;
      for (Index i = 0; i < nr; ++i) v.right[i] = i;
      break;
    }
    case FeatureType::I: {
      std::map<TemporalInterval, Index> ids;
      auto map_side = [&](const TemporalKnowledgeGraph& g, std::vector<Index>& out) {
        out.resize(g.interval_vocab().size());
        for (Index k = 0; k < g.interval_vocab().size(); ++k) {
          auto [it, _] = ids.emplace(g.interval_vocab()[k], ids.size());
          out[k] = it->second;
        }
      };
      map_side(l, v.left);
      map_side(r, v.right);
      v.size = ids.size();
      break;
    }
  }
  return v;
}

/// Re-indexes a bipartite matrix into the shared column space (size + 1 columns).
inline SparseRowMatrix remap_columns(const BipartiteFeatureMatrix& bip, const std::vector<Index>& mapping,
                                     std::size_t shared_size) {
  SparseRowMatrix out(bip.matrix.rows(), shared_size + 1);
  for (std::size_t r = 0; r < bip.matrix.rows(); ++r) {
    std::vector<SparseEntry> row;
    for (const auto& e : bip.matrix.row(r)) {
      Index c = e.col == bip.reference_column() ? shared_size : mapping.at(e.col);
      row.push_back({c, e.weight});
    }
    out.set_row(r, std::move(row));
  }
  return out;
}

/// (feature_count + 1) x dim, entries ~ N(0, 1/dim); the last row is the reference.
inline DenseMatrix init_features(FeatureType type, std::size_t feature_count, std::size_t dim, std::uint64_t seed) {
  if (dim < 1) throw InvalidParameter("init_features: dim must be >= 1");
  DenseMatrix f(feature_count + 1, dim);
  Rng rng(seed, "features.init", type_index(type));
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : f.values()) v = rng.normal() * sd;
  return f;
}

struct ReferenceSimilarity {
  std::vector<double> values;
  bool zero_reference = false;  // warning: reference row had (near) zero norm
};

inline ReferenceSimilarity reference_similarity(const DenseMatrix& embeddings, std::span<const double> reference_row) {
  if (reference_row.size() != embeddings.cols()) throw ShapeError("reference_similarity: dimension mismatch");
  ReferenceSimilarity out;
  out.values.resize(embeddings.rows(), 0.0);
  if (norm(reference_row) < kNormFloor) {
    out.zero_reference = true;
    return out;
  }
  for (std::size_t i = 0; i < embeddings.rows(); ++i) out.values[i] = cosine(embeddings.row(i), reference_row);
  return out;
}

enum class RichnessBin { low = 0, medium = 1, high = 2 };

inline constexpr std::string_view to_string(RichnessBin b) noexcept {
  switch (b) {
    case RichnessBin::low: return "low";
    case RichnessBin::medium: return "medium";
    case RichnessBin::high: return "high";
  }
  return "?";
}

/// Lower edges of the medium and high bins per feature type.
inline constexpr std::pair<std::size_t, std::size_t> richness_thresholds(FeatureType t) noexcept {
  switch (t) {
    case FeatureType::E: return {3, 8};
    case FeatureType::R: return {2, 4};
    case FeatureType::T: return {1, 5};
    case FeatureType::I: return {3, 5};
  }
  return {0, 0};
}

inline RichnessBin richness_bin(std::size_t distinct_features, FeatureType t) noexcept {
  auto [mid, high] = richness_thresholds(t);
  if (distinct_features >= high) return RichnessBin::high;
  if (distinct_features >= mid) return RichnessBin::medium;
  return RichnessBin::low;
}

inline std::vector<RichnessBin> richness_bins(const TemporalKnowledgeGraph& g, FeatureType type) {
  std::vector<RichnessBin> out(g.entity_count());
  for (Index e = 0; e < g.entity_count(); ++e) out[e] = richness_bin(g.feature_count(e, type), type);
  return out;
}

}  // namespace tea
