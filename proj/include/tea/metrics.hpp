#pragma once

// Ranking and MRR / Hits@N evaluation with per-slice breakdowns.

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tea/consensus.hpp"
#include "tea/features.hpp"
#include "tea/tkg.hpp"

namespace tea {

enum class ViewSource { structural, temporal, mixed, dual, final };

inline constexpr std::string_view to_string(ViewSource s) noexcept {
  switch (s) {
    case ViewSource::structural: return "structural";
    case ViewSource::temporal: return "temporal";
    case ViewSource::mixed: return "mixed";
    case ViewSource::dual: return "dual";
    case ViewSource::final: return "final";
  }
  return "?";
}

/// Rows are left entity ids, columns right entity ids. Exactly one of
/// `dense` / `topk` is populated.
struct SimilarityView {
  ViewSource source = ViewSource::mixed;
  DenseMatrix dense;
  std::optional<TopKSimilarity> topk;

  bool is_topk() const noexcept { return topk.has_value(); }
  std::size_t rows() const noexcept { return topk ? topk->rows : dense.rows(); }
};

struct Ranking {
  /// ranked[r]: right candidates of left entity r, best first. Empty = unrankable.
  std::vector<std::vector<Index>> ranked;

  std::optional<Index> prediction(Index left) const {
    if (left >= ranked.size() || ranked[left].empty()) return std::nullopt;
    return ranked[left].front();
  }
  /// 1-based rank of `right` for `left`; 0 when not among the ranked candidates.
  std::size_t rank_of(Index left, Index right) const {
    const auto& r = ranked.at(left);
    auto it = std::find(r.begin(), r.end(), right);
    return it == r.end() ? 0 : static_cast<std::size_t>(it - r.begin()) + 1;
  }
};

/// Descending score, ties to the smaller right index. `candidates` restricts the
/// columns (all columns when null). Top-k rows rank only their retained entries.
inline Ranking rank_and_predict(const SimilarityView& view, const std::vector<Index>* candidates = nullptr) {
  Ranking out;
  std::vector<char> allowed;
  if (candidates) {
    std::size_t cols = view.is_topk() ? view.topk->right_count : view.dense.cols();
    allowed.assign(cols, 0);
    for (Index c : *candidates) {
      if (c >= cols) throw ShapeError("rank_and_predict: candidate out of range");
      allowed[c] = 1;
    }
  }
  auto ok = [&](Index c) { return allowed.empty() || allowed[c]; };
  out.ranked.resize(view.rows());
  if (view.is_topk()) {
    const auto& t = *view.topk;
    for (std::size_t r = 0; r < t.rows; ++r) {
      std::vector<std::pair<double, Index>> items;
      for (std::size_t c = 0; c < t.k; ++c)
        if (ok(t.index[r * t.k + c])) items.emplace_back(t.score[r * t.k + c], t.index[r * t.k + c]);
      std::sort(items.begin(), items.end(),
                [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
      for (auto& [_, j] : items) out.ranked[r].push_back(j);
    }
    return out;
  }
  const DenseMatrix& m = view.dense;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto& row = out.ranked[r];
    for (Index j = 0; j < m.cols(); ++j)
      if (ok(j)) row.push_back(j);
    auto s = m.row(r);
    std::stable_sort(row.begin(), row.end(), [&](Index a, Index b) { return s[a] > s[b]; });
  }
  return out;
}

struct SliceMetrics {
  std::size_t count = 0;
  double mrr = 0.0;
  std::map<int, double> hits;
};

struct MetricReport {
  SliceMetrics overall;
  std::map<std::string, SliceMetrics> slices;

  double mrr() const noexcept { return overall.mrr; }
  double hits(int n) const { return overall.hits.at(n); }
};

/// Slice labels of every left entity: "<type>:<bin>" for the four richness
/// types and one of Non-tem / Sparse-tem / Dense-tem.
struct SliceInfo {
  std::vector<std::vector<std::string>> labels;
};

inline std::string temporal_group(const TemporalKnowledgeGraph& g, Index e, std::size_t dense_threshold) {
  std::size_t distinct = g.feature_count(e, FeatureType::T);
  if (distinct == 0) return "Non-tem";
  return distinct >= dense_threshold ? "Dense-tem" : "Sparse-tem";
}

inline SliceInfo make_slice_info(const TemporalKnowledgeGraph& left, std::size_t dense_threshold = 5) {
  SliceInfo info;
  info.labels.resize(left.entity_count());
  for (FeatureType t : kAllFeatureTypes) {
    auto bins = richness_bins(left, t);
    for (Index e = 0; e < left.entity_count(); ++e)
      info.labels[e].push_back(std::string(to_string(t)) + ":" + std::string(to_string(bins[e])));
  }
  for (Index e = 0; e < left.entity_count(); ++e) info.labels[e].push_back(temporal_group(left, e, dense_threshold));
  return info;
}

inline MetricReport evaluate(const Ranking& ranking, const SeedAlignment& test, const SliceInfo* slices = nullptr,
                             const std::vector<int>& hits_at = {1, 5, 10}) {
  std::vector<Index> missing;
  for (auto [a, b] : test.pairs)
    if (a >= ranking.ranked.size() || ranking.ranked[a].empty()) missing.push_back(a);
  if (!missing.empty()) {
    std::string msg = "evaluate: unranked test entities:";
    for (Index m : missing) msg += " " + std::to_string(m);
    throw EvaluationError(msg);
  }
  MetricReport rep;
  auto add = [&](SliceMetrics& s, std::size_t rank) {
    ++s.count;
    if (rank > 0) s.mrr += 1.0 / static_cast<double>(rank);
    for (int n : hits_at) s.hits[n] += (rank > 0 && rank <= static_cast<std::size_t>(n)) ? 1.0 : 0.0;
  };
  auto finish = [&](SliceMetrics& s) {
    for (int n : hits_at) s.hits[n] += 0.0;
    if (s.count == 0) return;
    s.mrr /= static_cast<double>(s.count);
    for (auto& [_, v] : s.hits) v /= static_cast<double>(s.count);
  };
  for (auto [a, b] : test.pairs) {
    std::size_t rank = ranking.rank_of(a, b);
    add(rep.overall, rank);
    if (slices && a < slices->labels.size())
      for (const auto& label : slices->labels[a]) add(rep.slices[label], rank);
  }
  finish(rep.overall);
  for (auto& [_, s] : rep.slices) finish(s);
  return rep;
}

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// metric \t slice \t value lines; `prefix` is prepended to the slice name.
inline void write_metrics(std::ostream& out, const MetricReport& rep, const std::string& prefix = "") {
  auto emit = [&](const std::string& slice, const SliceMetrics& s) {
    out << "count\t" << slice << '\t' << s.count << '\n';
    out << "MRR\t" << slice << '\t' << format_value(s.mrr) << '\n';
    for (const auto& [n, v] : s.hits) out << "H@" << n << '\t' << slice << '\t' << format_value(v) << '\n';
  };
  emit(prefix + "all", rep.overall);
  for (const auto& [name, s] : rep.slices) emit(prefix + name, s);
}

}  // namespace tea
