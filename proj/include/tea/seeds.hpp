#pragma once

// Bi-directional dual-view seed selection. A new pair (e, e*) is admitted when
//   - e* is e's argmax under both the structural and the temporal similarity,
//   - e is e*'s argmax (reverse direction) under both similarities,
// and neither e nor e* is already seeded.

#include <algorithm>
#include <map>
#include <optional>
#include <unordered_set>
#include <vector>

#include "tea/metrics.hpp"

namespace tea {

struct SeedSelection {
  SeedAlignment expanded;
  std::vector<std::pair<Index, Index>> added;
};

namespace detail {

struct ArgmaxTable {
  std::vector<std::optional<Index>> forward;  // left -> right
  std::vector<std::optional<Index>> reverse;  // right -> left
  std::vector<double> forward_score;
};

inline ArgmaxTable argmax_table(const SimilarityView& v, std::size_t right_count) {
  ArgmaxTable t;
  t.forward.assign(v.rows(), std::nullopt);
  t.forward_score.assign(v.rows(), 0.0);
  t.reverse.assign(right_count, std::nullopt);
  std::vector<double> best(right_count, 0.0);
  auto offer = [&](Index i, Index j, double s) {
    if (!t.forward[i] || s > t.forward_score[i] || (s == t.forward_score[i] && j < *t.forward[i])) {
      t.forward[i] = j;
      t.forward_score[i] = s;
    }
    if (!t.reverse[j] || s > best[j] || (s == best[j] && i < *t.reverse[j])) {
      t.reverse[j] = i;
      best[j] = s;
    }
  };
  if (v.is_topk()) {
    const auto& k = *v.topk;
    for (std::size_t i = 0; i < k.rows; ++i)
      for (std::size_t c = 0; c < k.k; ++c) offer(i, k.index[i * k.k + c], k.score[i * k.k + c]);
  } else {
    for (std::size_t i = 0; i < v.dense.rows(); ++i)
      for (std::size_t j = 0; j < v.dense.cols(); ++j) offer(i, j, v.dense(i, j));
  }
  return t;
}

}  // namespace detail

inline SeedSelection select_seeds(const SimilarityView& s_r, const SimilarityView& s_t, const SeedAlignment& seeds) {
  if (s_r.source != ViewSource::structural || s_t.source != ViewSource::temporal)
    throw ContractViolation("select_seeds: expects a structural and a temporal similarity view");
  if (s_r.is_topk() != s_t.is_topk()) throw ContractViolation("select_seeds: views must both be dense or both top-k");
  const std::size_t rows = s_r.rows();
  const std::size_t cols = s_r.is_topk() ? s_r.topk->right_count : s_r.dense.cols();
  const std::size_t cols_t = s_t.is_topk() ? s_t.topk->right_count : s_t.dense.cols();
  if (s_t.rows() != rows || cols_t != cols) throw ShapeError("select_seeds: view shapes differ");
  auto a_r = detail::argmax_table(s_r, cols);
  auto a_t = detail::argmax_table(s_t, cols);
  std::unordered_set<Index> used_left, used_right;
  for (auto [a, b] : seeds.pairs) {
    used_left.insert(a);
    used_right.insert(b);
  }
  // Best candidate per right entity, so the pass stays one-to-one.
  std::map<Index, std::pair<Index, double>> by_right;
  for (Index e = 0; e < rows; ++e) {
    if (used_left.count(e)) continue;
    auto fr = a_r.forward[e], ft = a_t.forward[e];
    if (!fr || !ft || *fr != *ft) continue;
    Index j = *fr;
    if (used_right.count(j)) continue;
    if (a_r.reverse[j] != e || a_t.reverse[j] != e) continue;
    double score = a_r.forward_score[e] + a_t.forward_score[e];
    auto it = by_right.find(j);
    if (it == by_right.end() || score > it->second.second) by_right[j] = {e, score};
  }
  SeedSelection out;
  out.expanded = seeds;
  for (auto [j, v] : by_right) out.added.emplace_back(v.first, j);
  std::sort(out.added.begin(), out.added.end());
  out.expanded.pairs.insert(out.expanded.pairs.end(), out.added.begin(), out.added.end());
  return out;
}

}  // namespace tea
