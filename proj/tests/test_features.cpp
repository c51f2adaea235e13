#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"

using namespace tea;

namespace {

constexpr auto none = std::nullopt;

// 0 -r0- 1 at t1, 0 -r1- 2 untimed, 3 isolated
TemporalKnowledgeGraph small_graph() {
  return TemporalKnowledgeGraph(4, 2, 3, {{0, 0, 1, 1, none}, {0, 1, 2, none, none}});
}

double weight(const SparseRowMatrix& m, Index row, Index col) {
  for (const auto& e : m.row(row))
    if (e.col == col) return e.weight;
  return 0.0;
}

}  // namespace

TEST(Bipartite, SingleNeighbourSplitsEvenlyWithReference) {
  TemporalKnowledgeGraph g(2, 1, 1, {{0, 0, 1, none, none}});
  auto b = build_bipartite(g, FeatureType::E);
  EXPECT_NEAR(weight(b.matrix, 0, 1), 0.5, 1e-15);
  EXPECT_NEAR(weight(b.matrix, 0, b.reference_column()), 0.5, 1e-15);
}

TEST(Bipartite, TwoNeighboursAgainstReference) {
  auto b = build_bipartite(small_graph(), FeatureType::E);
  // features 1 and 2 once each, reference counts both facts
  const double z = 2 * std::log(2.0) + std::log(3.0);
  EXPECT_NEAR(weight(b.matrix, 0, 1), std::log(2.0) / z, 1e-15);
  EXPECT_NEAR(weight(b.matrix, 0, 2), std::log(2.0) / z, 1e-15);
  EXPECT_NEAR(weight(b.matrix, 0, b.reference_column()), std::log(3.0) / z, 1e-15);
}

TEST(Bipartite, UntimedEntityRoutesToReference) {
  auto b = build_bipartite(small_graph(), FeatureType::T);
  EXPECT_EQ(b.matrix.row(2).size(), 1u);
  EXPECT_NEAR(weight(b.matrix, 2, b.reference_column()), 1.0, 1e-15);
}

TEST(Bipartite, IsolatedEntityIsTheReference) {
  auto g = small_graph();
  for (FeatureType t : kAllFeatureTypes) {
    auto b = build_bipartite(g, t);
    ASSERT_EQ(b.matrix.row(3).size(), 1u);
    EXPECT_EQ(weight(b.matrix, 3, b.reference_column()), 1.0);
  }
}

TEST(Bipartite, RowsSumToOneAndMatchCounts) {
  auto r = check::oracle_bipartite(check::oracle_instances(4));
  EXPECT_LT(r.max_error, 1e-12);
  for (const auto& st : check::oracle_instances(4))
    for (FeatureType t : kAllFeatureTypes) {
      auto b = build_bipartite(st.task.left, t);
      for (std::size_t i = 0; i < b.matrix.rows(); ++i) {
        if (b.matrix.row(i).empty()) continue;
        double s = 0.0;
        for (const auto& e : b.matrix.row(i)) {
          EXPECT_GT(e.weight, 0.0);
          s += e.weight;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
    }
}

TEST(Bipartite, LogBaseDoesNotMatter) {
  auto g = check::tiny_task(4, 20).task.left;
  for (FeatureType t : kAllFeatureTypes) {
    auto b = build_bipartite(g, t);
    for (Index e = 0; e < g.entity_count(); ++e) {
      auto counts = feature_counts(g, e, t);
      double ref = std::log2(static_cast<double>(reference_count(g, e, t)) + 1.0), z = ref;
      for (auto [f, n] : counts) z += std::log2(static_cast<double>(n) + 1.0);
      for (auto [f, n] : counts) EXPECT_NEAR(weight(b.matrix, e, f), std::log2(n + 1.0) / z, 1e-12);
    }
  }
}

TEST(InitFeatures, DeterministicWithExpectedVariance) {
  auto a = init_features(FeatureType::R, 199, 50, 3);
  EXPECT_EQ(a, init_features(FeatureType::R, 199, 50, 3));
  EXPECT_NE(a, init_features(FeatureType::T, 199, 50, 3));
  EXPECT_EQ(a.rows(), 200u);
  double ss = 0.0;
  for (double v : a.values()) ss += v * v;
  double var = ss / static_cast<double>(a.size());
  EXPECT_GT(var * 50, 0.8);
  EXPECT_LT(var * 50, 1.2);
}

TEST(ReferenceSimilarity, BasicCases) {
  DenseMatrix h(3, 2, std::vector<double>{1, 0, 0, 2, -3, 0});
  std::vector<double> ref{1, 0};
  auto s = reference_similarity(h, ref);
  EXPECT_FALSE(s.zero_reference);
  EXPECT_NEAR(s.values[0], 1.0, 1e-15);
  EXPECT_NEAR(s.values[1], 0.0, 1e-15);
  EXPECT_NEAR(s.values[2], -1.0, 1e-15);
  std::vector<double> scaled{7, 0};
  EXPECT_EQ(reference_similarity(h, scaled).values, s.values);
  std::vector<double> zero{0, 0};
  auto z = reference_similarity(h, zero);
  EXPECT_TRUE(z.zero_reference);
  for (double v : z.values) EXPECT_EQ(v, 0.0);
}

TEST(Richness, BinsFollowThresholds) {
  std::vector<Fact> facts;
  for (Index j = 1; j <= 8; ++j) facts.push_back({0, j % 3, j, none, none});
  TemporalKnowledgeGraph g(9, 3, 1, facts);
  EXPECT_EQ(richness_bins(g, FeatureType::E)[0], RichnessBin::high);
  EXPECT_EQ(richness_bins(g, FeatureType::R)[0], RichnessBin::medium);
  EXPECT_EQ(richness_bins(g, FeatureType::T)[0], RichnessBin::low);
  EXPECT_EQ(richness_bins(g, FeatureType::E)[1], RichnessBin::low);
  EXPECT_EQ(richness_bin(2, FeatureType::E), RichnessBin::low);
  EXPECT_EQ(richness_bin(3, FeatureType::E), RichnessBin::medium);
  EXPECT_EQ(richness_bin(1, FeatureType::T), RichnessBin::medium);
  EXPECT_EQ(richness_bin(5, FeatureType::I), RichnessBin::high);
}

TEST(SharedVocabulary, EntityRowsFollowSeeds) {
  auto st = check::tiny_task(2, 12);
  const auto& task = st.task;
  auto v = shared_vocabulary(task, FeatureType::E);
  const std::size_t nl = task.left.entity_count();
  for (Index i = 0; i < nl; ++i) EXPECT_EQ(v.left[i], i);
  std::set<Index> seen;
  for (auto [a, b] : task.train_seeds.pairs) EXPECT_EQ(v.right[b], a);
  for (Index j = 0; j < task.right.entity_count(); ++j) {
    bool seeded = false;
    for (auto [a, b] : task.train_seeds.pairs) seeded |= b == j;
    if (seeded) continue;
    EXPECT_GE(v.right[j], nl);
    EXPECT_LT(v.right[j], v.size);
    EXPECT_TRUE(seen.insert(v.right[j]).second);
  }
  EXPECT_EQ(v.size, nl + task.right.entity_count() - task.train_seeds.size());
}

TEST(SharedVocabulary, RelationsAndTimesShareIds) {
  auto st = check::tiny_task(2, 12, 0.2);
  for (FeatureType t : {FeatureType::R, FeatureType::T}) {
    auto v = shared_vocabulary(st.task, t);
    for (Index k = 0; k < v.left.size(); ++k) EXPECT_EQ(v.left[k], k);
    for (Index k = 0; k < v.right.size(); ++k) EXPECT_EQ(v.right[k], k);
  }
}

TEST(SharedVocabulary, IntervalsMatchByValue) {
  auto st = check::tiny_task(3, 12);
  auto v = shared_vocabulary(st.task, FeatureType::I);
  const auto& li = st.task.left.interval_vocab();
  const auto& ri = st.task.right.interval_vocab();
  for (Index a = 0; a < li.size(); ++a)
    for (Index b = 0; b < ri.size(); ++b) EXPECT_EQ(li[a] == ri[b], v.left[a] == v.right[b]);
}

TEST(RemapColumns, ReferenceGoesToSharedLastColumn) {
  auto st = check::tiny_task(3, 12);
  auto v = shared_vocabulary(st.task, FeatureType::E);
  auto b = build_bipartite(st.task.right, FeatureType::E);
  auto m = remap_columns(b, v.right, v.size);
  EXPECT_EQ(m.cols(), v.size + 1);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double before = 0.0, after = 0.0;
    for (const auto& e : b.matrix.row(r)) before += e.weight;
    for (const auto& e : m.row(r)) after += e.weight;
    EXPECT_NEAR(before, after, 1e-15);
    EXPECT_NEAR(weight(b.matrix, r, b.reference_column()), weight(m, r, v.size), 1e-15);
  }
}
