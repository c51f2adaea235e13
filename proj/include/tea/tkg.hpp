#pragma once

// Temporal knowledge graph data model.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tea/error.hpp"

namespace tea {

using Index = std::size_t;
using Timestamp = std::optional<Index>;

/// Feature families. Order matters: it is the column order of the reference matrix.
enum class FeatureType { E = 0, R = 1, T = 2, I = 3 };

inline constexpr FeatureType kAllFeatureTypes[] = {FeatureType::E, FeatureType::R, FeatureType::T, FeatureType::I};

inline constexpr std::string_view to_string(FeatureType t) noexcept {
  switch (t) {
    case FeatureType::E: return "E";
    case FeatureType::R: return "R";
    case FeatureType::T: return "T";
    case FeatureType::I: return "I";
  }
  return "?";
}

inline constexpr std::size_t type_index(FeatureType t) noexcept { return static_cast<std::size_t>(t); }

struct Fact {
  Index head = 0;
  Index relation = 0;
  Index tail = 0;
  Timestamp start;
  Timestamp end;

  bool has_time() const noexcept { return start.has_value() || end.has_value(); }
  friend bool operator==(const Fact&, const Fact&) = default;
  friend auto operator<=>(const Fact&, const Fact&) = default;
};

struct TemporalInterval {
  Timestamp start;
  Timestamp end;
  friend bool operator==(const TemporalInterval&, const TemporalInterval&) = default;
  friend auto operator<=>(const TemporalInterval&, const TemporalInterval&) = default;
};

/// Immutable after construction. Entities, relations and timestamps are dense
/// integer ids; intervals get stable indices in first-occurrence order.
class TemporalKnowledgeGraph {
 public:
  TemporalKnowledgeGraph() = default;

  TemporalKnowledgeGraph(std::size_t entity_count, std::size_t relation_count, std::size_t timestamp_count,
                         std::vector<Fact> facts)
      : entity_count_(entity_count),
        relation_count_(relation_count),
        timestamp_count_(timestamp_count),
        facts_(std::move(facts)) {
    std::map<TemporalInterval, Index> lookup;
    fact_interval_.assign(facts_.size(), 0);
    incident_.assign(entity_count_, {});
    for (std::size_t f = 0; f < facts_.size(); ++f) {
      const Fact& x = facts_[f];
      if (x.head >= entity_count_ || x.tail >= entity_count_)
        throw ValidationError("fact " + std::to_string(f) + ": entity index out of range");
      if (x.relation >= relation_count_)
        throw ValidationError("fact " + std::to_string(f) + ": relation index out of range");
      if ((x.start && *x.start >= timestamp_count_) || (x.end && *x.end >= timestamp_count_))
        throw ValidationError("fact " + std::to_string(f) + ": timestamp index out of range");
      TemporalInterval iv{x.start, x.end};
      auto [it, inserted] = lookup.emplace(iv, interval_vocab_.size());
      if (inserted) interval_vocab_.push_back(iv);
      fact_interval_[f] = it->second;
      incident_[x.head].push_back(f);
      if (x.tail != x.head) incident_[x.tail].push_back(f);
    }
  }

  std::size_t entity_count() const noexcept { return entity_count_; }
  std::size_t relation_count() const noexcept { return relation_count_; }
  std::size_t timestamp_count() const noexcept { return timestamp_count_; }
  const std::vector<Fact>& facts() const noexcept { return facts_; }
  const std::vector<TemporalInterval>& interval_vocab() const noexcept { return interval_vocab_; }

  /// Interval-vocabulary index of fact f. The (~, ~) pair has an entry too but is
  /// never used as a feature.
  Index fact_interval(std::size_t f) const noexcept { return fact_interval_[f]; }
  /// Facts touching entity e (self-loops listed once).
  const std::vector<std::size_t>& incident(Index e) const noexcept { return incident_[e]; }

  std::vector<std::string>& names() noexcept { return names_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// Number of distinct features of a type attached to an entity.
  std::size_t feature_count(Index entity, FeatureType type) const;

  /// Distinct undirected neighbours of every entity, sorted ascending.
  std::vector<std::vector<Index>> neighbor_lists() const {
    std::vector<std::vector<Index>> out(entity_count_);
    for (Index e = 0; e < entity_count_; ++e) {
      for (std::size_t f : incident_[e]) {
        const Fact& x = facts_[f];
        out[e].push_back(x.head == e ? x.tail : x.head);
      }
      std::sort(out[e].begin(), out[e].end());
      out[e].erase(std::unique(out[e].begin(), out[e].end()), out[e].end());
    }
    return out;
  }

  friend bool operator==(const TemporalKnowledgeGraph& a, const TemporalKnowledgeGraph& b) {
    return a.entity_count_ == b.entity_count_ && a.relation_count_ == b.relation_count_ &&
           a.timestamp_count_ == b.timestamp_count_ && a.facts_ == b.facts_ && a.names_ == b.names_;
  }

 private:
  std::size_t entity_count_ = 0;
  std::size_t relation_count_ = 0;
  std::size_t timestamp_count_ = 0;
  std::vector<Fact> facts_;
  std::vector<TemporalInterval> interval_vocab_;
  std::vector<Index> fact_interval_;
  std::vector<std::vector<std::size_t>> incident_;
  std::vector<std::string> names_;
};

/// |F_ic| for every feature c of the given type attached to `entity`.
/// E: neighbour entities (head and tail roles merged); R: relations; T: start/end
/// timestamps; I: interval-vocabulary ids of facts with any concrete endpoint.
inline std::map<Index, std::size_t> feature_counts(const TemporalKnowledgeGraph& g, Index entity, FeatureType type) {
  if (entity >= g.entity_count()) throw InvalidParameter("feature_counts: entity out of range");
  std::map<Index, std::size_t> counts;
  for (std::size_t f : g.incident(entity)) {
    const Fact& x = g.facts()[f];
    switch (type) {
      case FeatureType::E:
        ++counts[x.head == entity ? x.tail : x.head];
        break;
      case FeatureType::R:
        ++counts[x.relation];
        break;
      case FeatureType::T:
        if (x.start) ++counts[*x.start];
        if (x.end && x.end != x.start) ++counts[*x.end];
        break;
      case FeatureType::I:
        if (x.has_time()) ++counts[g.fact_interval(f)];
        break;
    }
  }
  return counts;
}

inline std::size_t TemporalKnowledgeGraph::feature_count(Index entity, FeatureType type) const {
  return feature_counts(*this, entity, type).size();
}

/// Raw count routed to the reference column: the number of incident facts for E/R
/// (sum of neighbour fact counts), the number of fully placeholder facts for T/I.
inline std::size_t reference_count(const TemporalKnowledgeGraph& g, Index entity, FeatureType type) {
  std::size_t n = 0;
  for (std::size_t f : g.incident(entity)) {
    if (type == FeatureType::E || type == FeatureType::R || !g.facts()[f].has_time()) ++n;
  }
  return n;
}

struct SeedAlignment {
  std::vector<std::pair<Index, Index>> pairs;

  std::size_t size() const noexcept { return pairs.size(); }

  /// Throws ValidationError on a repeated left or right endpoint.
  void validate_one_to_one() const {
    std::unordered_set<Index> l, r;
    for (auto [a, b] : pairs) {
      if (!l.insert(a).second) throw ValidationError("duplicate left entity " + std::to_string(a) + " in alignment");
      if (!r.insert(b).second) throw ValidationError("duplicate right entity " + std::to_string(b) + " in alignment");
    }
  }

  friend bool operator==(const SeedAlignment&, const SeedAlignment&) = default;
};

struct AlignmentTask {
  TemporalKnowledgeGraph left;
  TemporalKnowledgeGraph right;
  SeedAlignment train_seeds;
  SeedAlignment test_pairs;

  void validate() const {
    train_seeds.validate_one_to_one();
    test_pairs.validate_one_to_one();
    std::unordered_set<Index> l, r;
    for (auto [a, b] : train_seeds.pairs) {
      if (a >= left.entity_count() || b >= right.entity_count())
        throw ValidationError("seed pair out of entity range");
      l.insert(a);
      r.insert(b);
    }
    for (auto [a, b] : test_pairs.pairs) {
      if (a >= left.entity_count() || b >= right.entity_count())
        throw ValidationError("test pair out of entity range");
      if (l.count(a) || r.count(b)) throw ValidationError("train seeds and test pairs overlap");
    }
  }

  friend bool operator==(const AlignmentTask&, const AlignmentTask&) = default;
};

}  // namespace tea
