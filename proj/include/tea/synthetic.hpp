#pragma once

// Twin-graph generator for desk-scale experiments. The left graph is a
// preferential-attachment multigraph (connected via a random spanning tree) so
// that entity richness is heterogeneous; the right graph is a relabelled copy
// with a fixed fraction of facts perturbed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "tea/io.hpp"
#include "tea/rng.hpp"
#include "tea/tkg.hpp"

namespace tea {

struct SyntheticParams {
  std::size_t entities = 200;
  std::size_t relations = 10;
  std::size_t timestamps = 50;
  double density = 4.0;  // mean facts per entity (out-degree)
  double temporal_fraction = 0.5;
  double noise = 0.0;
  std::uint64_t seed = 1;
  double seed_fraction = 0.3;
};

struct SyntheticTask {
  AlignmentTask task;
  /// Ground truth: left entity i corresponds to right entity permutation[i].
  std::vector<Index> permutation;
  /// Bookkeeping of the perturbation pass.
  std::size_t dropped = 0;
  std::size_t rewired = 0;
  std::size_t jittered = 0;
};

namespace detail {

inline Fact random_temporal_slots(Fact f, Rng& rng, std::size_t timestamps, double temporal_fraction) {
  if (rng.uniform() >= temporal_fraction) return f;
  Index s = rng.below(timestamps);
  Index len = 0;
  while (rng.uniform() < 0.6 && s + len + 1 < timestamps) ++len;
  double kind = rng.uniform();
  if (kind < 0.6) {
    f.start = s;
    f.end = s + len;
  } else if (kind < 0.8) {
    f.start = s;
  } else {
    f.end = s + len;
  }
  return f;
}

inline Timestamp jitter(const Timestamp& t, Rng& rng, std::size_t timestamps) {
  if (!t) return t;
  if (timestamps == 1) return t;
  if (*t == 0) return Index{1};
  if (*t + 1 >= timestamps) return *t - 1;
  return rng.uniform() < 0.5 ? *t - 1 : *t + 1;
}

}  // namespace detail

inline SyntheticTask generate_synthetic_task(const SyntheticParams& p) {
  if (p.entities < 1 || p.relations < 1 || p.timestamps < 1)
    throw InvalidParameter("synthetic: entity, relation and timestamp counts must be >= 1");
  if (!(p.density >= 1.0)) throw InvalidParameter("synthetic: density must be >= 1");
  if (!(p.noise >= 0.0 && p.noise < 1.0)) throw InvalidParameter("synthetic: noise must be in [0, 1)");
  if (!(p.temporal_fraction >= 0.0 && p.temporal_fraction <= 1.0))
    throw InvalidParameter("synthetic: temporal_fraction must be in [0, 1]");
  const std::size_t n = p.entities;
  const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) * p.density));
  if (n < 2 || m == 0) throw InvalidParameter("synthetic: parameters produce an empty fact set");

  Rng rng(p.seed, "synthetic.left");
  std::vector<Fact> facts;
  facts.reserve(m);
  std::vector<Index> endpoints;  // every fact endpoint, for preferential sampling
  auto pick = [&](void) -> Index {
    if (!endpoints.empty() && rng.uniform() < 0.5) return endpoints[rng.below(endpoints.size())];
    return rng.below(n);
  };
  auto add = [&](Index h, Index t) {
    Fact f{h, rng.below(p.relations), t, std::nullopt, std::nullopt};
    facts.push_back(detail::random_temporal_slots(f, rng, p.timestamps, p.temporal_fraction));
    endpoints.push_back(h);
    endpoints.push_back(t);
  };
  // Spanning tree: entity i attaches to an earlier entity.
  for (Index i = 1; i < n && facts.size() < m; ++i) {
    Index j = endpoints.empty() ? 0 : pick();
    while (j >= i) j = rng.below(i);
    if (rng.uniform() < 0.5) add(i, j); else add(j, i);
  }
  while (facts.size() < m) {
    Index h = pick();
    Index t = pick();
    for (int tries = 0; t == h && tries < 16; ++tries) t = pick();
    if (t == h) t = (h + 1) % n;
    add(h, t);
  }

  // Random relabelling so that ids carry no structural information.
  std::vector<Index> relabel(n);
  std::iota(relabel.begin(), relabel.end(), Index{0});
  rng.shuffle(relabel);
  for (auto& f : facts) {
    f.head = relabel[f.head];
    f.tail = relabel[f.tail];
  }
  rng.shuffle(facts);

  SyntheticTask out;
  out.permutation.resize(n);
  std::iota(out.permutation.begin(), out.permutation.end(), Index{0});
  Rng prng(p.seed, "synthetic.permutation");
  prng.shuffle(out.permutation);

  Rng nrng(p.seed, "synthetic.noise");
  const auto n_perturb = static_cast<std::size_t>(std::llround(p.noise * static_cast<double>(facts.size())));
  std::vector<std::size_t> order(facts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  nrng.shuffle(order);
  std::vector<char> action(facts.size(), 0);  // 0 keep, 1 drop, 2 rewire, 3 jitter
  for (std::size_t k = 0; k < n_perturb; ++k) action[order[k]] = static_cast<char>(1 + nrng.below(3));

  std::vector<Fact> right;
  right.reserve(facts.size());
  for (std::size_t k = 0; k < facts.size(); ++k) {
    Fact f = facts[k];
    f.head = out.permutation[f.head];
    f.tail = out.permutation[f.tail];
    switch (action[k]) {
      case 1:
        ++out.dropped;
        continue;
      case 2: {
        Index t = nrng.below(n);
        if (t == f.head) t = (t + 1) % n;
        f.tail = t;
        ++out.rewired;
        break;
      }
      case 3:
        if (f.has_time()) {
          f.start = detail::jitter(f.start, nrng, p.timestamps);
          f.end = detail::jitter(f.end, nrng, p.timestamps);
          if (f.start && f.end && *f.start > *f.end) std::swap(f.start, f.end);
        } else {
          f.relation = (f.relation + 1 + nrng.below(std::max<std::size_t>(p.relations, 2) - 1)) % p.relations;
        }
        ++out.jittered;
        break;
      default:
        break;
    }
    right.push_back(f);
  }
  nrng.shuffle(right);

  std::vector<std::pair<Index, Index>> links(n);
  for (Index i = 0; i < n; ++i) links[i] = {i, out.permutation[i]};
  auto [train, test] = split_links(links, p.seed_fraction);
  out.task = AlignmentTask{TemporalKnowledgeGraph(n, p.relations, p.timestamps, std::move(facts)),
                           TemporalKnowledgeGraph(n, p.relations, p.timestamps, std::move(right)), std::move(train),
                           std::move(test)};
  out.task.validate();
  return out;
}

}  // namespace tea
