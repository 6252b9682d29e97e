#pragma once

// Exhaustive reference for classify_pair, kept independent of its greedy
// implementation.

#include <algorithm>
#include <array>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "smm/discrepancy.hpp"

namespace smm::test {

struct KindCounts {
  std::size_t b = 0, f = 0, u = 0, o = 0;
  friend bool operator==(const KindCounts&, const KindCounts&) = default;
};

inline KindCounts counts_of(const std::vector<Discrepancy>& ds) {
  auto c = count_by_type(ds);
  return {c.belief_contradictions, c.false_beliefs, c.unsupported_beliefs, c.omissions};
}

inline bool same_fact(const BeliefTriple& a, const BeliefTriple& b) {
  return a.holder == b.holder && a.relation == b.relation && a.object == b.object && a.polarity == b.polarity;
}

inline std::vector<BeliefTriple> unique_facts(const std::vector<BeliefTriple>& in) {
  std::vector<BeliefTriple> out;
  for (const auto& t : in) {
    if (std::none_of(out.begin(), out.end(), [&](const BeliefTriple& o) { return same_fact(o, t); })) out.push_back(t);
  }
  return out;
}

// 0 agree, 1 contradiction, 2 false belief, -1 not pairable.
inline int pairing_edge(const BeliefTriple& g, const BeliefTriple& a) {
  if (g.holder != a.holder || g.relation != a.relation) return -1;
  if (g.object == a.object) return g.polarity == a.polarity ? 0 : 1;
  return 2;
}

/// Enumerates every partial one-to-one pairing of GT to annotator triples over
/// pairable edges and keeps the one with the most agreements, then the most
/// contradictions, then the most false beliefs.
inline KindCounts brute_force_counts(const std::vector<BeliefTriple>& gt_in, const std::vector<BeliefTriple>& ann_in) {
  auto gt = unique_facts(gt_in);
  auto ann = unique_facts(ann_in);
  std::array<std::size_t, 3> best{};
  std::array<std::size_t, 3> cur{};
  std::vector<bool> used(ann.size(), false);
  std::function<void(std::size_t)> go = [&](std::size_t i) {
    if (i == gt.size()) {
      best = std::max(best, cur);
      return;
    }
    go(i + 1);  // leave gt[i] unpaired
    for (std::size_t j = 0; j < ann.size(); ++j) {
      int e = used[j] ? -1 : pairing_edge(gt[i], ann[j]);
      if (e < 0) continue;
      used[j] = true;
      ++cur[e];
      go(i + 1);
      --cur[e];
      used[j] = false;
    }
  };
  go(0);
  auto paired = best[0] + best[1] + best[2];
  return {best[1], best[2], ann.size() - paired, gt.size() - paired};
}

/// Up to six triples over a small vocabulary, so collisions are common.
inline std::vector<BeliefTriple> random_triples(std::mt19937& rng) {
  static const std::vector<std::string> rels = {"at", "near"};
  static const std::vector<std::string> objs = {"pink box", "green box", "room 1"};
  std::vector<BeliefTriple> out;
  for (int n = rng() % 7; n > 0; --n) {
    out.push_back({rng() % 2 ? Holder::Searcher : Holder::Director, rels[rng() % rels.size()],
                   objs[rng() % objs.size()], rng() % 2 ? Polarity::Positive : Polarity::Negative, std::nullopt});
  }
  return out;
}

}  // namespace smm::test
