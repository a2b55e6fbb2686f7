#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "wlticket/graph.hpp"

namespace wlticket {

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

/// Per-iteration node colors of one graph. history[0] is the input labeling.
struct ColorAssignment {
  std::vector<std::vector<std::size_t>> history;
  std::size_t iterations_run = 0;
  bool stable = false;

  const std::vector<std::size_t>& final_colors() const { return history.back(); }

  std::size_t color_count(std::size_t t) const {
    auto c = history.at(t);
    std::sort(c.begin(), c.end());
    return static_cast<std::size_t>(std::unique(c.begin(), c.end()) - c.begin());
  }

  /// Sorted color multiset at iteration t (clamped to the last computed one).
  std::vector<std::size_t> multiset(std::size_t t) const {
    auto c = history.at(std::min(t, history.size() - 1));
    std::sort(c.begin(), c.end());
    return c;
  }
};

/// Result of refining several graphs with one shared Hash table per iteration,
/// so colors are comparable across graphs.
struct JointColoring {
  std::vector<ColorAssignment> graphs;
  std::size_t iterations_run = 0;
  bool stable = false;
};

/// 1-WL on a set of graphs in parallel. Iteration-0 colors are the node labels
/// (or all 0 when `labeled` is false). Each iteration maps (own color, sorted
/// neighbor colors) to consecutive integers in first-occurrence order, scanning
/// graphs then nodes in order. Stops when the number of distinct colors over
/// the union is unchanged, or after `max_iterations`.
inline JointColoring joint_refine(std::span<const Graph* const> graphs,
                                  std::size_t max_iterations = kUnbounded, bool labeled = true) {
  JointColoring out;
  out.graphs.resize(graphs.size());
  auto distinct = [&](std::size_t t) {
    std::vector<std::size_t> all;
    for (const auto& ca : out.graphs) all.insert(all.end(), ca.history[t].begin(), ca.history[t].end());
    std::sort(all.begin(), all.end());
    return static_cast<std::size_t>(std::unique(all.begin(), all.end()) - all.begin());
  };

  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Graph& g = *graphs[i];
    out.graphs[i].history.push_back(labeled ? g.node_labels() : std::vector<std::size_t>(g.node_count(), 0));
  }
  if (graphs.empty()) {
    out.stable = true;
    return out;
  }

  std::size_t prev_count = distinct(0);
  std::size_t t = 0;
  while (t < max_iterations) {
    ++t;
    std::map<std::pair<std::size_t, std::vector<std::size_t>>, std::size_t> hash;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const Graph& g = *graphs[i];
      const auto& prev = out.graphs[i].history.back();
      std::vector<std::size_t> next(g.node_count());
      for (std::size_t v = 0; v < g.node_count(); ++v) {
        std::vector<std::size_t> nb;
        nb.reserve(g.degree(v));
        for (std::size_t u : g.neighbors(v)) nb.push_back(prev[u]);
        std::sort(nb.begin(), nb.end());
        auto [it, inserted] = hash.try_emplace({prev[v], std::move(nb)}, hash.size());
        next[v] = it->second;
      }
      out.graphs[i].history.push_back(std::move(next));
    }
    const std::size_t count = distinct(t);
    if (count == prev_count) {
      out.stable = true;
      break;
    }
    prev_count = count;
  }
  out.iterations_run = t;
  for (auto& ca : out.graphs) {
    ca.iterations_run = t;
    ca.stable = out.stable;
  }
  return out;
}

inline ColorAssignment refine(const Graph& g, std::size_t max_iterations = kUnbounded, bool labeled = true) {
  const Graph* ptr = &g;
  return std::move(joint_refine(std::span<const Graph* const>(&ptr, 1), max_iterations, labeled).graphs[0]);
}

/// True iff the paired color multisets differ at some iteration <= t.
inline bool wl_distinguishable(const Graph& g1, const Graph& g2, std::size_t t, bool labeled = true) {
  if (g1.node_count() != g2.node_count()) return true;
  const Graph* pair[2] = {&g1, &g2};
  const auto jc = joint_refine(pair, t, labeled);
  for (std::size_t it = 0; it <= jc.iterations_run; ++it) {
    if (jc.graphs[0].multiset(it) != jc.graphs[1].multiset(it)) return true;
  }
  return false;
}

/// Sorted final color multiset of every graph after joint refinement of the
/// whole dataset; equal signatures <=> 1-WL cannot tell the graphs apart
/// within `max_iterations`.
inline std::vector<std::vector<std::size_t>> wl_signatures(const Dataset& ds,
                                                           std::size_t max_iterations = kUnbounded,
                                                           bool labeled = true) {
  std::vector<const Graph*> ptrs;
  ptrs.reserve(ds.size());
  for (const auto& g : ds.graphs) ptrs.push_back(&g);
  auto jc = joint_refine(ptrs, max_iterations, labeled);
  std::vector<std::vector<std::size_t>> sig;
  sig.reserve(ds.size());
  for (const auto& ca : jc.graphs) sig.push_back(ca.multiset(jc.iterations_run));
  return sig;
}

}  // namespace wlticket
