#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "wlticket/graph.hpp"
#include "wlticket/wl.hpp"

namespace wlticket {

inline constexpr std::size_t kDefaultNodeCap = 16;

namespace iso_detail {

class Matcher {
 public:
  Matcher(const Graph& g1, const Graph& g2, const std::vector<std::size_t>& c1,
          const std::vector<std::size_t>& c2)
      : g1_(g1), g2_(g2), c1_(c1), c2_(c2), map_(g1.node_count(), kNone),
        used_(g2.node_count(), false) {
    order_ = search_order();
  }

  std::optional<std::vector<std::size_t>> run() {
    if (extend(0)) return map_;
    return std::nullopt;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  // Most-constrained first: prefer nodes with many already-ordered neighbors,
  // then rare colors.
  std::vector<std::size_t> search_order() const {
    const std::size_t n = g1_.node_count();
    std::vector<std::size_t> freq;
    for (std::size_t c : c1_) {
      if (c >= freq.size()) freq.resize(c + 1, 0);
      ++freq[c];
    }
    std::vector<bool> placed(n, false);
    std::vector<std::size_t> links(n, 0);
    std::vector<std::size_t> order;
    order.reserve(n);
    for (std::size_t step = 0; step < n; ++step) {
      std::size_t best = kNone;
      for (std::size_t v = 0; v < n; ++v) {
        if (placed[v]) continue;
        if (best == kNone || links[v] > links[best] ||
            (links[v] == links[best] && freq[c1_[v]] < freq[c1_[best]])) {
          best = v;
        }
      }
      placed[best] = true;
      order.push_back(best);
      for (std::size_t u : g1_.neighbors(best)) ++links[u];
    }
    return order;
  }

  bool consistent(std::size_t v, std::size_t w) const {
    if (c1_[v] != c2_[w] || used_[w]) return false;
    for (std::size_t u = 0; u < g1_.node_count(); ++u) {
      if (map_[u] == kNone) continue;
      if (g1_.adjacent(v, u) != g2_.adjacent(w, map_[u])) return false;
    }
    return true;
  }

  bool extend(std::size_t depth) {
    if (depth == order_.size()) return true;
    const std::size_t v = order_[depth];
    auto attempt = [&](std::size_t w) {
      if (!consistent(v, w)) return false;
      map_[v] = w;
      used_[w] = true;
      if (extend(depth + 1)) return true;
      map_[v] = kNone;
      used_[w] = false;
      return false;
    };
    // Identity first so literally equal graphs get the identity witness.
    if (v < g2_.node_count() && attempt(v)) return true;
    for (std::size_t w = 0; w < g2_.node_count(); ++w) {
      if (w != v && attempt(w)) return true;
    }
    return false;
  }

  const Graph& g1_;
  const Graph& g2_;
  const std::vector<std::size_t>& c1_;
  const std::vector<std::size_t>& c2_;
  std::vector<std::size_t> map_;
  std::vector<bool> used_;
  std::vector<std::size_t> order_;
};

}  // namespace iso_detail

/// Exact isomorphism search by backtracking over stable 1-WL color classes.
/// Returns perm with perm[v] = image in g2 of node v of g1. With `labeled`,
/// the bijection must also preserve node labels. Worst case is exponential;
/// callers cap the node count.
inline std::optional<std::vector<std::size_t>> find_isomorphism(const Graph& g1, const Graph& g2,
                                                                bool labeled) {
  if (g1.node_count() != g2.node_count() || g1.edge_count() != g2.edge_count()) return std::nullopt;
  if (labeled && g1.feature_dim() != g2.feature_dim()) return std::nullopt;
  const Graph* pair[2] = {&g1, &g2};
  const auto jc = joint_refine(pair, kUnbounded, labeled);
  const auto& c1 = jc.graphs[0].final_colors();
  const auto& c2 = jc.graphs[1].final_colors();
  if (jc.graphs[0].multiset(jc.iterations_run) != jc.graphs[1].multiset(jc.iterations_run)) {
    return std::nullopt;
  }
  iso_detail::Matcher m(g1, g2, c1, c2);
  return m.run();
}

inline bool isomorphic(const Graph& g1, const Graph& g2, bool labeled) {
  return find_isomorphism(g1, g2, labeled).has_value();
}

/// Checks a candidate bijection directly, independent of the search.
inline bool is_isomorphism(const Graph& g1, const Graph& g2, const std::vector<std::size_t>& perm,
                           bool labeled) {
  const std::size_t n = g1.node_count();
  if (g2.node_count() != n || perm.size() != n) return false;
  std::vector<bool> hit(n, false);
  for (std::size_t p : perm) {
    if (p >= n || hit[p]) return false;
    hit[p] = true;
  }
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      if (g1.adjacent(u, v) != g2.adjacent(perm[u], perm[v])) return false;
  if (labeled) {
    if (g1.feature_dim() != g2.feature_dim()) return false;
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t j = 0; j < g1.feature_dim(); ++j)
        if (g1.features()(v, j) != g2.features()(perm[v], j)) return false;
  }
  return true;
}

}  // namespace wlticket
