#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "wlticket/errors.hpp"
#include "wlticket/graph.hpp"
#include "wlticket/tensor.hpp"
#include "wlticket/wl.hpp"

namespace wlticket::synthetic {

/// Triangles (class 0) and 3-paths (class 1), `copies` of each.
inline Dataset triangle_vs_path(std::size_t copies = 20) {
  Dataset ds{"triangle_path", {}, 2, 1};
  for (std::size_t i = 0; i < copies; ++i) {
    ds.graphs.push_back(fixtures::triangle(0));
    ds.graphs.push_back(fixtures::path(3, 1));
  }
  return ds;
}

/// Two labelings of a 5-node path over labels {0, 1, 2}: node 0 gets label 0
/// and node 1 label 1 in the first graph, swapped in the second; the rest are
/// label 2. Same structure and the same feature sum, yet 1-WL separates them.
inline Graph sifdg_path(bool swapped, int label) {
  const std::vector<Edge> e{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  std::vector<std::size_t> l{0, 1, 2, 2, 2};
  if (swapped) std::swap(l[0], l[1]);
  return Graph::from_labels(5, e, l, 3, label);
}

/// `copies` of each sifdg_path variant; class = variant.
inline Dataset sifdg_pair(std::size_t copies = 20) {
  Dataset ds{"sifdg_pair", {}, 2, 3};
  for (std::size_t i = 0; i < copies; ++i) {
    ds.graphs.push_back(sifdg_path(false, 0));
    ds.graphs.push_back(sifdg_path(true, 1));
  }
  return ds;
}

struct TypesConfig {
  std::size_t types = 24;        // distinct isomorphism types
  std::size_t copies = 4;        // node-permuted copies per type
  std::size_t min_nodes = 4;
  std::size_t max_nodes = 7;
  std::size_t node_labels = 1;
  double edge_prob = 0.4;
  std::size_t wl_iterations = 2;  // types must differ under this many 1-WL rounds
};

/// Random connected graphs with pairwise distinct 1-WL signatures. Type i has
/// min_nodes + (i / 2) % span nodes and class i % 2, so both classes share
/// the same node-count distribution. Each type appears `copies` times under
/// random node permutations.
inline Dataset random_types(const TypesConfig& cfg, std::uint64_t seed) {
  if (cfg.types < 2 || cfg.copies < 1 || cfg.min_nodes < 2 || cfg.max_nodes < cfg.min_nodes || cfg.node_labels < 1)
    throw ConfigError("synthetic: invalid random_types config");
  Rng rng(seed, 0x5E7);
  std::vector<Graph> types;
  std::size_t attempts = 0;
  while (types.size() < cfg.types) {
    if (++attempts > 100000) throw ConfigError("synthetic: could not generate enough distinct types");
    const std::size_t span = cfg.max_nodes - cfg.min_nodes + 1;
    const std::size_t n = cfg.min_nodes + (types.size() / 2) % span;
    // Random spanning tree, then extra edges.
    std::vector<Edge> edges;
    for (std::size_t v = 1; v < n; ++v) edges.emplace_back(static_cast<std::size_t>(rng.uniform_index(v)), v);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v)
        if (std::find(edges.begin(), edges.end(), Edge{u, v}) == edges.end() && rng.bernoulli(cfg.edge_prob))
          edges.emplace_back(u, v);
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = static_cast<std::size_t>(rng.uniform_index(cfg.node_labels));
    Graph g = Graph::from_labels(n, edges, labels, cfg.node_labels, 0);
    bool fresh = true;
    for (const auto& t : types) {
      if (!wl_distinguishable(g, t, cfg.wl_iterations, true)) {
        fresh = false;
        break;
      }
    }
    if (fresh) types.push_back(std::move(g));
  }
  Dataset ds{"synthetic", {}, 2, cfg.node_labels};
  for (std::size_t c = 0; c < cfg.copies; ++c) {
    for (std::size_t t = 0; t < cfg.types; ++t) {
      std::vector<std::size_t> perm(types[t].node_count());
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      if (c > 0) rng.shuffle(perm);
      ds.graphs.push_back(types[t].permuted(perm).with_label(static_cast<int>(t % 2)));
    }
  }
  return ds;
}

}  // namespace wlticket::synthetic
