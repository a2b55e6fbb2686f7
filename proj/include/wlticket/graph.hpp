#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wlticket/errors.hpp"
#include "wlticket/tensor.hpp"

namespace wlticket {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected graph with one-hot node features and a class label. Immutable
/// after construction; the constructor validates every invariant.
class Graph {
 public:
  Graph(std::size_t node_count, const std::vector<Edge>& edges, Matrix features, int label)
      : n_(node_count), adjacency_(node_count * node_count, 0), neighbors_(node_count),
        features_(std::move(features)), label_(label) {
    if (n_ == 0) throw DataError("Graph: node_count must be >= 1");
    if (features_.rows() != n_) {
      throw DataError("Graph: feature rows (" + std::to_string(features_.rows()) +
                      ") != node_count (" + std::to_string(n_) + ")");
    }
    if (label_ < 0) throw DataError("Graph: negative label");
    for (auto [u, v] : edges) {
      if (u >= n_ || v >= n_) {
        throw DataError("Graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                        ") outside node range " + std::to_string(n_));
      }
      adjacency_[u * n_ + v] = 1;
      adjacency_[v * n_ + u] = 1;
    }
    for (std::size_t u = 0; u < n_; ++u) {
      for (std::size_t v = 0; v < n_; ++v) {
        if (adjacency_[u * n_ + v]) neighbors_[u].push_back(v);
      }
    }
    for (std::size_t v = 0; v < n_; ++v) {
      std::size_t ones = 0;
      for (double x : features_.row(v)) {
        if (x == 1.0) {
          ++ones;
        } else if (x != 0.0) {
          ones = 2;
          break;
        }
      }
      if (ones != 1) throw DataError("Graph: feature row " + std::to_string(v) + " is not one-hot");
    }
  }

  /// Builds the one-hot feature matrix from integer labels in [0, dim).
  static Graph from_labels(std::size_t node_count, const std::vector<Edge>& edges,
                           const std::vector<std::size_t>& node_labels, std::size_t dim,
                           int label) {
    if (node_labels.size() != node_count) throw DataError("Graph: node label count mismatch");
    Matrix x(node_count, dim);
    for (std::size_t v = 0; v < node_count; ++v) {
      if (node_labels[v] >= dim) throw DataError("Graph: node label exceeds feature dim");
      x(v, node_labels[v]) = 1.0;
    }
    return Graph(node_count, edges, std::move(x), label);
  }

  std::size_t node_count() const noexcept { return n_; }
  std::size_t feature_dim() const noexcept { return features_.cols(); }
  int label() const noexcept { return label_; }
  const Matrix& features() const noexcept { return features_; }
  bool adjacent(std::size_t u, std::size_t v) const noexcept { return adjacency_[u * n_ + v] != 0; }
  const std::vector<std::size_t>& neighbors(std::size_t v) const noexcept { return neighbors_[v]; }
  std::size_t degree(std::size_t v) const noexcept { return neighbors_[v].size(); }

  std::size_t edge_count() const noexcept {
    std::size_t twice = 0;
    for (const auto& nb : neighbors_) twice += nb.size();
    return twice / 2;
  }

  /// Each undirected edge once, u < v, lexicographic.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (std::size_t u = 0; u < n_; ++u)
      for (std::size_t v : neighbors_[u])
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  Matrix adjacency_matrix() const {
    Matrix a(n_, n_);
    for (std::size_t u = 0; u < n_; ++u)
      for (std::size_t v : neighbors_[u]) a(u, v) = 1.0;
    return a;
  }

  /// Argmax of each one-hot feature row.
  std::vector<std::size_t> node_labels() const {
    std::vector<std::size_t> out(n_);
    for (std::size_t v = 0; v < n_; ++v) {
      auto row = features_.row(v);
      out[v] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
  }

  /// Relabels nodes: node v of this graph becomes node perm[v].
  Graph permuted(const std::vector<std::size_t>& perm) const {
    if (perm.size() != n_) throw DomainError("Graph::permuted: permutation size mismatch");
    std::vector<Edge> e;
    for (auto [u, v] : edges()) e.emplace_back(perm[u], perm[v]);
    Matrix x(n_, feature_dim());
    for (std::size_t v = 0; v < n_; ++v)
      for (std::size_t j = 0; j < feature_dim(); ++j) x(perm[v], j) = features_(v, j);
    return Graph(n_, e, std::move(x), label_);
  }

  Graph with_label(int label) const { return Graph(n_, edges(), features_, label); }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.label_ == b.label_ && a.adjacency_ == b.adjacency_ &&
           a.features_ == b.features_;
  }

 private:
  std::size_t n_;
  std::vector<std::uint8_t> adjacency_;
  std::vector<std::vector<std::size_t>> neighbors_;
  Matrix features_;
  int label_;
};

/// Finite ordered sequence of graphs sharing a feature dimension.
struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;

  std::size_t size() const noexcept { return graphs.size(); }
  bool empty() const noexcept { return graphs.empty(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;

  void validate() const {
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const auto& g = graphs[i];
      if (g.feature_dim() != feature_dim) {
        throw DataError(name + ": graph " + std::to_string(i) + " has feature dim " +
                        std::to_string(g.feature_dim()) + ", expected " +
                        std::to_string(feature_dim));
      }
      if (static_cast<std::size_t>(g.label()) >= num_classes) {
        throw DataError(name + ": graph " + std::to_string(i) + " label out of range");
      }
    }
  }

  /// Stricter check used before experiments: every graph has at least one edge.
  void validate_nontrivial() const {
    validate();
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      if (graphs[i].edge_count() == 0) {
        throw DataError(name + ": graph " + std::to_string(i) + " has no edges");
      }
    }
  }

  double mean_node_count() const {
    if (graphs.empty()) return 0.0;
    double s = 0.0;
    for (const auto& g : graphs) s += static_cast<double>(g.node_count());
    return s / static_cast<double>(graphs.size());
  }

  std::size_t max_node_count() const {
    std::size_t m = 0;
    for (const auto& g : graphs) m = std::max(m, g.node_count());
    return m;
  }

  Dataset subset(const std::vector<std::size_t>& indices, std::string new_name = {}) const {
    Dataset out{new_name.empty() ? name : std::move(new_name), {}, num_classes, feature_dim};
    out.graphs.reserve(indices.size());
    for (std::size_t i : indices) out.graphs.push_back(graphs.at(i));
    return out;
  }
};

// Small fixture builders with uniform labels (feature dim 1 unless stated).
namespace fixtures {

inline std::vector<std::size_t> uniform_labels(std::size_t n) { return std::vector<std::size_t>(n, 0); }

inline Graph cycle(std::size_t n, int label = 0) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return Graph::from_labels(n, e, uniform_labels(n), 1, label);
}

inline Graph path(std::size_t n, int label = 0) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Graph::from_labels(n, e, uniform_labels(n), 1, label);
}

/// Star with `leaves` leaves around node 0.
inline Graph star(std::size_t leaves, int label = 0) {
  std::vector<Edge> e;
  for (std::size_t i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return Graph::from_labels(leaves + 1, e, uniform_labels(leaves + 1), 1, label);
}

inline Graph triangle(int label = 0) { return cycle(3, label); }

/// Two disjoint triangles.
inline Graph two_triangles(int label = 0) {
  std::vector<Edge> e{{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}};
  return Graph::from_labels(6, e, uniform_labels(6), 1, label);
}

}  // namespace fixtures

}  // namespace wlticket
