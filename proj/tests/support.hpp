#pragma once

// Independent oracles and fixture generators shared by the unit tests and the
// acceptance binary. Nothing here calls into the code under test beyond
// constructing inputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "wlticket/gnn.hpp"
#include "wlticket/graph.hpp"
#include "wlticket/tensor.hpp"

namespace wlticket::testing {

inline std::filesystem::path data_dir() { return WLTICKET_DATA_DIR; }

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("wlticket_" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Triple-loop product.
inline std::vector<std::vector<double>> naive_matmul(const Matrix& a, const Matrix& b) {
  std::vector<std::vector<double>> out(a.rows(), std::vector<double>(b.cols(), 0.0));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) out[i][j] += a(i, k) * b(k, j);
  return out;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& x : m.values()) x = rng.uniform(lo, hi);
  return m;
}

/// G(n, p) with node labels drawn from [0, dim); not necessarily connected.
inline Graph random_graph(std::size_t n, double p, std::size_t dim, Rng& rng, int label = 0) {
  std::vector<Edge> e;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.uniform01() < p) e.emplace_back(u, v);
  std::vector<std::size_t> l(n);
  for (auto& x : l) x = static_cast<std::size_t>(rng.uniform_index(dim));
  return Graph::from_labels(n, e, l, dim, label);
}

inline std::size_t label_of(const Graph& g, std::size_t v) {
  const auto row = g.features().row(v);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

/// Isomorphism by trying every permutation.
inline bool brute_force_isomorphic(const Graph& a, const Graph& b, bool labeled) {
  const std::size_t n = a.node_count();
  if (n != b.node_count() || a.edge_count() != b.edge_count()) return false;
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  do {
    bool ok = true;
    for (std::size_t u = 0; u < n && ok; ++u) {
      if (labeled && label_of(a, u) != label_of(b, p[u])) ok = false;
      for (std::size_t v = 0; v < n && ok; ++v)
        if (a.adjacent(u, v) != b.adjacent(p[u], p[v])) ok = false;
    }
    if (ok) return true;
  } while (std::next_permutation(p.begin(), p.end()));
  return false;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  bool masked_zero = true;  // every pruned coordinate had an exactly-zero gradient
};

/// Central differences over every unpruned weight, each trainable epsilon,
/// the classifier and the bias.
inline GradCheck finite_difference_check(GnnModel model, const Graph& g, int target, double h = 1e-5) {
  const Gradients grads = model.backward(model.forward(g), target);
  GradCheck out;
  auto probe = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = model.loss(g, target);
    param = keep - h;
    const double down = model.loss(g, target);
    param = keep;
    out.max_rel_err = std::max(out.max_rel_err, rel_err(analytic, (up - down) / (2 * h)));
    ++out.checked;
  };
  for (std::size_t k = 0; k < model.layers().size(); ++k) {
    auto& layer = model.layers_mut()[k];
    for (std::size_t j = 0; j < layer.mlp.size(); ++j) {
      Matrix& w = layer.mlp[j].weights_mut();
      const Matrix& mask = layer.mlp[j].mask();
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (mask.values()[i] == 0.0) {
          out.masked_zero = out.masked_zero && grads.weights[k][j].values()[i] == 0.0;
          continue;
        }
        probe(w.values()[i], grads.weights[k][j].values()[i]);
      }
    }
    if (layer.train_epsilon) probe(layer.epsilon, grads.epsilon[k]);
  }
  for (std::size_t i = 0; i < model.classifier().size(); ++i)
    probe(model.classifier_mut().values()[i], grads.classifier.values()[i]);
  for (std::size_t i = 0; i < model.bias().size(); ++i) probe(model.bias_mut().values()[i], grads.bias.values()[i]);
  return out;
}

/// Smallest |z| over pre-activations whose column is not fully masked; a kink
/// of relu/leaky relu closer than the difference step would spoil the check.
inline double min_live_preactivation(const GnnModel& model, const Graph& g) {
  const ForwardPass fp = model.forward(g);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < fp.layers.size(); ++k) {
    for (std::size_t j = 0; j < fp.layers[k].mlp.size(); ++j) {
      const Matrix& z = fp.layers[k].mlp[j].z;
      const Matrix& mask = model.layers()[k].mlp[j].mask();
      for (std::size_t c = 0; c < z.cols(); ++c) {
        bool live = false;
        for (std::size_t r = 0; r < mask.rows(); ++r) live = live || mask(r, c) != 0.0;
        if (!live) continue;
        for (std::size_t r = 0; r < z.rows(); ++r) best = std::min(best, std::abs(z(r, c)));
      }
    }
  }
  return best;
}

}  // namespace wlticket::testing
