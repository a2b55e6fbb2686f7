#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wlticket/bounds.hpp"
#include "wlticket/errors.hpp"
#include "wlticket/gnn.hpp"
#include "wlticket/graph.hpp"
#include "wlticket/pruning.hpp"
#include "wlticket/tensor.hpp"
#include "wlticket/tolerance.hpp"
#include "wlticket/wl.hpp"

namespace wlticket {

// ---------------------------------------------------------------------------
// Expressivity (tau).

struct TauOptions {
  ToleranceMode mode = ToleranceMode::relative;
  bool node_multiset = false;  // compare sorted node embeddings instead of sums (non-canonical)
};

struct ExpressivityReport {
  double tau = 1.0;
  std::vector<std::size_t> representatives;
  std::vector<std::pair<std::size_t, std::size_t>> indistinguishable_pairs;  // dataset indices
  std::size_t distinguishable = 0;
  double tolerance = kFloat32Eps;
  ToleranceMode mode = ToleranceMode::relative;
  bool node_multiset = false;
  bool degenerate = false;
};

/// Final MP layer node embeddings, H^(K).
inline Matrix final_embeddings(const GnnModel& model, const Graph& g) { return model.forward(g).h.back(); }

inline std::vector<double> graph_sum(const Matrix& h) {
  const Matrix s = column_sums(h);
  return {s.values().begin(), s.values().end()};
}

namespace expressivity_detail {
inline bool multiset_indistinguishable(const Matrix& a, const Matrix& b, ToleranceMode mode) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  auto rows = [](const Matrix& m) {
    std::vector<std::vector<double>> r;
    for (std::size_t v = 0; v < m.rows(); ++v) r.emplace_back(m.row(v).begin(), m.row(v).end());
    std::sort(r.begin(), r.end());
    return r;
  };
  const auto ra = rows(a);
  const auto rb = rows(b);
  for (std::size_t i = 0; i < ra.size(); ++i)
    if (!indistinguishable(ra[i], rb[i], mode)) return false;
  return true;
}

/// Pairwise indistinguishability among the given graphs' final embeddings.
inline std::vector<std::pair<std::size_t, std::size_t>> collisions(const GnnModel& model, const Dataset& ds,
                                                                   std::span<const std::size_t> idx,
                                                                   const TauOptions& opt) {
  std::vector<Matrix> h;
  std::vector<std::vector<double>> sums;
  for (std::size_t i : idx) {
    h.push_back(final_embeddings(model, ds.graphs.at(i)));
    sums.push_back(graph_sum(h.back()));
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const bool same = opt.node_multiset ? multiset_indistinguishable(h[a], h[b], opt.mode)
                                          : indistinguishable(sums[a], sums[b], opt.mode);
      if (same) out.emplace_back(idx[a], idx[b]);
    }
  }
  return out;
}
}  // namespace expressivity_detail

/// Fraction of representatives whose final-layer graph sum is distinguishable
/// from every other representative's.
inline ExpressivityReport measure_tau(const GnnModel& model, const Dataset& ds,
                                      std::span<const std::size_t> representatives, const TauOptions& opt = {}) {
  ExpressivityReport r;
  r.representatives.assign(representatives.begin(), representatives.end());
  r.mode = opt.mode;
  r.node_multiset = opt.node_multiset;
  if (representatives.size() < 2) {
    r.degenerate = true;
    r.tau = 1.0;
    r.distinguishable = representatives.size();
    return r;
  }
  r.indistinguishable_pairs = expressivity_detail::collisions(model, ds, representatives, opt);
  std::vector<std::size_t> hit;
  for (auto [a, b] : r.indistinguishable_pairs) {
    hit.push_back(a);
    hit.push_back(b);
  }
  std::sort(hit.begin(), hit.end());
  hit.erase(std::unique(hit.begin(), hit.end()), hit.end());
  r.distinguishable = representatives.size() - hit.size();
  r.tau = static_cast<double>(r.distinguishable) / static_cast<double>(representatives.size());
  return r;
}

struct Criterion1Report {
  std::vector<std::pair<std::size_t, std::size_t>> violations;
  std::size_t pairs_checked = 0;  // different-class, WL-distinguishable pairs
  std::size_t wl_iterations = 0;
};

/// Pairs of representatives with different labels that 1-WL separates within
/// as many iterations as the model has MP layers, yet whose final-layer
/// embeddings are indistinguishable.
inline Criterion1Report criterion1_check(const GnnModel& model, const Dataset& ds,
                                         std::span<const std::size_t> representatives, const TauOptions& opt = {}) {
  Criterion1Report r;
  r.wl_iterations = model.layers().size();
  std::vector<std::size_t> idx(representatives.begin(), representatives.end());
  const auto coll = expressivity_detail::collisions(model, ds, idx, opt);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const Graph& ga = ds.graphs.at(idx[a]);
      const Graph& gb = ds.graphs.at(idx[b]);
      if (ga.label() == gb.label()) continue;
      if (!wl_distinguishable(ga, gb, r.wl_iterations, true)) continue;
      ++r.pairs_checked;
      if (std::find(coll.begin(), coll.end(), std::make_pair(idx[a], idx[b])) != coll.end())
        r.violations.emplace_back(idx[a], idx[b]);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Gradient diversity.

/// sum_i |G_i|_F^2 / |sum_i G_i|_F^2. Returns +inf when the gradients cancel
/// exactly but are not all zero.
inline double gradient_diversity(std::span<const Matrix> grads) {
  if (grads.empty()) throw DomainError("gradient_diversity: no gradients");
  double num = 0.0;
  Matrix sum(grads.front().rows(), grads.front().cols(), 0.0);
  for (const auto& g : grads) {
    num += frobenius_inner(g, g);
    add_in_place(sum, g);
  }
  const double den = frobenius_inner(sum, sum);
  if (den == 0.0) {
    if (num == 0.0) throw DomainError("gradient_diversity: all gradients are zero");
    return std::numeric_limits<double>::infinity();
  }
  return num / den;
}

/// Diversity of one MLP weight across per-example gradients.
inline double gradient_diversity(std::span<const Gradients> grads, std::size_t mp, std::size_t mlp) {
  std::vector<Matrix> g;
  for (const auto& gr : grads) g.push_back(gr.weights.at(mp).at(mlp));
  return gradient_diversity(g);
}

/// Two-graph bound on the diversity of a first-MLP-layer gradient
/// G_i = H_i^T A_i^T dZ_i. The cross term obeys
///   |<G_1, G_2>| <= B = M sqrt(sum cos^2 beta_ij) |A_2^T dZ_2 dZ_1^T A_1|_F
/// with M the largest squared row norm over both H. Since
/// Delta_s = S / (S + 2 <G_1, G_2>), zeta_pm = S / (S +- 2B); the interval is
/// [zeta_+, zeta_-] when S > 2B and [zeta_+, inf) otherwise. The "literal"
/// fields use B in place of 2B.
struct ZetaReport {
  double s = 0.0;            // |G_1|^2 + |G_2|^2
  double cross = 0.0;        // <G_1, G_2>
  double cross_bound = 0.0;  // B
  double m_min = 0.0;        // smallest squared row norm kept
  double m_max = 0.0;        // M
  double cos2_sum = 0.0;
  double abs_cos_sum = 0.0;
  std::size_t excluded_rows = 0;
  double delta_s = 0.0;
  double zeta_plus = 0.0;
  double zeta_minus = std::numeric_limits<double>::infinity();
  bool unbounded = true;
  bool contains = false;
  double literal_zeta_plus = 0.0;
  double literal_zeta_minus = std::numeric_limits<double>::infinity();
  bool literal_contains = false;
};

inline ZetaReport gdiv_lower_bound(const Matrix& h1, const Matrix& h2, const Matrix& agg1, const Matrix& agg2,
                                   const Matrix& dz1, const Matrix& dz2, double row_tol = 0.0) {
  if (h1.cols() != h2.cols() || dz1.cols() != dz2.cols()) throw DomainError("gdiv_lower_bound: width mismatch");
  ZetaReport r;
  const Matrix g1 = matmul_tn(matmul(agg1, h1), dz1);
  const Matrix g2 = matmul_tn(matmul(agg2, h2), dz2);
  r.s = frobenius_inner(g1, g1) + frobenius_inner(g2, g2);
  if (r.s == 0.0) throw DomainError("gdiv_lower_bound: both gradients are zero");
  r.cross = frobenius_inner(g1, g2);
  r.delta_s = gradient_diversity(std::vector<Matrix>{g1, g2});

  auto kept_rows = [&](const Matrix& h) {
    std::vector<std::pair<std::span<const double>, double>> rows;
    for (std::size_t v = 0; v < h.rows(); ++v) {
      double n2 = 0.0;
      for (double x : h.row(v)) n2 += x * x;
      if (std::sqrt(n2) <= row_tol) {
        ++r.excluded_rows;
        continue;
      }
      rows.emplace_back(h.row(v), n2);
    }
    return rows;
  };
  const auto a = kept_rows(h1);
  const auto b = kept_rows(h2);
  if (a.empty() || b.empty()) throw DomainError("gdiv_lower_bound: all rows excluded");
  r.m_min = std::numeric_limits<double>::infinity();
  for (const auto* side : {&a, &b})
    for (const auto& [row, n2] : *side) {
      r.m_max = std::max(r.m_max, n2);
      r.m_min = std::min(r.m_min, n2);
    }
  for (const auto& [ra, na] : a) {
    for (const auto& [rb, nb] : b) {
      double dot = 0.0;
      for (std::size_t c = 0; c < ra.size(); ++c) dot += ra[c] * rb[c];
      const double cosb = dot / std::sqrt(na * nb);
      r.cos2_sum += cosb * cosb;
      r.abs_cos_sum += std::abs(cosb);
    }
  }
  const Matrix tail = matmul(matmul_nt(matmul_tn(agg2, dz2), dz1), agg1);
  r.cross_bound = r.m_max * std::sqrt(r.cos2_sum) * frobenius_norm(tail);

  constexpr double kSlack = 1e-12;
  auto interval = [&](double bnd, double& lo, double& hi) {
    lo = r.s / (r.s + bnd);
    if (r.s > bnd) {
      hi = r.s / (r.s - bnd);
      return r.delta_s >= lo * (1 - kSlack) && r.delta_s <= hi * (1 + kSlack);
    }
    hi = std::numeric_limits<double>::infinity();
    return r.delta_s >= lo * (1 - kSlack);
  };
  r.contains = interval(2.0 * r.cross_bound, r.zeta_plus, r.zeta_minus);
  r.unbounded = std::isinf(r.zeta_minus);
  r.literal_contains = interval(r.cross_bound, r.literal_zeta_plus, r.literal_zeta_minus);
  return r;
}

/// The bound for MP layer `mp` of a model on two labeled graphs.
inline ZetaReport gdiv_lower_bound(const GnnModel& model, const Graph& g1, const Graph& g2, std::size_t mp = 0,
                                   double row_tol = 0.0) {
  const auto f1 = model.forward(g1);
  const auto f2 = model.forward(g2);
  const auto b1 = model.backward(f1, static_cast<std::size_t>(g1.label()));
  const auto b2 = model.backward(f2, static_cast<std::size_t>(g2.label()));
  return gdiv_lower_bound(f1.h.at(mp), f2.h.at(mp), f1.layers.at(mp).agg, f2.layers.at(mp).agg, b1.first_dz.at(mp),
                          b2.first_dz.at(mp), row_tol);
}

// ---------------------------------------------------------------------------
// Non-colinearity of node embeddings.

struct ColinearityCount {
  std::size_t pairs = 0;
  std::size_t colinear = 0;
};

/// One node per WL color (iteration K = number of MP layers, refined jointly
/// over the dataset); counts pairs of final-layer embeddings whose angle is
/// within `angle_tol` of 0 or pi. Zero vectors count as colinear.
inline ColinearityCount colinear_pairs(const GnnModel& model, const Dataset& ds, double angle_tol = 1e-6) {
  const std::size_t depth = model.layers().size();
  std::vector<const Graph*> ptrs;
  for (const auto& g : ds.graphs) ptrs.push_back(&g);
  const auto jc = joint_refine(ptrs, depth, true);
  std::vector<std::pair<std::size_t, std::size_t>> reps;  // (graph, node)
  std::vector<std::size_t> seen;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& colors = jc.graphs[i].history.at(std::min(depth, jc.graphs[i].history.size() - 1));
    for (std::size_t v = 0; v < colors.size(); ++v) {
      if (std::find(seen.begin(), seen.end(), colors[v]) != seen.end()) continue;
      seen.push_back(colors[v]);
      reps.emplace_back(i, v);
    }
  }
  std::vector<Matrix> h;
  for (const auto& g : ds.graphs) h.push_back(final_embeddings(model, g));
  const double cos_tol = std::cos(angle_tol);
  ColinearityCount c;
  for (std::size_t x = 0; x < reps.size(); ++x) {
    for (std::size_t y = x + 1; y < reps.size(); ++y) {
      const auto a = h[reps[x].first].row(reps[x].second);
      const auto b = h[reps[y].first].row(reps[y].second);
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
      }
      ++c.pairs;
      if (na == 0.0 || nb == 0.0 || std::abs(dot) / std::sqrt(na * nb) >= cos_tol) ++c.colinear;
    }
  }
  return c;
}

struct NoncolinearityConfig {
  std::size_t width = 0;
  std::size_t mp_layers = 2;
  std::size_t mlp_depth = 2;
  Variant variant = Variant::gin;
  Activation activation = Activation::softsign;
  double rho = 0.5;
  std::size_t trials = 1000;
  double angle_tol = 1e-6;
  double gamma = 0.999;
};

struct NoncolinearityReport {
  std::size_t trials = 0;
  std::size_t pairs = 0;
  std::size_t colinear = 0;
  double rate = 0.0;
  std::size_t width = 0;
  std::size_t realized_n = 0;  // distinct first-layer inputs
  std::size_t realized_k = 0;  // min support of their pairwise differences
  std::size_t required_width = 1;
  bool underparameterized = false;
};

/// Distinct first-layer aggregates over the dataset and the minimum number of
/// nonzero components in their pairwise differences.
inline std::pair<std::size_t, std::size_t> realized_input_stats(const Dataset& ds, Variant variant, double epsilon = 0.0) {
  std::vector<std::vector<double>> rows;
  for (const auto& g : ds.graphs) {
    const Matrix u = matmul(aggregation_matrix(g, variant, epsilon), g.features());
    for (std::size_t v = 0; v < u.rows(); ++v) rows.emplace_back(u.row(v).begin(), u.row(v).end());
  }
  const auto d = distinct_rows(rows);
  std::size_t k = std::numeric_limits<std::size_t>::max();
  for (std::size_t a = 0; a < d.size(); ++a) {
    for (std::size_t b = a + 1; b < d.size(); ++b) {
      std::size_t nz = 0;
      for (std::size_t c = 0; c < d[a].size(); ++c) nz += std::abs(d[a][c] - d[b][c]) > kFloat32Eps;
      k = std::min(k, std::max<std::size_t>(nz, 1));
    }
  }
  return {d.size(), d.size() < 2 ? 1 : k};
}

/// Colinear-pair rate over random (init, Bernoulli mask) draws.
inline NoncolinearityReport noncolinearity_check(const Dataset& ds, const NoncolinearityConfig& cfg, const Rng& rng) {
  if (cfg.width == 0) throw DomainError("noncolinearity_check: width must be >= 1");
  if (ds.empty()) throw DomainError("noncolinearity_check: empty dataset");
  NoncolinearityReport r;
  r.width = cfg.width;
  std::tie(r.realized_n, r.realized_k) = realized_input_stats(ds, cfg.variant);
  if (r.realized_n >= 2 && cfg.rho > 0.0)
    r.required_width = required_width(cfg.gamma, r.realized_n, r.realized_k, cfg.rho);
  r.underparameterized = cfg.width < r.required_width;

  ModelSpec spec;
  spec.input_dim = ds.feature_dim;
  spec.num_classes = std::max<std::size_t>(ds.num_classes, 1);
  spec.mp_layers = cfg.mp_layers;
  spec.mlp_depth = cfg.mlp_depth;
  spec.hidden = cfg.width;
  spec.variant = cfg.variant;
  spec.activation = cfg.activation;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    GnnModel m = GnnModel::init(spec, rng.split(2 * t));
    if (cfg.rho > 0.0) m = m.with_masks(random_mask(spec.mask_shape(), cfg.rho, rng.split(2 * t + 1)));
    const auto c = colinear_pairs(m, ds, cfg.angle_tol);
    r.pairs += c.pairs;
    r.colinear += c.colinear;
  }
  r.trials = cfg.trials;
  r.rate = r.pairs == 0 ? 0.0 : static_cast<double>(r.colinear) / static_cast<double>(r.pairs);
  return r;
}

// ---------------------------------------------------------------------------
// JSON reports. Keys are stable within a schema version.

inline constexpr int kReportSchemaVersion = 1;

inline nlohmann::json to_json(const ExpressivityReport& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (auto [a, b] : r.indistinguishable_pairs) pairs.push_back({a, b});
  return {{"schema", "wlticket.tau"},
          {"version", kReportSchemaVersion},
          {"tau", r.tau},
          {"representatives", r.representatives},
          {"distinguishable", r.distinguishable},
          {"indistinguishable_pairs", std::move(pairs)},
          {"tolerance", r.tolerance},
          {"tolerance_mode", std::string(to_string(r.mode))},
          {"node_multiset", r.node_multiset},
          {"degenerate", r.degenerate}};
}

struct BoundInputs {
  std::size_t n_inputs = 2;
  double rho = 0.5;
  std::size_t k = 1;
  std::size_t m = 1;
  std::size_t mlp_depth = 2;
  std::size_t mp_layers = 2;
  std::size_t dataset_size = 0;  // 0 skips the GNN bound
  std::size_t max_nodes = 0;
  std::optional<double> gamma_target;  // for the width requirement
  std::size_t classes = 0;             // 0 skips the accuracy ceiling
  std::size_t collapsed = 0;
  std::size_t types = 0;
};

struct BoundReport {
  BoundInputs inputs;
  BoundValue gamma;
  BoundValue gamma_mlp;
  std::optional<GnnBound> gamma_gnn;
  std::optional<std::size_t> m_min;
  std::optional<double> accuracy_ceiling;
};

inline BoundReport compute_bounds(const BoundInputs& in) {
  BoundReport r;
  r.inputs = in;
  r.gamma = injectivity_bound(in.n_inputs, in.rho, in.k, in.m);
  r.gamma_mlp = mlp_bound(r.gamma, in.mlp_depth);
  if (in.dataset_size > 0)
    r.gamma_gnn = gnn_bound(in.dataset_size, in.max_nodes, in.rho, in.k, in.m, in.mlp_depth, in.mp_layers);
  if (in.gamma_target) r.m_min = required_width(*in.gamma_target, in.n_inputs, in.k, in.rho);
  if (in.classes > 0) r.accuracy_ceiling = accuracy_ceiling(in.classes, in.collapsed, in.types);
  return r;
}

inline nlohmann::json to_json(const BoundReport& r) {
  const auto& in = r.inputs;
  nlohmann::json j = {{"schema", "wlticket.bounds"},
                      {"version", kReportSchemaVersion},
                      {"inputs",
                       {{"N", in.n_inputs},
                        {"rho", in.rho},
                        {"k", in.k},
                        {"m", in.m},
                        {"L", in.mlp_depth},
                        {"M_layers", in.mp_layers},
                        {"dataset_size", in.dataset_size},
                        {"max_nodes", in.max_nodes}}},
                      {"gamma", {{"raw", r.gamma.raw}, {"clamped", r.gamma.clamped}}},
                      {"gamma_L", {{"raw", r.gamma_mlp.raw}, {"clamped", r.gamma_mlp.clamped}}}};
  j["gamma_gnn"] = r.gamma_gnn ? nlohmann::json{{"base_raw", r.gamma_gnn->base_raw},
                                                {"raw", r.gamma_gnn->value.raw},
                                                {"clamped", r.gamma_gnn->value.clamped}}
                               : nlohmann::json(nullptr);
  if (in.gamma_target) j["inputs"]["gamma_target"] = *in.gamma_target;
  j["m_min"] = r.m_min ? nlohmann::json(*r.m_min) : nlohmann::json(nullptr);
  if (in.classes > 0) {
    j["inputs"]["C"] = in.classes;
    j["inputs"]["U"] = in.collapsed;
    j["inputs"]["I"] = in.types;
  }
  j["accuracy_ceiling"] = r.accuracy_ceiling ? nlohmann::json(*r.accuracy_ceiling) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const ZetaReport& r) {
  auto num = [](double v) { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); };
  return {{"schema", "wlticket.zeta"},
          {"version", kReportSchemaVersion},
          {"S", r.s},
          {"cross", r.cross},
          {"cross_bound", r.cross_bound},
          {"m", r.m_min},
          {"M", r.m_max},
          {"cos2_sum", r.cos2_sum},
          {"abs_cos_sum", r.abs_cos_sum},
          {"excluded_rows", r.excluded_rows},
          {"delta_s", num(r.delta_s)},
          {"zeta_plus", r.zeta_plus},
          {"zeta_minus", num(r.zeta_minus)},
          {"contains", r.contains},
          {"literal_zeta_plus", r.literal_zeta_plus},
          {"literal_zeta_minus", num(r.literal_zeta_minus)},
          {"literal_contains", r.literal_contains}};
}

}  // namespace wlticket
