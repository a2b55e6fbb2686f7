#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "wlticket/errors.hpp"
#include "wlticket/gnn.hpp"
#include "wlticket/tensor.hpp"
#include "wlticket/tolerance.hpp"

namespace wlticket {

/// A probability bound as computed (may be negative) and clamped to [0, 1].
struct BoundValue {
  double raw = 0.0;
  double clamped = 0.0;
};

inline double clamp01(double x) noexcept { return std::clamp(x, 0.0, 1.0); }

inline double pairs_of(double n) noexcept { return n * (n - 1.0) / 2.0; }

namespace bounds_detail {
inline void check_rho(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("rho must be in (0, 1)");
}
}  // namespace bounds_detail

/// Lower bound on the probability that a randomly pruned layer stays
/// injective on N inputs: 1 - C(N,2) rho^(k m).
inline BoundValue injectivity_bound(std::size_t n_inputs, double rho, std::size_t k, std::size_t m) {
  bounds_detail::check_rho(rho);
  if (n_inputs < 2) throw DomainError("injectivity_bound: N must be >= 2");
  if (k < 1 || m < 1) throw DomainError("injectivity_bound: k and m must be >= 1");
  const double raw = 1.0 - pairs_of(static_cast<double>(n_inputs)) * std::pow(rho, static_cast<double>(k * m));
  return {raw, clamp01(raw)};
}

/// gamma^L for an L-layer MLP; the clamped value uses the clamped base.
inline BoundValue mlp_bound(BoundValue layer, std::size_t depth) {
  if (depth < 1) throw DomainError("mlp_bound: L must be >= 1");
  const auto l = static_cast<double>(depth);
  return {std::pow(layer.raw, l), std::pow(clamp01(layer.raw), l)};
}

struct GnnBound {
  double base_raw = 0.0;  // 1 - C(|D| N, 2) rho^(k m_min)
  BoundValue value;       // base^(L M)
};

inline GnnBound gnn_bound(std::size_t dataset_size, std::size_t max_nodes, double rho, std::size_t k,
                          std::size_t m_min, std::size_t mlp_depth, std::size_t mp_layers) {
  bounds_detail::check_rho(rho);
  if (dataset_size < 1 || max_nodes < 1 || k < 1 || m_min < 1 || mlp_depth < 1 || mp_layers < 1)
    throw DomainError("gnn_bound: all counts must be >= 1");
  const double total = static_cast<double>(dataset_size) * static_cast<double>(max_nodes);
  GnnBound out;
  out.base_raw = 1.0 - pairs_of(total) * std::pow(rho, static_cast<double>(k * m_min));
  const auto e = static_cast<double>(mlp_depth * mp_layers);
  out.value = {std::pow(out.base_raw, e), std::pow(clamp01(out.base_raw), e)};
  return out;
}

/// Smallest integer m >= 1 with m >= log_rho((1 - gamma) / C(N,2)) / k.
inline std::size_t required_width(double gamma, std::size_t n_inputs, std::size_t k, double rho) {
  bounds_detail::check_rho(rho);
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("required_width: gamma must be in (0, 1)");
  if (n_inputs < 2) throw DomainError("required_width: N must be >= 2");
  if (k < 1) throw DomainError("required_width: k must be >= 1");
  const double x = std::log((1.0 - gamma) / pairs_of(static_cast<double>(n_inputs))) / std::log(rho) /
                   static_cast<double>(k);
  const double m = std::ceil(x - 1e-9);
  return m < 1.0 ? 1 : static_cast<std::size_t>(m);
}

/// Maximum accuracy under a uniform class distribution when U of I
/// isomorphism types collapse: 1 - (1 - 1/C) U / I.
inline double accuracy_ceiling(std::size_t classes, std::size_t collapsed, std::size_t types) {
  if (classes < 1) throw DomainError("accuracy_ceiling: C must be >= 1");
  if (types < 1) throw DomainError("accuracy_ceiling: I must be >= 1");
  if (collapsed > types) throw DomainError("accuracy_ceiling: U must be <= I");
  return 1.0 - (1.0 - 1.0 / static_cast<double>(classes)) * static_cast<double>(collapsed) /
                   static_cast<double>(types);
}

struct InjectivityTrialResult {
  std::size_t trials = 0;
  std::size_t injective = 0;
  double rate = 0.0;
  BoundValue gamma;
  double sigma = 0.0;  // binomial standard error at the clamped gamma

  bool consistent(double n_sigma = 3.0) const { return rate >= gamma.raw - n_sigma * sigma; }
};

/// Sampling check of the single-layer bound. Each trial draws N inputs of
/// dimension n = (N - 1) k: x_0 uniform on (-1, 1)^n and x_i equal to x_0
/// except on its own block of k coordinates, so the minimum support of any
/// pairwise difference is exactly k. W (n x m) is uniform on (-1, 1), pruned
/// by an independent Bernoulli(rho) mask, and the layer x -> act(x W') must
/// map the inputs to pairwise distinguishable outputs.
inline InjectivityTrialResult injectivity_monte_carlo(std::size_t n_inputs, double rho, std::size_t k,
                                                      std::size_t m, std::size_t trials, const Rng& rng,
                                                      Activation act = Activation::softsign) {
  InjectivityTrialResult out;
  out.gamma = injectivity_bound(n_inputs, rho, k, m);
  if (trials == 0) throw DomainError("injectivity_monte_carlo: trials must be >= 1");
  const std::size_t n = (n_inputs - 1) * k;
  std::vector<std::vector<double>> xs(n_inputs, std::vector<double>(n));
  Matrix w(n, m);
  Matrix mask(n, m);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng r = rng.split(t);
    for (double& v : xs[0]) v = r.uniform(-1.0, 1.0);
    for (std::size_t i = 1; i < n_inputs; ++i) {
      xs[i] = xs[0];
      for (std::size_t c = (i - 1) * k; c < i * k; ++c) {
        double v = r.uniform(-1.0, 1.0);
        while (v == xs[0][c]) v = r.uniform(-1.0, 1.0);
        xs[i][c] = v;
      }
    }
    for (double& v : w.values()) v = r.uniform(-1.0, 1.0);
    for (double& v : mask.values()) v = r.bernoulli(rho) ? 0.0 : 1.0;
    const Matrix wp = hadamard(w, mask);
    std::vector<std::vector<double>> ys;
    bool injective = true;
    for (const auto& x : xs) {
      std::vector<double> y(m, 0.0);
      for (std::size_t o = 0; o < m; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i] * wp(i, o);
        y[o] = activate(act, s);
      }
      for (const auto& prev : ys)
        if (indistinguishable(prev, y)) injective = false;
      ys.push_back(std::move(y));
    }
    out.injective += injective;
  }
  out.trials = trials;
  out.rate = static_cast<double>(out.injective) / static_cast<double>(trials);
  const double p = out.gamma.clamped;
  out.sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  return out;
}

}  // namespace wlticket
