#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "wlticket/errors.hpp"

namespace wlticket {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// A parameter block with its gradient. An empty mask means unmasked; where
/// the mask is 0 the parameter is held at exactly 0.
struct ParamSlot {
  std::span<double> value;
  std::span<const double> grad;
  std::span<const double> mask;
};

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t t = 0;
};

inline void adam_step(std::span<const ParamSlot> slots, AdamState& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const auto& s : slots) {
      state.m.emplace_back(s.value.size(), 0.0);
      state.v.emplace_back(s.value.size(), 0.0);
    }
  }
  if (state.m.size() != slots.size()) throw DomainError("adam_step: slot count changed");
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const auto& slot = slots[s];
    auto& m = state.m[s];
    auto& v = state.v[s];
    if (slot.grad.size() != slot.value.size() || m.size() != slot.value.size() ||
        (!slot.mask.empty() && slot.mask.size() != slot.value.size())) {
      throw DomainError("adam_step: shape mismatch");
    }
    for (std::size_t i = 0; i < slot.value.size(); ++i) {
      if (!slot.mask.empty() && slot.mask[i] == 0.0) {
        slot.value[i] = 0.0;
        continue;
      }
      const double g = slot.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      slot.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace wlticket
