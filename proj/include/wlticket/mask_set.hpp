#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "wlticket/errors.hpp"
#include "wlticket/tensor.hpp"

namespace wlticket {

/// Shape of every maskable weight: [mp layer][mlp layer] -> (rows, cols).
using MaskShape = std::vector<std::vector<std::pair<std::size_t, std::size_t>>>;

/// Binary masks for every MLP weight matrix of every message-passing layer.
struct MaskSet {
  std::vector<std::vector<Matrix>> layers;

  static MaskSet ones(const MaskShape& shape) {
    MaskSet m;
    for (const auto& mp : shape) {
      auto& dst = m.layers.emplace_back();
      for (auto [r, c] : mp) dst.emplace_back(r, c, 1.0);
    }
    return m;
  }

  MaskShape shape() const {
    MaskShape s;
    for (const auto& mp : layers) {
      auto& dst = s.emplace_back();
      for (const auto& m : mp) dst.emplace_back(m.rows(), m.cols());
    }
    return s;
  }

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& mp : layers)
      for (const auto& m : mp) t += m.size();
    return t;
  }

  std::size_t zeros() const {
    std::size_t z = 0;
    for (const auto& mp : layers)
      for (const auto& m : mp)
        for (double v : m.values()) z += (v == 0.0);
    return z;
  }

  /// Realized fraction of pruned coordinates.
  double sparsity() const {
    const std::size_t t = total();
    return t == 0 ? 0.0 : static_cast<double>(zeros()) / static_cast<double>(t);
  }

  static double sparsity_of(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    std::size_t z = 0;
    for (double v : m.values()) z += (v == 0.0);
    return static_cast<double>(z) / static_cast<double>(m.size());
  }

  void require_binary() const {
    for (const auto& mp : layers)
      for (const auto& m : mp)
        for (double v : m.values())
          if (v != 0.0 && v != 1.0) throw DomainError("MaskSet: mask entries must be 0 or 1");
  }

  friend bool operator==(const MaskSet&, const MaskSet&) = default;
};

}  // namespace wlticket
