#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wlticket/errors.hpp"
#include "wlticket/tensor.hpp"

namespace wlticket {

/// FLOAT32 machine epsilon as used for distinguishability.
inline constexpr double kFloat32Eps = 1.19e-7;

enum class ToleranceMode { relative, absolute };

inline ToleranceMode parse_tolerance_mode(std::string_view s) {
  if (s == "relative") return ToleranceMode::relative;
  if (s == "absolute") return ToleranceMode::absolute;
  throw ConfigError("unknown tolerance mode '" + std::string(s) + "'");
}

inline std::string_view to_string(ToleranceMode m) { return m == ToleranceMode::relative ? "relative" : "absolute"; }

/// Vectors are indistinguishable when max|a - b| <= eps * scale, with
/// scale = max(1, |a|_inf, |b|_inf) in relative mode and 1 in absolute mode.
inline bool indistinguishable(std::span<const double> a, std::span<const double> b,
                              ToleranceMode mode = ToleranceMode::relative, double eps = kFloat32Eps) {
  if (a.size() != b.size()) return false;
  double diff = 0.0;
  double scale = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    if (mode == ToleranceMode::relative) scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return diff <= eps * scale;
}

/// Rows of `m` that are pairwise distinguishable: exact duplicates are
/// dropped, then each remaining row is kept unless it is indistinguishable
/// from an earlier kept row.
inline std::vector<std::vector<double>> distinct_rows(const std::vector<std::vector<double>>& rows,
                                                      ToleranceMode mode = ToleranceMode::relative) {
  auto sorted = rows;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::vector<double>> kept;
  for (auto& r : sorted) {
    bool dup = false;
    for (const auto& k : kept) {
      if (indistinguishable(r, k, mode)) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(std::move(r));
  }
  return kept;
}

}  // namespace wlticket
