#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "wlticket/errors.hpp"
#include "wlticket/graph.hpp"
#include "wlticket/isomorphism.hpp"
#include "wlticket/tensor.hpp"
#include "wlticket/wl.hpp"

namespace wlticket {

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  Dataset train, val, test;
  std::vector<std::size_t> train_idx, val_idx, test_idx;
};

/// Deterministic stratified split. The val and test sizes are floor(N*f);
/// train takes the remainder. Each class contributes floor(n_c*f) graphs to
/// val/test; the shortfall to the global floor goes to the classes with the
/// largest fractional parts (ties to the lower class index).
inline DatasetSplit split(const Dataset& ds, SplitFractions f, std::uint64_t seed) {
  if (ds.empty()) throw DomainError("split: empty dataset");
  if (f.train <= 0 || f.val <= 0 || f.test <= 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw DomainError("split: fractions must be positive and sum to 1");
  }
  const std::size_t n = ds.size();
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < n; ++i) by_class.at(static_cast<std::size_t>(ds.graphs[i].label())).push_back(i);

  Rng rng(seed, 0x5B117);
  for (auto& members : by_class) rng.shuffle(members);

  const std::size_t c = by_class.size();
  std::vector<std::size_t> val_c(c), test_c(c);
  auto allocate = [&](double frac, std::vector<std::size_t>& alloc, const std::vector<std::size_t>& taken) {
    const auto target = static_cast<std::size_t>(std::floor(static_cast<double>(n) * frac + 1e-9));
    std::size_t total = 0;
    std::vector<std::pair<double, std::size_t>> remainders;
    for (std::size_t k = 0; k < c; ++k) {
      const double exact = static_cast<double>(by_class[k].size()) * frac;
      alloc[k] = std::min(static_cast<std::size_t>(std::floor(exact + 1e-9)), by_class[k].size() - taken[k]);
      total += alloc[k];
      remainders.emplace_back(exact - std::floor(exact + 1e-9), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    // Round-robin over classes by remainder until the global floor is met.
    bool progress = true;
    while (total < target && progress) {
      progress = false;
      for (const auto& [rem, k] : remainders) {
        if (total >= target) break;
        if (alloc[k] + taken[k] < by_class[k].size()) {
          ++alloc[k];
          ++total;
          progress = true;
        }
      }
    }
  };
  const std::vector<std::size_t> none(c, 0);
  allocate(f.val, val_c, none);
  allocate(f.test, test_c, val_c);

  DatasetSplit out;
  for (std::size_t k = 0; k < c; ++k) {
    const auto& m = by_class[k];
    std::size_t pos = 0;
    for (std::size_t j = 0; j < val_c[k]; ++j) out.val_idx.push_back(m[pos++]);
    for (std::size_t j = 0; j < test_c[k]; ++j) out.test_idx.push_back(m[pos++]);
    while (pos < m.size()) out.train_idx.push_back(m[pos++]);
  }
  for (auto* v : {&out.train_idx, &out.val_idx, &out.test_idx}) std::sort(v->begin(), v->end());
  out.train = ds.subset(out.train_idx, ds.name + "/train");
  out.val = ds.subset(out.val_idx, ds.name + "/val");
  out.test = ds.subset(out.test_idx, ds.name + "/test");
  return out;
}

/// Structurally isomorphic, feature-divergent pair with one structural witness.
struct SifdgPair {
  std::size_t a = 0;
  std::size_t b = 0;
  std::vector<std::size_t> permutation;  // node v of graph a -> node of graph b
};

struct SifdgResult {
  std::vector<SifdgPair> pairs;
  std::vector<std::size_t> skipped;  // graphs above the node cap
};

/// All pairs a < b whose adjacency matrices are permutation-equivalent but for
/// which no such permutation also matches features. Unlabeled and labeled 1-WL
/// signatures prefilter candidates; survivors go through exact search.
inline SifdgResult sifdg_pairs(const Dataset& ds, std::size_t node_cap = kDefaultNodeCap) {
  SifdgResult out;
  const auto structure = wl_signatures(ds, kUnbounded, false);
  const auto labeled = wl_signatures(ds, kUnbounded, true);

  std::map<std::vector<std::size_t>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.graphs[i].node_count() > node_cap) {
      out.skipped.push_back(i);
      continue;
    }
    groups[structure[i]].push_back(i);
  }
  for (const auto& [sig, members] : groups) {
    for (std::size_t x = 0; x < members.size(); ++x) {
      for (std::size_t y = x + 1; y < members.size(); ++y) {
        const std::size_t a = members[x];
        const std::size_t b = members[y];
        auto perm = find_isomorphism(ds.graphs[a], ds.graphs[b], false);
        if (!perm) continue;
        if (labeled[a] == labeled[b] && isomorphic(ds.graphs[a], ds.graphs[b], true)) continue;
        out.pairs.push_back({a, b, std::move(*perm)});
      }
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const SifdgPair& p, const SifdgPair& q) { return std::tie(p.a, p.b) < std::tie(q.a, q.b); });
  return out;
}

}  // namespace wlticket
