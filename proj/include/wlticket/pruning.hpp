#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wlticket/errors.hpp"
#include "wlticket/gnn.hpp"
#include "wlticket/graph.hpp"
#include "wlticket/isomorphism.hpp"
#include "wlticket/mask_set.hpp"
#include "wlticket/tensor.hpp"
#include "wlticket/tolerance.hpp"
#include "wlticket/train.hpp"

namespace wlticket {

enum class MaskMode {
  bernoulli,    // each coordinate pruned independently with probability rho
  fixed_count,  // exactly ceil(rho * size) zeros per matrix (non-canonical)
};

/// Random masks for every weight matrix. Matrix (k, j) draws from its own
/// child stream of `rng`, so results do not depend on the order of generation.
inline MaskSet random_mask(const MaskShape& shape, double rho, const Rng& rng,
                           MaskMode mode = MaskMode::bernoulli) {
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("random_mask: rho must be in [0, 1)");
  MaskSet out = MaskSet::ones(shape);
  for (std::size_t k = 0; k < shape.size(); ++k) {
    for (std::size_t j = 0; j < shape[k].size(); ++j) {
      Rng r = rng.split(1000 * (k + 1) + j);
      auto vals = out.layers[k][j].values();
      if (mode == MaskMode::bernoulli) {
        for (double& v : vals) v = r.bernoulli(rho) ? 0.0 : 1.0;
      } else {
        const auto zeros = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(vals.size()) - 1e-9));
        std::vector<std::size_t> idx(vals.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        r.shuffle(idx);
        for (std::size_t i = 0; i < zeros; ++i) vals[idx[i]] = 0.0;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Computational paths through one MLP.

struct PathCount {
  std::uint64_t alive = 0;
  std::uint64_t total = 0;
};

namespace pruning_detail {
inline void check_chain(std::span<const Matrix> masks) {
  if (masks.empty()) throw DomainError("paths: no layers");
  for (std::size_t j = 1; j < masks.size(); ++j)
    if (masks[j - 1].cols() != masks[j].rows()) throw DomainError("paths: layer widths do not chain");
}

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw DomainError("paths: count overflows 64 bits");
  return r;
}

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) throw DomainError("paths: count overflows 64 bits");
  return r;
}
}  // namespace pruning_detail

/// Alive and total input-to-output path counts by dynamic programming over
/// layers, without listing paths.
inline PathCount count_paths(std::span<const Matrix> masks) {
  using namespace pruning_detail;
  check_chain(masks);
  std::vector<std::uint64_t> alive(masks.front().rows(), 1);
  std::uint64_t total = masks.front().rows();
  for (const auto& m : masks) {
    std::vector<std::uint64_t> next(m.cols(), 0);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t o = 0; o < m.cols(); ++o)
        if (m(i, o) != 0.0) next[o] = checked_add(next[o], alive[i]);
    alive = std::move(next);
    total = checked_mul(total, m.cols());
  }
  PathCount out;
  out.total = total;
  for (std::uint64_t a : alive) out.alive = checked_add(out.alive, a);
  return out;
}

inline constexpr std::uint64_t kDefaultPathCap = 1'000'000;

struct PathSet {
  std::vector<std::vector<std::size_t>> paths;  // neuron index per layer boundary, input first
  std::vector<bool> alive;
  std::uint64_t alive_count = 0;

  std::uint64_t total() const noexcept { return paths.size(); }
};

/// Full listing of every path with its alive flag. A path is alive iff every
/// edge on it is unmasked.
inline PathSet enumerate_paths(std::span<const Matrix> masks, std::uint64_t cap = kDefaultPathCap) {
  using namespace pruning_detail;
  check_chain(masks);
  std::uint64_t total = masks.front().rows();
  for (const auto& m : masks) total = checked_mul(total, m.cols());
  if (total > cap) {
    throw DomainError("enumerate_paths: " + std::to_string(total) + " paths exceed cap " + std::to_string(cap) +
                      "; use count_paths for counts only");
  }
  PathSet out;
  out.paths.reserve(total);
  std::vector<std::size_t> cur(masks.size() + 1, 0);
  const std::size_t depth = masks.size();
  for (std::uint64_t p = 0; p < total; ++p) {
    std::uint64_t rest = p;
    for (std::size_t b = depth + 1; b-- > 0;) {
      const std::size_t width = b == 0 ? masks[0].rows() : masks[b - 1].cols();
      cur[b] = static_cast<std::size_t>(rest % width);
      rest /= width;
    }
    bool live = true;
    for (std::size_t j = 0; j < depth && live; ++j) live = masks[j](cur[j], cur[j + 1]) != 0.0;
    out.paths.push_back(cur);
    out.alive.push_back(live);
    out.alive_count += live;
  }
  return out;
}

// ---------------------------------------------------------------------------
// First-layer irrecoverability.

/// True iff, for every node i of g1, feature l and output j,
/// (Agg1 X1)_il M_lj == (Agg2 X2)_{pi(i) l} M_lj. Then the first MLP layer
/// gives identical (pi-aligned) outputs for every weight matrix. Aggregate
/// differences at or below `tol` count as zero.
inline bool is_irrecoverable_first_layer(const Graph& g1, const Graph& g2, const std::vector<std::size_t>& perm,
                                         const Matrix& mask, Variant variant = Variant::gin,
                                         double epsilon = 0.0, double tol = 0.0) {
  if (g1.node_count() != g2.node_count() || g1.feature_dim() != g2.feature_dim())
    throw DomainError("is_irrecoverable_first_layer: graph shapes differ");
  if (mask.rows() != g1.feature_dim())
    throw DomainError("is_irrecoverable_first_layer: mask rows != feature dim");
  if (!is_isomorphism(g1, g2, perm, false))
    throw DomainError("is_irrecoverable_first_layer: perm is not a structural isomorphism");
  const Matrix u1 = matmul(aggregation_matrix(g1, variant, epsilon), g1.features());
  const Matrix u2 = matmul(aggregation_matrix(g2, variant, epsilon), g2.features());
  for (std::size_t l = 0; l < mask.rows(); ++l) {
    bool differs = false;
    for (std::size_t i = 0; i < g1.node_count() && !differs; ++i) differs = std::abs(u1(i, l) - u2(perm[i], l)) > tol;
    if (!differs) continue;
    for (std::size_t j = 0; j < mask.cols(); ++j)
      if (mask(l, j) != 0.0) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Empirical critical-path probe.

struct ProbeEdge {
  std::size_t mp = 0;   // message-passing layer
  std::size_t mlp = 0;  // MLP layer within it
  std::size_t row = 0;
  std::size_t col = 0;
};

struct ProbeBudget {
  std::size_t epochs = 50;
  std::size_t restarts = 3;
  std::size_t batch_size = 32;
  double lr = 0.01;
};

struct ProbeResult {
  ProbeEdge edge;
  double accuracy_with = 0.0;
  double accuracy_without = 0.0;
};

/// Best accuracy on `data` over `budget.restarts` trainings from the same
/// initialization; restart r shuffles with stream r of `seed`.
inline double best_trained_accuracy(const GnnModel& init, const Dataset& data, const ProbeBudget& budget,
                                    std::uint64_t seed) {
  double best = 0.0;
  for (std::size_t r = 0; r < budget.restarts; ++r) {
    GnnModel m = init;
    Rng rng(seed, 0x9B0BE000ULL + r);
    TrainConfig cfg;
    cfg.epochs = budget.epochs;
    cfg.batch_size = budget.batch_size;
    cfg.adam.lr = budget.lr;
    train(m, data, cfg, rng);
    best = std::max(best, evaluate(m, data));
  }
  return best;
}

/// For each candidate edge, retrains from the model's initialization with that
/// weight masked and compares the best accuracy against the unmodified mask.
/// Evidence only: a drop does not prove criticality for all weights.
inline std::vector<ProbeResult> probe_critical_paths(const GnnModel& model, const Dataset& data,
                                                     std::span<const ProbeEdge> edges, const ProbeBudget& budget,
                                                     std::uint64_t seed) {
  if (budget.epochs == 0 || budget.restarts == 0) throw DomainError("probe_critical_paths: zero training budget");
  if (data.empty()) throw DomainError("probe_critical_paths: empty dataset");
  const MaskSet base = model.masks();
  const double baseline = best_trained_accuracy(model, data, budget, seed);
  std::vector<ProbeResult> out;
  for (const auto& e : edges) {
    if (e.mp >= base.layers.size() || e.mlp >= base.layers[e.mp].size() ||
        e.row >= base.layers[e.mp][e.mlp].rows() || e.col >= base.layers[e.mp][e.mlp].cols()) {
      throw DomainError("probe_critical_paths: edge out of range");
    }
    MaskSet m = base;
    m.layers[e.mp][e.mlp](e.row, e.col) = 0.0;
    const double without = m == base ? baseline : best_trained_accuracy(model.with_masks(m), data, budget, seed);
    out.push_back({e, baseline, without});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Injectivity-preserving sparsification.

/// Rows fed into MLP layer (mp, mlp) over every node of every graph.
inline std::vector<std::vector<double>> layer_inputs(const GnnModel& model, const Dataset& data, std::size_t mp,
                                                     std::size_t mlp) {
  std::vector<std::vector<double>> rows;
  for (const auto& g : data.graphs) {
    const auto fp = model.forward(g);
    const Matrix& in = fp.layers.at(mp).mlp.at(mlp).input;
    for (std::size_t v = 0; v < in.rows(); ++v) rows.emplace_back(in.row(v).begin(), in.row(v).end());
  }
  return rows;
}

/// True iff x -> act(x (M o W)) keeps every pair of the given pairwise
/// distinguishable inputs distinguishable.
inline bool layer_injective(const std::vector<std::vector<double>>& distinct_inputs, const Matrix& weights,
                            const Matrix& mask, Activation act, ToleranceMode mode = ToleranceMode::relative) {
  const Matrix w = hadamard(weights, mask);
  std::vector<std::vector<double>> outs;
  outs.reserve(distinct_inputs.size());
  for (const auto& x : distinct_inputs) {
    if (x.size() != w.rows()) throw DomainError("layer_injective: input width != weight rows");
    std::vector<double> y(w.cols(), 0.0);
    for (std::size_t o = 0; o < w.cols(); ++o) {
      double s = 0.0;
      for (std::size_t i = 0; i < w.rows(); ++i) s += x[i] * w(i, o);
      y[o] = activate(act, s);
    }
    for (const auto& prev : outs)
      if (indistinguishable(prev, y, mode)) return false;
    outs.push_back(std::move(y));
  }
  return true;
}

struct SparsifyConfig {
  double rho_step = 0.1;
  std::size_t k_trials = 10;
  double max_sparsity = 0.95;
  ToleranceMode mode = ToleranceMode::relative;
};

struct SparsifyResult {
  MaskSet masks;
  std::vector<std::vector<double>> layer_sparsity;  // realized, [mp][mlp]
  double sparsity = 0.0;                            // realized over all layers
};

/// Layer-wise greedy sparsification. Layers are visited in forward order. For
/// each, the target sparsity rises by rho_step while one of k_trials sampled
/// fixed-count masks keeps the layer injective on its realized distinct
/// inputs (computed with all earlier layers already sparsified).
inline SparsifyResult injectivity_preserving_sparsify(const GnnModel& model, const Dataset& data,
                                                      const SparsifyConfig& cfg, const Rng& rng) {
  if (cfg.k_trials == 0) throw DomainError("sparsify: k_trials must be >= 1");
  if (!(cfg.rho_step > 0.0 && cfg.rho_step < 1.0)) throw DomainError("sparsify: rho_step must be in (0, 1)");
  if (data.empty()) throw DomainError("sparsify: empty dataset");
  GnnModel cur = model.with_masks(MaskSet::ones(model.mask_shape()));
  MaskSet masks = cur.masks();
  SparsifyResult out;
  const auto& layers = model.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& row = out.layer_sparsity.emplace_back();
    for (std::size_t j = 0; j < layers[k].mlp.size(); ++j) {
      const auto inputs = distinct_rows(layer_inputs(cur, data, k, j), cfg.mode);
      const Matrix& w = layers[k].mlp[j].weights();
      const std::size_t n = w.size();
      std::size_t step = 0;
      for (;;) {
        ++step;
        const double target = cfg.rho_step * static_cast<double>(step);
        if (target > cfg.max_sparsity + 1e-12) break;
        const auto zeros = static_cast<std::size_t>(std::ceil(target * static_cast<double>(n) - 1e-9));
        bool accepted = false;
        for (std::size_t t = 0; t < cfg.k_trials && !accepted; ++t) {
          Rng r = rng.split(((k * 64 + j) * 4096 + step) * 4096 + t);
          std::vector<std::size_t> idx(n);
          std::iota(idx.begin(), idx.end(), std::size_t{0});
          r.shuffle(idx);
          Matrix cand(w.rows(), w.cols(), 1.0);
          for (std::size_t i = 0; i < zeros; ++i) cand.values()[idx[i]] = 0.0;
          if (layer_injective(inputs, w, cand, model.activation(), cfg.mode)) {
            masks.layers[k][j] = std::move(cand);
            accepted = true;
          }
        }
        if (!accepted) break;
      }
      cur = model.with_masks(masks);
      row.push_back(MaskSet::sparsity_of(masks.layers[k][j]));
    }
  }
  out.sparsity = masks.sparsity();
  out.masks = std::move(masks);
  return out;
}

// ---------------------------------------------------------------------------
// Binary mask files: "WLPM", u32 version, u32 mp count, then per MP layer a
// u32 MLP count and per matrix u32 rows, u32 cols, ceil(rows*cols/8) bytes of
// row-major bits, least significant bit first. All integers little-endian.

inline constexpr std::uint32_t kMaskFormatVersion = 1;

namespace pruning_detail {
inline void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw DataError("mask file: truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace pruning_detail

inline std::vector<std::uint8_t> pack_bits(const Matrix& m) {
  std::vector<std::uint8_t> bytes((m.size() + 7) / 8, 0);
  const auto v = m.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) bytes[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  return bytes;
}

inline Matrix unpack_bits(std::size_t rows, std::size_t cols, std::span<const std::uint8_t> bytes) {
  if (bytes.size() != (rows * cols + 7) / 8) throw DataError("mask bits: wrong byte count");
  Matrix m(rows, cols, 0.0);
  auto v = m.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (bytes[i / 8] >> (i % 8)) & 1u ? 1.0 : 0.0;
  return m;
}

inline void write_mask_set(std::ostream& os, const MaskSet& masks) {
  using namespace pruning_detail;
  masks.require_binary();
  os.write("WLPM", 4);
  put_u32(os, kMaskFormatVersion);
  put_u32(os, static_cast<std::uint32_t>(masks.layers.size()));
  for (const auto& mp : masks.layers) {
    put_u32(os, static_cast<std::uint32_t>(mp.size()));
    for (const auto& m : mp) {
      put_u32(os, static_cast<std::uint32_t>(m.rows()));
      put_u32(os, static_cast<std::uint32_t>(m.cols()));
      const auto bits = pack_bits(m);
      os.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
    }
  }
}

inline MaskSet read_mask_set(std::istream& is) {
  using namespace pruning_detail;
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || std::string(magic.data(), 4) != "WLPM") throw DataError("mask file: bad magic");
  if (get_u32(is) != kMaskFormatVersion) throw DataError("mask file: unsupported version");
  MaskSet out;
  const std::uint32_t mp = get_u32(is);
  for (std::uint32_t k = 0; k < mp; ++k) {
    auto& layer = out.layers.emplace_back();
    const std::uint32_t count = get_u32(is);
    for (std::uint32_t j = 0; j < count; ++j) {
      const std::uint32_t r = get_u32(is);
      const std::uint32_t c = get_u32(is);
      std::vector<std::uint8_t> bytes((static_cast<std::size_t>(r) * c + 7) / 8);
      if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
        throw DataError("mask file: truncated");
      layer.push_back(unpack_bits(r, c, bytes));
    }
  }
  return out;
}

inline void save_mask_set(const std::filesystem::path& p, const MaskSet& masks) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write " + p.string());
  write_mask_set(os, masks);
}

inline MaskSet load_mask_set(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw DataError("cannot read " + p.string());
  return read_mask_set(is);
}

}  // namespace wlticket
