#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wlticket/dataset_ops.hpp"
#include "wlticket/errors.hpp"
#include "wlticket/expressivity.hpp"
#include "wlticket/gnn.hpp"
#include "wlticket/pruning.hpp"
#include "wlticket/representatives.hpp"
#include "wlticket/stats.hpp"
#include "wlticket/synthetic.hpp"
#include "wlticket/train.hpp"
#include "wlticket/tudataset.hpp"

namespace wlticket {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Configuration.

/// One dataset of a sweep. `path` empty means a built-in generator named by
/// `name` ("synthetic", "triangle_path", "sifdg_pair").
struct DatasetSource {
  std::string name;
  std::string path;
  std::size_t subset = 0;  // 0 = all graphs

  friend bool operator==(const DatasetSource&, const DatasetSource&) = default;
};

enum class WinningMode { relative, absolute };

struct ExperimentConfig {
  std::vector<DatasetSource> datasets;
  Variant variant = Variant::gin;
  std::size_t mp_layers = 2;
  std::size_t mlp_depth = 2;
  std::size_t hidden = 0;  // 0 = feature dim of each dataset
  Activation activation = Activation::relu;
  bool train_epsilon = true;
  std::vector<double> rho_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t seeds = 10;
  std::uint64_t seed_base = 0;
  std::size_t epochs = 250;
  std::size_t batch_size = 32;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  SplitFractions split{};
  std::uint64_t split_seed = 0;
  std::uint64_t subset_seed = 0;
  std::uint64_t synthetic_seed = 0;
  synthetic::TypesConfig synthetic{};
  double winning_threshold = 0.05;
  WinningMode winning_mode = WinningMode::relative;
  ToleranceMode tau_mode = ToleranceMode::relative;
  MaskMode mask_mode = MaskMode::bernoulli;
  std::vector<double> theta_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double bucket_eps = 0.05;
  std::vector<double> kappa_grid{1.00, 0.92, 0.83, 0.75, 0.67, 0.58, 0.50, 0.42, 0.33, 0.25, 0.17, 0.08};
  double corr_rho_min = 0.3;
  double corr_rho_max = 0.7;
  std::size_t node_cap = kDefaultNodeCap;
  std::size_t workers = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (datasets.empty()) fail("config: at least one dataset is required");
    if (mp_layers < 1) fail("config: mp_layers must be >= 1");
    if (mlp_depth < 1) fail("config: mlp_depth must be >= 1");
    if (rho_grid.empty()) fail("config: rho_grid is empty");
    for (double r : rho_grid)
      if (!(r >= 0.0 && r < 1.0)) fail("config: rho values must be in [0, 1)");
    if (seeds < 1) fail("config: seeds must be >= 1");
    if (batch_size < 1) fail("config: batch_size must be >= 1");
    if (!(lr > 0.0)) fail("config: lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail("config: betas must be in [0, 1)");
    if (!(adam_eps > 0.0)) fail("config: adam_eps must be positive");
    if (split.train <= 0 || split.val <= 0 || split.test <= 0 ||
        std::abs(split.train + split.val + split.test - 1.0) > 1e-9)
      fail("config: split fractions must be positive and sum to 1");
    if (!(winning_threshold >= 0.0)) fail("config: winning_threshold must be >= 0");
    if (!(bucket_eps >= 0.0)) fail("config: bucket_eps must be >= 0");
    if (workers < 1) fail("config: workers must be >= 1");
  }
};

namespace harness_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(',', start);
    const auto item = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!item.empty()) out.push_back(item);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw ConfigError("config: " + key + ": expected a number, got '" + v + "'");
  return x;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end)
    throw ConfigError("config: " + key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: " + key + ": expected a boolean, got '" + v + "'");
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
  return out;
}

/// "name", "name@path" or either followed by "#subset".
inline DatasetSource parse_source(const std::string& s) {
  DatasetSource d;
  std::string rest = s;
  if (const auto h = rest.find('#'); h != std::string::npos) {
    d.subset = to_uint("datasets", trim(rest.substr(h + 1)));
    rest = trim(rest.substr(0, h));
  }
  if (const auto at = rest.find('@'); at != std::string::npos) {
    d.name = trim(rest.substr(0, at));
    d.path = trim(rest.substr(at + 1));
  } else {
    d.name = rest;
  }
  if (d.name.empty()) throw ConfigError("config: dataset entry '" + s + "' has no name");
  return d;
}

inline std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  }
  throw ConfigError("config: unsupported JSON value " + v.dump());
}

}  // namespace harness_detail

/// Applies flat key/value settings on top of the defaults. Unknown keys and
/// malformed values raise ConfigError.
inline ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv) {
  using namespace harness_detail;
  ExperimentConfig c;
  for (const auto& [key, v] : kv) {
    if (key == "datasets") {
      c.datasets.clear();
      for (const auto& s : split_list(v)) c.datasets.push_back(parse_source(s));
    } else if (key == "variant") c.variant = parse_variant(v);
    else if (key == "mp_layers") c.mp_layers = to_uint(key, v);
    else if (key == "mlp_depth") c.mlp_depth = to_uint(key, v);
    else if (key == "hidden") c.hidden = to_uint(key, v);
    else if (key == "activation") c.activation = parse_activation(v);
    else if (key == "train_epsilon") c.train_epsilon = to_bool(key, v);
    else if (key == "rho_grid") c.rho_grid = to_doubles(key, v);
    else if (key == "seeds") c.seeds = to_uint(key, v);
    else if (key == "seed_base") c.seed_base = to_uint(key, v);
    else if (key == "epochs") c.epochs = to_uint(key, v);
    else if (key == "batch_size") c.batch_size = to_uint(key, v);
    else if (key == "lr") c.lr = to_double(key, v);
    else if (key == "beta1") c.beta1 = to_double(key, v);
    else if (key == "beta2") c.beta2 = to_double(key, v);
    else if (key == "adam_eps") c.adam_eps = to_double(key, v);
    else if (key == "split") {
      const auto f = to_doubles(key, v);
      if (f.size() != 3) throw ConfigError("config: split needs three fractions");
      c.split = {f[0], f[1], f[2]};
    } else if (key == "split_seed") c.split_seed = to_uint(key, v);
    else if (key == "subset_seed") c.subset_seed = to_uint(key, v);
    else if (key == "synthetic_seed") c.synthetic_seed = to_uint(key, v);
    else if (key == "synthetic_types") c.synthetic.types = to_uint(key, v);
    else if (key == "synthetic_copies") c.synthetic.copies = to_uint(key, v);
    else if (key == "synthetic_min_nodes") c.synthetic.min_nodes = to_uint(key, v);
    else if (key == "synthetic_max_nodes") c.synthetic.max_nodes = to_uint(key, v);
    else if (key == "synthetic_node_labels") c.synthetic.node_labels = to_uint(key, v);
    else if (key == "synthetic_edge_prob") c.synthetic.edge_prob = to_double(key, v);
    else if (key == "winning_threshold") c.winning_threshold = to_double(key, v);
    else if (key == "winning_mode") {
      if (v == "relative") c.winning_mode = WinningMode::relative;
      else if (v == "absolute") c.winning_mode = WinningMode::absolute;
      else throw ConfigError("config: winning_mode must be relative or absolute");
    } else if (key == "tau_mode") c.tau_mode = parse_tolerance_mode(v);
    else if (key == "mask_mode") {
      if (v == "bernoulli") c.mask_mode = MaskMode::bernoulli;
      else if (v == "fixed_count") c.mask_mode = MaskMode::fixed_count;
      else throw ConfigError("config: mask_mode must be bernoulli or fixed_count");
    } else if (key == "theta_grid") c.theta_grid = to_doubles(key, v);
    else if (key == "bucket_eps") c.bucket_eps = to_double(key, v);
    else if (key == "kappa_grid") c.kappa_grid = to_doubles(key, v);
    else if (key == "corr_rho_min") c.corr_rho_min = to_double(key, v);
    else if (key == "corr_rho_max") c.corr_rho_max = to_double(key, v);
    else if (key == "node_cap") c.node_cap = to_uint(key, v);
    else if (key == "workers") c.workers = to_uint(key, v);
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

/// Parses a JSON object or "key = value" lines ('#' starts a comment).
/// JSON arrays become comma-separated lists.
inline ExperimentConfig parse_config(std::string_view text) {
  using namespace harness_detail;
  std::map<std::string, std::string> kv;
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    for (const auto& [key, v] : j.items()) {
      if (v.is_array()) {
        std::string joined;
        for (const auto& x : v) {
          std::string item;
          if (x.is_object()) {
            item = x.at("name").get<std::string>();
            if (x.contains("path")) item += "@" + x.at("path").get<std::string>();
            if (x.contains("subset")) item += "#" + json_scalar(x.at("subset"));
          } else {
            item = json_scalar(x);
          }
          joined += (joined.empty() ? "" : ",") + item;
        }
        kv[key] = joined;
      } else {
        kv[key] = json_scalar(v);
      }
    }
    return config_from_map(kv);
  }
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) {
      // '#' inside a dataset entry marks a subset size, not a comment.
      const auto eq = line.find('=');
      if (eq == std::string::npos || trim(line.substr(0, eq)) != "datasets") line = line.substr(0, h);
    }
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return config_from_map(kv);
}

/// Reads a config file; relative dataset paths resolve against its directory.
inline ExperimentConfig load_config(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw ConfigError("cannot read config " + p.string());
  std::stringstream ss;
  ss << is.rdbuf();
  ExperimentConfig cfg = parse_config(ss.str());
  for (auto& d : cfg.datasets)
    if (!d.path.empty() && std::filesystem::path(d.path).is_relative())
      d.path = (p.parent_path() / d.path).lexically_normal().string();
  return cfg;
}

// ---------------------------------------------------------------------------
// Records.

struct RunRecord {
  std::string dataset;
  std::uint64_t seed = 0;
  double rho = 0.0;
  double rho_realized = kNaN;
  double tau_pre = kNaN;
  double tau_post = kNaN;
  double a_clean = kNaN;
  double a_post = kNaN;
  bool winning = false;
  bool ok = true;
  double wall_ms = 0.0;  // written to timings.csv only

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

inline bool is_winning(double a_clean, double a_post, double threshold, WinningMode mode) {
  if (mode == WinningMode::absolute) return a_clean - a_post < threshold;
  if (a_clean == 0.0) return a_post >= a_clean;
  return (a_clean - a_post) / a_clean < threshold;
}

namespace harness_detail {
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_short(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline double parse_field(const std::string& s) {
  if (s == "nan") return kNaN;
  return std::stod(s);
}
}  // namespace harness_detail

inline constexpr std::string_view kRunsHeader =
    "dataset,seed,rho,rho_realized,tau_pre,tau_post,a_clean,a_post,winning_ticket,status";

inline std::string to_csv_row(const RunRecord& r) {
  using harness_detail::fmt;
  return r.dataset + "," + std::to_string(r.seed) + "," + fmt(r.rho) + "," + fmt(r.rho_realized) + "," +
         fmt(r.tau_pre) + "," + fmt(r.tau_post) + "," + fmt(r.a_clean) + "," + fmt(r.a_post) + "," +
         (r.winning ? "1" : "0") + "," + (r.ok ? "ok" : "failed");
}

inline RunRecord parse_csv_row(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) f.push_back(item);
  if (f.size() != 10) throw DataError("runs.csv: expected 10 fields in '" + line + "'");
  try {
    RunRecord r;
    r.dataset = f[0];
    r.seed = std::stoull(f[1]);
    r.rho = harness_detail::parse_field(f[2]);
    r.rho_realized = harness_detail::parse_field(f[3]);
    r.tau_pre = harness_detail::parse_field(f[4]);
    r.tau_post = harness_detail::parse_field(f[5]);
    r.a_clean = harness_detail::parse_field(f[6]);
    r.a_post = harness_detail::parse_field(f[7]);
    r.winning = f[8] == "1";
    r.ok = f[9] == "ok";
    return r;
  } catch (const std::logic_error&) {
    throw DataError("runs.csv: malformed row '" + line + "'");
  }
}

inline std::vector<RunRecord> read_runs_csv(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw DataError("cannot read " + p.string());
  std::string line;
  if (!std::getline(is, line) || harness_detail::trim(line) != kRunsHeader)
    throw DataError(p.string() + ": unexpected header");
  std::vector<RunRecord> out;
  while (std::getline(is, line)) {
    if (harness_detail::trim(line).empty()) continue;
    out.push_back(parse_csv_row(harness_detail::trim(line)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweep.

struct PreparedDataset {
  Dataset data;
  DatasetSplit split;
  IsomorphismTypes types;
};

inline Dataset load_source(const DatasetSource& src, const ExperimentConfig& cfg) {
  Dataset ds;
  if (src.path.empty()) {
    if (src.name == "synthetic") ds = synthetic::random_types(cfg.synthetic, cfg.synthetic_seed);
    else if (src.name == "triangle_path") ds = synthetic::triangle_vs_path();
    else if (src.name == "sifdg_pair") ds = synthetic::sifdg_pair();
    else throw ConfigError("config: dataset '" + src.name + "' has no path and is not a built-in generator");
  } else {
    ds = parse_tudataset(src.path, src.name);
  }
  if (src.subset > 0 && src.subset < ds.size()) {
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(cfg.subset_seed, 0x5AB5E7);
    rng.shuffle(idx);
    idx.resize(src.subset);
    std::sort(idx.begin(), idx.end());
    ds = ds.subset(idx);
  }
  ds.validate();
  return ds;
}

inline PreparedDataset prepare(const DatasetSource& src, const ExperimentConfig& cfg) {
  PreparedDataset p;
  p.data = load_source(src, cfg);
  p.split = split(p.data, cfg.split, cfg.split_seed);
  if (p.split.train.empty() || p.split.test.empty()) throw DataError(src.name + ": split leaves train or test empty");
  p.types = isomorphism_type_representatives(p.data, kUnbounded, cfg.node_cap);
  return p;
}

inline ModelSpec model_spec(const ExperimentConfig& cfg, const Dataset& ds) {
  ModelSpec s;
  s.input_dim = ds.feature_dim;
  s.num_classes = ds.num_classes;
  s.mp_layers = cfg.mp_layers;
  s.mlp_depth = cfg.mlp_depth;
  s.hidden = cfg.hidden;
  s.variant = cfg.variant;
  s.activation = cfg.activation;
  s.train_epsilon = cfg.train_epsilon;
  return s;
}

inline TrainConfig train_config(const ExperimentConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.epochs;
  t.batch_size = cfg.batch_size;
  t.adam = {cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps};
  return t;
}

// Stream ids; every random draw of a cell is a pure function of (seed, stream).
inline constexpr std::uint64_t kInitStream = 0x1417;
inline constexpr std::uint64_t kShuffleStream = 0x5F1E;
inline constexpr std::uint64_t kMaskStream = 0x3A5C;

inline std::uint64_t rho_key(double rho) { return static_cast<std::uint64_t>(std::llround(rho * 1e6)); }

struct DenseTwin {
  GnnModel init;
  double a_clean = kNaN;
};

inline DenseTwin train_dense_twin(const PreparedDataset& p, const ExperimentConfig& cfg, std::uint64_t seed) {
  DenseTwin t;
  t.init = GnnModel::init(model_spec(cfg, p.data), Rng(seed, kInitStream));
  GnnModel m = t.init;
  Rng shuffle(seed, kShuffleStream);
  train(m, p.split.train, train_config(cfg), shuffle);
  t.a_clean = evaluate(m, p.split.test);
  return t;
}

/// One (dataset, rho, seed) cell given its dense twin.
inline RunRecord run_cell(const PreparedDataset& p, const DenseTwin& twin, const ExperimentConfig& cfg,
                          const std::string& name, double rho, std::uint64_t seed) {
  RunRecord r;
  r.dataset = name;
  r.seed = seed;
  r.rho = rho;
  r.a_clean = twin.a_clean;
  const MaskSet masks = random_mask(twin.init.mask_shape(), rho, Rng(seed, kMaskStream).split(rho_key(rho)),
                                    cfg.mask_mode);
  r.rho_realized = masks.sparsity();
  GnnModel m = twin.init.with_masks(masks);
  const TauOptions opt{cfg.tau_mode, false};
  r.tau_pre = measure_tau(m, p.data, p.types.representatives, opt).tau;
  Rng shuffle(seed, kShuffleStream);
  train(m, p.split.train, train_config(cfg), shuffle);
  r.tau_post = measure_tau(m, p.data, p.types.representatives, opt).tau;
  r.a_post = evaluate(m, p.split.test);
  r.winning = is_winning(r.a_clean, r.a_post, cfg.winning_threshold, cfg.winning_mode);
  return r;
}

struct SweepResult {
  std::vector<RunRecord> records;  // sorted by (dataset order, rho, seed)
  std::size_t failed = 0;
  std::size_t resumed = 0;
};

namespace harness_detail {
/// Runs task(i) for i in [0, n) on `workers` threads.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& task) {
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) task(i);
  };
  const std::size_t w = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < w; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
}
}  // namespace harness_detail

using ProgressFn = std::function<void(const RunRecord&)>;

/// Runs every (dataset, rho, seed) cell. With `out_dir`, finished cells are
/// appended to runs.partial.csv as they complete and cells already present in
/// runs.csv or runs.partial.csv are not rerun.
inline SweepResult run_sweep(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir = {},
                             const ProgressFn& progress = {}) {
  cfg.validate();
  SweepResult out;
  std::vector<PreparedDataset> prepared;
  for (const auto& src : cfg.datasets) prepared.push_back(prepare(src, cfg));

  struct Key {
    std::size_t d;
    std::size_t r;
    std::size_t s;
  };
  std::map<std::tuple<std::string, std::string, std::uint64_t>, RunRecord> done;
  auto key_of = [](const RunRecord& r) { return std::make_tuple(r.dataset, harness_detail::fmt(r.rho), r.seed); };

  std::ofstream partial;
  std::filesystem::path partial_path;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    for (const char* f : {"runs.csv", "runs.partial.csv"}) {
      const auto path = *out_dir / f;
      if (!std::filesystem::exists(path)) continue;
      for (auto& r : read_runs_csv(path))
        if (r.ok) done[key_of(r)] = r;
    }
    partial_path = *out_dir / "runs.partial.csv";
    const bool fresh = !std::filesystem::exists(partial_path);
    partial.open(partial_path, std::ios::app);
    if (!partial) throw DataError("cannot write " + partial_path.string());
    if (fresh) partial << kRunsHeader << '\n' << std::flush;
  }

  std::vector<Key> todo;
  std::vector<RunRecord> slots;
  std::vector<std::optional<RunRecord>> result;
  for (std::size_t d = 0; d < cfg.datasets.size(); ++d) {
    std::vector<double> rhos = cfg.rho_grid;
    std::sort(rhos.begin(), rhos.end());
    for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
      for (std::size_t s = 0; s < cfg.seeds; ++s) {
        RunRecord probe;
        probe.dataset = cfg.datasets[d].name;
        probe.rho = rhos[ri];
        probe.seed = cfg.seed_base + s;
        slots.push_back(probe);
        auto it = done.find(key_of(probe));
        if (it != done.end()) {
          result.emplace_back(it->second);
          ++out.resumed;
        } else {
          result.emplace_back(std::nullopt);
          todo.push_back({d, result.size() - 1, s});
        }
      }
    }
  }

  // Dense twins for every (dataset, seed) that still has work.
  std::map<std::pair<std::size_t, std::uint64_t>, DenseTwin> twins;
  std::vector<std::pair<std::size_t, std::uint64_t>> twin_keys;
  for (const auto& k : todo) {
    const auto tk = std::make_pair(k.d, slots[k.r].seed);
    if (!twins.count(tk)) {
      twins[tk] = {};
      twin_keys.push_back(tk);
    }
  }
  std::vector<std::string> twin_errors(twin_keys.size());
  harness_detail::parallel_for(twin_keys.size(), cfg.workers, [&](std::size_t i) {
    const auto [d, seed] = twin_keys[i];
    try {
      twins.at(twin_keys[i]) = train_dense_twin(prepared[d], cfg, seed);
    } catch (const std::exception& e) {
      twin_errors[i] = e.what();
    }
  });

  std::mutex io;
  harness_detail::parallel_for(todo.size(), cfg.workers, [&](std::size_t i) {
    const Key& k = todo[i];
    const RunRecord& slot = slots[k.r];
    const auto start = std::chrono::steady_clock::now();
    RunRecord rec = slot;
    try {
      const auto tk = std::make_pair(k.d, slot.seed);
      const auto ti = static_cast<std::size_t>(std::find(twin_keys.begin(), twin_keys.end(), tk) - twin_keys.begin());
      if (!twin_errors[ti].empty()) throw std::runtime_error(twin_errors[ti]);
      rec = run_cell(prepared[k.d], twins.at(tk), cfg, slot.dataset, slot.rho, slot.seed);
    } catch (const std::exception&) {
      rec.ok = false;
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::lock_guard lock(io);
    result[k.r] = rec;
    if (partial.is_open() && rec.ok) partial << to_csv_row(rec) << '\n' << std::flush;
    if (progress) progress(rec);
  });

  for (auto& r : result) {
    out.failed += !r->ok;
    out.records.push_back(std::move(*r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregate statistics.

struct WinningCell {
  std::string dataset;  // "ALL" for the normalized aggregate
  double rho = 0.0;
  double theta = 0.0;
  std::size_t runs = 0;
  std::size_t wins = 0;
  double probability = kNaN;
  double mean_relative_accuracy = kNaN;
};

namespace harness_detail {
inline bool same_rho(double a, double b) { return std::abs(a - b) < 1e-9; }
inline bool in_bucket(double tau, double theta, double eps) { return std::abs(tau - theta) <= eps + 1e-12; }

inline std::vector<std::string> dataset_order(const std::vector<RunRecord>& records) {
  std::vector<std::string> names;
  for (const auto& r : records)
    if (std::find(names.begin(), names.end(), r.dataset) == names.end()) names.push_back(r.dataset);
  return names;
}
}  // namespace harness_detail

/// Mean of (A_post - A_clean) / A_clean over successful records in the bucket
/// tau_pre in [theta - eps, theta + eps]. Records with A_clean = 0 are skipped.
inline double mean_relative_accuracy(const std::vector<RunRecord>& records, double theta, double eps) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (!r.ok || !harness_detail::in_bucket(r.tau_pre, theta, eps) || r.a_clean == 0.0) continue;
    sum += (r.a_post - r.a_clean) / r.a_clean;
    ++n;
  }
  return n == 0 ? kNaN : sum / static_cast<double>(n);
}

/// Per dataset and pooled P(winning | rho, tau_pre in [theta +- eps]). The
/// pooled "ALL" probability is the mean of the per-dataset fractions over
/// datasets with a nonempty bucket; its runs/wins are plain totals.
inline std::vector<WinningCell> winning_probability(const std::vector<RunRecord>& records,
                                                    const std::vector<double>& theta_grid, double eps,
                                                    const std::vector<double>& rho_grid) {
  using namespace harness_detail;
  std::vector<WinningCell> out;
  const auto names = dataset_order(records);
  std::vector<double> rhos = rho_grid;
  std::sort(rhos.begin(), rhos.end());
  for (double rho : rhos) {
    for (double theta : theta_grid) {
      WinningCell all{"ALL", rho, theta};
      double frac_sum = 0.0;
      std::size_t frac_n = 0;
      std::vector<RunRecord> bucket_all;
      for (const auto& name : names) {
        WinningCell c{name, rho, theta};
        std::vector<RunRecord> bucket;
        for (const auto& r : records) {
          if (!r.ok || r.dataset != name || !same_rho(r.rho, rho) || !in_bucket(r.tau_pre, theta, eps)) continue;
          ++c.runs;
          c.wins += r.winning;
          bucket.push_back(r);
        }
        if (c.runs > 0) {
          c.probability = static_cast<double>(c.wins) / static_cast<double>(c.runs);
          c.mean_relative_accuracy = mean_relative_accuracy(bucket, theta, eps);
          frac_sum += c.probability;
          ++frac_n;
        }
        all.runs += c.runs;
        all.wins += c.wins;
        bucket_all.insert(bucket_all.end(), bucket.begin(), bucket.end());
        out.push_back(c);
      }
      if (frac_n > 0) {
        all.probability = frac_sum / static_cast<double>(frac_n);
        all.mean_relative_accuracy = mean_relative_accuracy(bucket_all, theta, eps);
      }
      out.push_back(all);
    }
  }
  return out;
}

struct TransitionCell {
  std::string dataset;
  double kappa = 0.0;
  std::size_t conditioned = 0;  // runs with tau_pre < kappa
  std::size_t reached = 0;      // of those, tau_post >= kappa
  double probability = kNaN;
};

/// P(tau_post >= kappa | tau_pre < kappa), per dataset and pooled ("ALL").
inline std::vector<TransitionCell> transition_probability(const std::vector<RunRecord>& records,
                                                          const std::vector<double>& kappa_grid) {
  std::vector<TransitionCell> out;
  auto names = harness_detail::dataset_order(records);
  names.push_back("ALL");
  for (const auto& name : names) {
    for (double kappa : kappa_grid) {
      TransitionCell c{name, kappa};
      for (const auto& r : records) {
        if (!r.ok || (name != "ALL" && r.dataset != name) || !(r.tau_pre < kappa)) continue;
        ++c.conditioned;
        c.reached += r.tau_post >= kappa;
      }
      if (c.conditioned > 0) c.probability = static_cast<double>(c.reached) / static_cast<double>(c.conditioned);
      out.push_back(c);
    }
  }
  return out;
}

struct CorrelationRow {
  std::string dataset;
  std::string rho;  // a single value or "lo-hi" for a pooled range
  Correlation corr;
};

inline Correlation correlation_of(const std::vector<RunRecord>& records, const std::function<bool(const RunRecord&)>& keep) {
  std::vector<double> x, y;
  for (const auto& r : records) {
    if (!r.ok || !keep(r)) continue;
    x.push_back(r.tau_pre);
    y.push_back(r.a_post);
  }
  return pearson(x, y);
}

/// Pearson r(tau_pre, A_post) per dataset and rho, per dataset over the
/// pooled rho range, and over all datasets ("ALL") for each.
inline std::vector<CorrelationRow> correlation(const std::vector<RunRecord>& records, const std::vector<double>& rho_grid,
                                               double pool_min, double pool_max) {
  using namespace harness_detail;
  std::vector<CorrelationRow> out;
  auto names = dataset_order(records);
  names.push_back("ALL");
  std::vector<double> rhos = rho_grid;
  std::sort(rhos.begin(), rhos.end());
  const std::string range = fmt_short(pool_min) + "-" + fmt_short(pool_max);
  for (const auto& name : names) {
    auto ds_ok = [&](const RunRecord& r) { return name == "ALL" || r.dataset == name; };
    for (double rho : rhos)
      out.push_back({name, fmt_short(rho), correlation_of(records, [&](const RunRecord& r) {
                       return ds_ok(r) && same_rho(r.rho, rho);
                     })});
    out.push_back({name, range, correlation_of(records, [&](const RunRecord& r) {
                     return ds_ok(r) && r.rho >= pool_min - 1e-9 && r.rho <= pool_max + 1e-9;
                   })});
  }
  return out;
}

struct ScatterRow {
  std::string dataset;
  double rho = 0.0;
  std::size_t runs = 0;
  double tau_pre_mean = kNaN;
  double tau_post_mean = kNaN;
};

inline std::vector<ScatterRow> tau_scatter(const std::vector<RunRecord>& records, const std::vector<double>& rho_grid) {
  std::vector<ScatterRow> out;
  std::vector<double> rhos = rho_grid;
  std::sort(rhos.begin(), rhos.end());
  for (const auto& name : harness_detail::dataset_order(records)) {
    for (double rho : rhos) {
      ScatterRow s{name, rho};
      double pre = 0.0, post = 0.0;
      for (const auto& r : records) {
        if (!r.ok || r.dataset != name || !harness_detail::same_rho(r.rho, rho)) continue;
        ++s.runs;
        pre += r.tau_pre;
        post += r.tau_post;
      }
      if (s.runs > 0) {
        s.tau_pre_mean = pre / static_cast<double>(s.runs);
        s.tau_post_mean = post / static_cast<double>(s.runs);
      }
      out.push_back(s);
    }
  }
  return out;
}

/// Fraction of successful runs with tau_post <= tau_pre.
inline double degradation_fraction(const std::vector<RunRecord>& records) {
  std::size_t n = 0, hit = 0;
  for (const auto& r : records) {
    if (!r.ok) continue;
    ++n;
    hit += r.tau_post <= r.tau_pre;
  }
  return n == 0 ? kNaN : static_cast<double>(hit) / static_cast<double>(n);
}

struct DirectionalRow {
  double rho = 0.0;
  double high = kNaN;  // mean pooled probability over defined buckets with theta >= 0.9
  double low = kNaN;   // same for theta <= 0.5
  bool comparable = false;
  bool holds = false;
};

/// High-versus-low tau_pre winning probability at each rho <= rho_max.
inline std::vector<DirectionalRow> directional_check(const std::vector<WinningCell>& cells, double rho_max = 0.8,
                                                     double high_from = 0.9, double low_to = 0.5) {
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> by_rho;
  for (const auto& c : cells) {
    if (c.dataset != "ALL" || c.rho > rho_max + 1e-9 || std::isnan(c.probability)) {
      if (c.dataset == "ALL" && c.rho <= rho_max + 1e-9) by_rho[c.rho];
      continue;
    }
    if (c.theta >= high_from - 1e-9) by_rho[c.rho].first.push_back(c.probability);
    if (c.theta <= low_to + 1e-9) by_rho[c.rho].second.push_back(c.probability);
  }
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? kNaN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  std::vector<DirectionalRow> out;
  for (const auto& [rho, hl] : by_rho) {
    DirectionalRow d{rho, mean(hl.first), mean(hl.second)};
    d.comparable = !std::isnan(d.high) && !std::isnan(d.low);
    d.holds = d.comparable && d.high >= d.low;
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report files.

inline void write_runs_csv(const std::filesystem::path& p, const std::vector<RunRecord>& records) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write " + p.string());
  os << kRunsHeader << '\n';
  for (const auto& r : records) os << to_csv_row(r) << '\n';
}

inline void write_timings_csv(const std::filesystem::path& p, const std::vector<RunRecord>& records) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write " + p.string());
  os << "dataset,seed,rho,wall_ms\n";
  for (const auto& r : records)
    os << r.dataset << ',' << r.seed << ',' << harness_detail::fmt(r.rho) << ',' << harness_detail::fmt_short(r.wall_ms)
       << '\n';
}

struct ReportOptions {
  std::vector<double> rho_grid;  // empty: the distinct rho values of the records
  std::vector<double> theta_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double bucket_eps = 0.05;
  std::vector<double> kappa_grid{1.00, 0.92, 0.83, 0.75, 0.67, 0.58, 0.50, 0.42, 0.33, 0.25, 0.17, 0.08};
  double corr_rho_min = 0.3;
  double corr_rho_max = 0.7;
};

inline ReportOptions report_options(const ExperimentConfig& cfg) {
  return {cfg.rho_grid, cfg.theta_grid, cfg.bucket_eps, cfg.kappa_grid, cfg.corr_rho_min, cfg.corr_rho_max};
}

inline constexpr std::string_view kPlotStub = R"PY(# Plot stub for the CSV reports in this directory.
# Needs pandas and matplotlib; adjust to taste.
import pandas as pd
import matplotlib.pyplot as plt

runs = pd.read_csv("runs.csv")
win = pd.read_csv("winning_prob.csv")
trans = pd.read_csv("transition.csv")
scatter = pd.read_csv("scatter_tau.csv")

agg = win[win.dataset == "ALL"].pivot(index="theta", columns="rho", values="probability")
plt.figure()
plt.imshow(agg.values, origin="lower", aspect="auto")
plt.xlabel("rho")
plt.ylabel("tau_pre bucket")
plt.colorbar(label="P(winning ticket)")
plt.savefig("winning_prob.png")

plt.figure()
for name, g in scatter.groupby("dataset"):
    plt.scatter(g.tau_pre_mean, g.tau_post_mean, label=name)
plt.plot([0, 1], [0, 1], "--")
plt.xlabel("mean tau_pre")
plt.ylabel("mean tau_post")
plt.legend()
plt.savefig("scatter_tau.png")
)PY";

/// Writes runs.csv, winning_prob.csv, transition.csv, correlation.csv,
/// scatter_tau.csv and plot_reports.py into `dir`.
inline void emit_reports(const std::vector<RunRecord>& records, const std::filesystem::path& dir,
                         ReportOptions opt = {}) {
  using harness_detail::fmt_short;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  if (opt.rho_grid.empty()) {
    for (const auto& r : records)
      if (std::none_of(opt.rho_grid.begin(), opt.rho_grid.end(), [&](double x) { return harness_detail::same_rho(x, r.rho); }))
        opt.rho_grid.push_back(r.rho);
  }
  write_runs_csv(dir / "runs.csv", records);

  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw DataError("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("winning_prob.csv");
    os << "dataset,rho,theta,runs,wins,probability,mean_relative_accuracy\n";
    for (const auto& c : winning_probability(records, opt.theta_grid, opt.bucket_eps, opt.rho_grid))
      os << c.dataset << ',' << fmt_short(c.rho) << ',' << fmt_short(c.theta) << ',' << c.runs << ',' << c.wins << ','
         << fmt_short(c.probability) << ',' << fmt_short(c.mean_relative_accuracy) << '\n';
  }
  {
    auto os = open("transition.csv");
    os << "dataset,kappa,conditioned,reached,probability\n";
    for (const auto& c : transition_probability(records, opt.kappa_grid))
      os << c.dataset << ',' << fmt_short(c.kappa) << ',' << c.conditioned << ',' << c.reached << ','
         << fmt_short(c.probability) << '\n';
  }
  {
    auto os = open("correlation.csv");
    os << "dataset,rho,n,r,p,defined\n";
    for (const auto& c : correlation(records, opt.rho_grid, opt.corr_rho_min, opt.corr_rho_max))
      os << c.dataset << ',' << c.rho << ',' << c.corr.n << ',' << fmt_short(c.corr.r) << ','
         << fmt_short(c.corr.p) << ',' << (c.corr.defined ? 1 : 0) << '\n';
  }
  {
    auto os = open("scatter_tau.csv");
    os << "dataset,rho,runs,tau_pre_mean,tau_post_mean\n";
    for (const auto& s : tau_scatter(records, opt.rho_grid))
      os << s.dataset << ',' << fmt_short(s.rho) << ',' << s.runs << ',' << fmt_short(s.tau_pre_mean) << ','
         << fmt_short(s.tau_post_mean) << '\n';
  }
  {
    auto os = open("plot_reports.py");
    os << kPlotStub;
  }
}

/// Finalizes a sweep directory: sorted runs.csv plus reports and timings,
/// then drops the partial log.
inline void finalize_sweep(const SweepResult& res, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  emit_reports(res.records, dir, report_options(cfg));
  write_timings_csv(dir / "timings.csv", res.records);
  std::error_code ec;
  if (res.failed == 0) std::filesystem::remove(dir / "runs.partial.csv", ec);
}

}  // namespace wlticket
