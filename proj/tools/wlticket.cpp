#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wlticket/bounds.hpp"
#include "wlticket/checkpoint.hpp"
#include "wlticket/dataset_ops.hpp"
#include "wlticket/expressivity.hpp"
#include "wlticket/harness.hpp"
#include "wlticket/pruning.hpp"
#include "wlticket/train.hpp"

namespace fs = std::filesystem;
using namespace wlticket;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kDataError = 2;
constexpr int kPartialFailure = 3;

// A directory in TUDataset layout, or a built-in generator name.
Dataset load_dataset(const std::string& where, std::string name) {
  DatasetSource src;
  const bool builtin = where == "synthetic" || where == "triangle_path" || where == "sifdg_pair";
  if (!builtin) {
    src.path = where;
    src.name = name.empty() ? fs::path(where).lexically_normal().filename().string() : name;
    if (src.name.empty()) src.name = fs::path(where).lexically_normal().parent_path().filename().string();
  } else {
    src.name = where;
  }
  return load_source(src, ExperimentConfig{});
}

struct DatasetArgs {
  std::string path;
  std::string name;

  void add(CLI::App* app) {
    app->add_option("--dataset", path, "TUDataset directory or synthetic|triangle_path|sifdg_pair")->required();
    app->add_option("--name", name, "file prefix inside the dataset directory (default: directory name)");
  }
  Dataset load() const { return load_dataset(path, name); }
};

void print(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wlticket: pruned GNN expressivity experiments"};
  app.require_subcommand(1);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a (dataset, rho, seed) sweep and write CSV reports");
  std::string config_path;
  std::string out_dir = "sweep_out";
  std::optional<std::size_t> workers;
  bool quiet = false;
  sweep->add_option("--config", config_path, "JSON or key = value config file")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--workers", workers, "worker threads (overrides the config)");
  sweep->add_flag("--quiet", quiet, "no per-cell progress");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "evaluate the injectivity bounds");
  BoundInputs bi;
  std::optional<double> gamma;
  bounds->add_option("--N", bi.n_inputs, "distinct inputs")->required();
  bounds->add_option("--rho", bi.rho, "pruning ratio")->required();
  bounds->add_option("--k", bi.k, "minimum support of input differences")->required();
  bounds->add_option("--m", bi.m, "layer width")->required();
  bounds->add_option("--gamma", gamma, "target probability for the width requirement");
  bounds->add_option("--L", bi.mlp_depth, "MLP depth");
  bounds->add_option("--layers", bi.mp_layers, "message-passing layers");
  bounds->add_option("--dataset-size", bi.dataset_size, "graphs in the dataset (enables the GNN bound)");
  bounds->add_option("--max-nodes", bi.max_nodes, "largest graph size");
  bounds->add_option("--classes", bi.classes, "classes (enables the accuracy ceiling)");
  bounds->add_option("--collapsed", bi.collapsed, "collapsed isomorphism types");
  bounds->add_option("--types", bi.types, "isomorphism types");

  // train
  auto* train_cmd = app.add_subcommand("train", "train one (optionally pruned) model and save a checkpoint");
  DatasetArgs train_ds;
  train_ds.add(train_cmd);
  std::string ckpt_out;
  std::uint64_t train_seed = 0;
  double train_rho = 0.0;
  std::size_t train_epochs = 250, train_hidden = 0, train_layers = 2;
  std::string train_variant = "gin", train_act = "relu";
  train_cmd->add_option("--out", ckpt_out, "checkpoint path")->required();
  train_cmd->add_option("--seed", train_seed);
  train_cmd->add_option("--rho", train_rho, "random pruning ratio");
  train_cmd->add_option("--epochs", train_epochs);
  train_cmd->add_option("--hidden", train_hidden);
  train_cmd->add_option("--layers", train_layers);
  train_cmd->add_option("--variant", train_variant);
  train_cmd->add_option("--activation", train_act);

  // tau
  auto* tau = app.add_subcommand("tau", "measure expressivity of a checkpoint on a dataset");
  DatasetArgs tau_ds;
  tau_ds.add(tau);
  std::string ckpt_in;
  std::string tau_mode = "relative";
  bool node_multiset = false;
  tau->add_option("--checkpoint", ckpt_in, "model checkpoint (JSON)")->required();
  tau->add_option("--mode", tau_mode, "relative|absolute");
  tau->add_flag("--node-multiset", node_multiset, "compare node embedding multisets instead of sums");

  // sifdg
  auto* sifdg = app.add_subcommand("sifdg", "list same-structure, different-feature graph pairs");
  DatasetArgs sifdg_ds;
  sifdg_ds.add(sifdg);
  std::size_t node_cap = kDefaultNodeCap;
  sifdg->add_option("--node-cap", node_cap, "skip graphs larger than this");

  // sparsify
  auto* sparsify = app.add_subcommand("sparsify", "injectivity-preserving sparsification of a fresh model");
  DatasetArgs sp_ds;
  sp_ds.add(sparsify);
  SparsifyConfig sp_cfg;
  std::uint64_t sp_seed = 0;
  std::size_t sp_hidden = 0, sp_layers = 2;
  std::string sp_masks;
  sparsify->add_option("--rho-step", sp_cfg.rho_step)->required();
  sparsify->add_option("--k-trials", sp_cfg.k_trials)->required();
  sparsify->add_option("--max-sparsity", sp_cfg.max_sparsity);
  sparsify->add_option("--seed", sp_seed);
  sparsify->add_option("--hidden", sp_hidden);
  sparsify->add_option("--layers", sp_layers);
  sparsify->add_option("--masks-out", sp_masks, "write the mask set here");

  // report
  auto* report = app.add_subcommand("report", "recompute aggregate CSVs from runs.csv");
  std::string runs_path, report_out;
  ReportOptions ropt;
  report->add_option("--runs", runs_path, "runs.csv")->required();
  report->add_option("--out", report_out, "output directory")->required();
  report->add_option("--bucket-eps", ropt.bucket_eps);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*sweep) {
      ExperimentConfig cfg = load_config(config_path);
      if (workers) cfg.workers = *workers;
      cfg.validate();
      const SweepResult res = run_sweep(cfg, fs::path(out_dir), [&](const RunRecord& r) {
        if (!quiet)
          std::fprintf(stderr, "%s rho=%g seed=%llu tau_pre=%.3f tau_post=%.3f acc=%.3f/%.3f %s\n",
                       r.dataset.c_str(), r.rho, static_cast<unsigned long long>(r.seed), r.tau_pre, r.tau_post,
                       r.a_post, r.a_clean, r.ok ? "" : "FAILED");
      });
      finalize_sweep(res, cfg, out_dir);
      std::printf("cells=%zu resumed=%zu failed=%zu out=%s\n", res.records.size(), res.resumed, res.failed,
                  out_dir.c_str());
      return res.failed > 0 ? kPartialFailure : kOk;
    }
    if (*bounds) {
      bi.gamma_target = gamma;
      print(to_json(compute_bounds(bi)));
      return kOk;
    }
    if (*train_cmd) {
      const Dataset ds = train_ds.load();
      ModelSpec spec;
      spec.input_dim = ds.feature_dim;
      spec.num_classes = ds.num_classes;
      spec.hidden = train_hidden;
      spec.mp_layers = train_layers;
      spec.variant = parse_variant(train_variant);
      spec.activation = parse_activation(train_act);
      GnnModel m = GnnModel::init(spec, Rng(train_seed, kInitStream));
      if (train_rho > 0.0)
        m = m.with_masks(random_mask(m.mask_shape(), train_rho, Rng(train_seed, kMaskStream).split(rho_key(train_rho))));
      const DatasetSplit sp = split(ds, SplitFractions{}, 0);
      TrainConfig tc;
      tc.epochs = train_epochs;
      Rng shuffle(train_seed, kShuffleStream);
      train(m, sp.train, tc, shuffle);
      save_model(ckpt_out, m);
      std::printf("test_accuracy=%.6f sparsity=%.6f\n", evaluate(m, sp.test), m.masks().sparsity());
      return kOk;
    }
    if (*tau) {
      const GnnModel m = load_model(ckpt_in);
      const Dataset ds = tau_ds.load();
      if (ds.feature_dim != m.input_dim()) throw DataError("checkpoint input dim does not match the dataset");
      const auto types = isomorphism_type_representatives(ds);
      print(to_json(measure_tau(m, ds, types.representatives, {parse_tolerance_mode(tau_mode), node_multiset})));
      return kOk;
    }
    if (*sifdg) {
      const Dataset ds = sifdg_ds.load();
      const SifdgResult r = sifdg_pairs(ds, node_cap);
      nlohmann::json j = {{"pairs", nlohmann::json::array()}, {"skipped", r.skipped}};
      for (const auto& p : r.pairs) j["pairs"].push_back({{"a", p.a}, {"b", p.b}, {"permutation", p.permutation}});
      print(j);
      return kOk;
    }
    if (*sparsify) {
      const Dataset ds = sp_ds.load();
      ModelSpec spec;
      spec.input_dim = ds.feature_dim;
      spec.num_classes = ds.num_classes;
      spec.hidden = sp_hidden;
      spec.mp_layers = sp_layers;
      const GnnModel m = GnnModel::init(spec, Rng(sp_seed, kInitStream));
      const SparsifyResult r = injectivity_preserving_sparsify(m, ds, sp_cfg, Rng(sp_seed, kMaskStream));
      const GnnModel pruned = m.with_masks(r.masks);
      const auto types = isomorphism_type_representatives(ds);
      const auto c1 = criterion1_check(pruned, ds, types.representatives);
      if (!sp_masks.empty()) save_mask_set(sp_masks, r.masks);
      print({{"sparsity", r.sparsity},
             {"layer_sparsity", r.layer_sparsity},
             {"criterion1_violations", c1.violations.size()},
             {"pairs_checked", c1.pairs_checked}});
      return kOk;
    }
    if (*report) {
      emit_reports(read_runs_csv(runs_path), report_out, ropt);
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kConfigError;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kDataError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  }
  return kOk;
}
