#include <gtest/gtest.h>

#include "support.hpp"
#include "wlticket/checkpoint.hpp"
#include "wlticket/dataset_ops.hpp"
#include "wlticket/gnn.hpp"
#include "wlticket/pruning.hpp"
#include "wlticket/synthetic.hpp"
#include "wlticket/train.hpp"
#include "wlticket/tudataset.hpp"

using namespace wlticket;
using namespace wlticket::synthetic;
namespace wt = wlticket::testing;

namespace {

ModelSpec small_spec(std::size_t dim, Activation act = Activation::softsign, Variant v = Variant::gin) {
  ModelSpec s;
  s.input_dim = dim;
  s.hidden = 4;
  s.activation = act;
  s.variant = v;
  return s;
}

// GIN forward with explicit loops: h' = mlp((1 + eps) h_v + sum_{u in N(v)} h_u).
std::vector<double> naive_readout(const GnnModel& m, const Graph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::vector<double>> h(n);
  for (std::size_t v = 0; v < n; ++v) h[v].assign(g.features().row(v).begin(), g.features().row(v).end());
  std::vector<double> out;
  auto sum_into = [&] {
    for (std::size_t c = 0; c < h[0].size(); ++c) {
      double s = 0.0;
      for (std::size_t v = 0; v < n; ++v) s += h[v][c];
      out.push_back(s);
    }
  };
  sum_into();
  for (const auto& layer : m.layers()) {
    std::vector<std::vector<double>> x(n, std::vector<double>(h[0].size(), 0.0));
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t c = 0; c < h[v].size(); ++c) x[v][c] = (1.0 + layer.epsilon) * h[v][c];
      for (auto u : g.neighbors(v))
        for (std::size_t c = 0; c < h[u].size(); ++c) x[v][c] += h[u][c];
    }
    for (const auto& mlp : layer.mlp) {
      for (auto& row : x) {
        std::vector<double> y(mlp.out(), 0.0);
        for (std::size_t o = 0; o < mlp.out(); ++o) {
          for (std::size_t i = 0; i < mlp.in(); ++i) y[o] += row[i] * mlp.weights()(i, o) * mlp.mask()(i, o);
          y[o] = activate(m.activation(), y[o]);
        }
        row = y;
      }
    }
    h = x;
    sum_into();
  }
  return out;
}

}  // namespace

TEST(Activation, ValuesAndDerivatives) {
  EXPECT_EQ(activate(Activation::relu, -2.0), 0.0);
  EXPECT_EQ(activate(Activation::relu, 3.0), 3.0);
  EXPECT_DOUBLE_EQ(activate(Activation::leaky_relu, -2.0), -2.0 * kLeakyAlpha);
  EXPECT_DOUBLE_EQ(activate(Activation::softsign, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(activate_grad(Activation::softsign, 1.0), 0.25);
  EXPECT_EQ(parse_activation("leaky_relu"), Activation::leaky_relu);
  EXPECT_THROW(parse_activation("tanh"), ConfigError);
  EXPECT_EQ(parse_variant("gcn"), Variant::gcn);
}

TEST(Forward, MatchesLoopImplementation) {
  Rng rng(1, 0);
  for (auto act : {Activation::relu, Activation::leaky_relu, Activation::softsign}) {
    GnnModel m = GnnModel::init(small_spec(3, act), Rng(2, 0));
    m.layers_mut()[0].epsilon = 0.3;
    m = m.with_masks(random_mask(m.mask_shape(), 0.4, Rng(3, 0)));
    for (int t = 0; t < 5; ++t) {
      const Graph g = wt::random_graph(6, 0.4, 3, rng);
      const auto ref = naive_readout(m, g);
      const Matrix r = m.forward(g).readout;
      ASSERT_EQ(r.cols(), ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(r(0, i), ref[i], 1e-12);
    }
  }
}

TEST(Forward, ZeroMasksLeaveOnlyInputSums) {
  const Graph g = fixtures::path(4);
  GnnModel m = GnnModel::init(small_spec(1), Rng(4, 0));
  MaskSet zero = MaskSet::ones(m.mask_shape());
  for (auto& l : zero.layers)
    for (auto& w : l) w = Matrix(w.rows(), w.cols(), 0.0);
  const Matrix r = m.with_masks(zero).forward(g).readout;
  EXPECT_EQ(r(0, 0), 4.0);
  for (std::size_t i = 1; i < r.cols(); ++i) EXPECT_EQ(r(0, i), 0.0);
}

TEST(Forward, SingleNodeByHand) {
  MpLayer l;
  l.epsilon = 0.5;
  l.mlp.emplace_back(Matrix::from_rows({{2.0}}));
  const GnnModel m(Activation::relu, {l}, Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}), Matrix(1, 2, 0.0));
  const Graph g = Graph::from_labels(1, {}, {0}, 1, 0);
  const auto fp = m.forward(g);
  EXPECT_EQ(fp.readout, Matrix::from_rows({{1.0, 3.0}}));
  EXPECT_EQ(m.predict(g), 1u);
}

TEST(Forward, TriangleAndPathDiffer) {
  const GnnModel m = GnnModel::init(small_spec(1), Rng(5, 0));
  const Matrix a = m.forward(fixtures::triangle()).readout;
  const Matrix b = m.forward(fixtures::path(3)).readout;
  EXPECT_GT(max_abs(subtract(a, b).values()), 1e-6);
}

TEST(Forward, InvariantUnderNodePermutation) {
  Rng rng(6, 0);
  const GnnModel m = GnnModel::init(small_spec(2, Activation::relu), Rng(7, 0));
  const Graph g = wt::random_graph(7, 0.4, 2, rng);
  const Graph h = g.permuted({6, 2, 4, 0, 1, 5, 3});
  const Matrix a = m.forward(g).readout, b = m.forward(h).readout;
  for (std::size_t i = 0; i < a.cols(); ++i) EXPECT_NEAR(a(0, i), b(0, i), 1e-12);
}

TEST(Forward, RejectsWrongFeatureDim) {
  const GnnModel m = GnnModel::init(small_spec(2), Rng(8, 0));
  EXPECT_THROW(m.forward(fixtures::path(3)), DomainError);
}

TEST(Backward, FiniteDifferencesAllVariants) {
  Rng rng(9, 0);
  for (auto v : {Variant::gin, Variant::gcn}) {
    for (auto act : {Activation::softsign, Activation::relu, Activation::leaky_relu}) {
      int accepted = 0;
      for (std::uint64_t s = 0; accepted < 3 && s < 500; ++s) {
        GnnModel m = GnnModel::init(small_spec(3, act, v), Rng(10 + s, 0));
        m = m.with_masks(random_mask(m.mask_shape(), 0.3, Rng(100 + s, 0)));
        const Graph g = wt::random_graph(5, 0.5, 3, rng, static_cast<int>(s % 2));
        if (act != Activation::softsign && wt::min_live_preactivation(m, g) < 1e-4) continue;
        ++accepted;
        const auto r = wt::finite_difference_check(m, g, g.label());
        EXPECT_LT(r.max_rel_err, 1e-6);
        EXPECT_TRUE(r.masked_zero);
        EXPECT_GT(r.checked, 0u);
      }
      EXPECT_EQ(accepted, 3);
    }
  }
}

TEST(Backward, LossMatchesForward) {
  const GnnModel m = GnnModel::init(small_spec(1), Rng(11, 0));
  const Graph g = fixtures::star(3, 1);
  EXPECT_NEAR(m.backward(m.forward(g), 1).loss, m.loss(g, 1), 1e-15);
  EXPECT_THROW(m.backward(m.forward(g), 2), DomainError);
}

TEST(Checkpoint, RoundTripIsExact) {
  GnnModel m = GnnModel::init(small_spec(3, Activation::leaky_relu, Variant::gcn), Rng(12, 0));
  m = m.with_masks(random_mask(m.mask_shape(), 0.5, Rng(13, 0)));
  const auto dir = wt::fresh_temp_dir("ckpt");
  save_model(dir / "m.json", m);
  EXPECT_EQ(load_model(dir / "m.json"), m);
  EXPECT_EQ(model_from_json(model_to_json(m)), m);
  std::ofstream(dir / "bad.json") << "{\"version\": 99}";
  EXPECT_THROW(load_model(dir / "bad.json"), DataError);
  EXPECT_THROW(load_model(dir / "missing.json"), DataError);
}

TEST(Train, DeterministicAndRespectsMasks) {
  const Dataset ds = triangle_vs_path(5);
  GnnModel base = GnnModel::init(small_spec(1, Activation::relu), Rng(14, 0));
  base = base.with_masks(random_mask(base.mask_shape(), 0.5, Rng(15, 0)));
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 4;
  GnnModel a = base, b = base;
  Rng ra(16, 0), rb(16, 0);
  const auto ta = train(a, ds, cfg, ra);
  train(b, ds, cfg, rb);
  EXPECT_EQ(a, b);
  EXPECT_EQ(ta.loss_trace.size(), 20u);
  EXPECT_EQ(a.masks(), base.masks());
  for (std::size_t k = 0; k < a.layers().size(); ++k)
    for (const auto& mlp : a.layers()[k].mlp)
      for (std::size_t i = 0; i < mlp.weights().size(); ++i)
        if (mlp.mask().values()[i] == 0.0) { EXPECT_EQ(mlp.weights().values()[i], 0.0); }
}

TEST(Train, SingleClassLossVanishes) {
  Dataset ds{"one", {fixtures::path(3), fixtures::triangle(), fixtures::star(3)}, 2, 1};
  GnnModel m = GnnModel::init(small_spec(1), Rng(17, 0));
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.adam.lr = 0.05;
  Rng r(18, 0);
  const auto t = train(m, ds, cfg, r);
  EXPECT_LT(t.loss_trace.back(), 1e-2);
  EXPECT_EQ(evaluate(m, ds), 1.0);
}

TEST(Train, FitsMutagSubset) {
  const Dataset full = parse_tudataset(wt::data_dir() / "MUTAG", "MUTAG");
  const Dataset ds = full.subset(std::vector<std::size_t>{0,  5,  10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65,
                                                          70, 75, 80, 85, 90, 95, 100, 105, 110, 115, 120, 125, 130,
                                                          135, 140, 145, 150, 155, 160, 165, 170, 175, 180, 185, 1, 2});
  ModelSpec spec = small_spec(ds.feature_dim, Activation::softsign);
  spec.hidden = 16;
  GnnModel m = GnnModel::init(spec, Rng(19, 0));
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 8;
  Rng r(20, 0);
  train(m, ds, cfg, r);
  EXPECT_GE(evaluate(m, ds), 0.9);
}

TEST(Evaluate, CountsArgmaxHits) {
  MpLayer l;
  l.mlp.emplace_back(Matrix::from_rows({{1.0}}));
  // Logit 1 grows with the node count, logit 0 is fixed at 2.5.
  const GnnModel m(Activation::relu, {l}, Matrix::from_rows({{0.0, 0.5}, {0.0, 0.0}}), Matrix::from_rows({{2.5, 0.0}}));
  Dataset ds{"e", {fixtures::path(3, 0), fixtures::path(6, 1), fixtures::path(7, 0), fixtures::path(5, 0)}, 2, 1};
  EXPECT_DOUBLE_EQ(evaluate(m, ds), 0.75);
  EXPECT_EQ(m.predict(fixtures::path(5)), 0u);  // tie goes to class 0
  EXPECT_THROW(evaluate(m, Dataset{"x", {}, 2, 1}), DomainError);
}
