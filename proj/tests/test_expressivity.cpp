#include <gtest/gtest.h>

#include "support.hpp"
#include "wlticket/bounds.hpp"
#include "wlticket/expressivity.hpp"
#include "wlticket/pruning.hpp"
#include "wlticket/representatives.hpp"
#include "wlticket/stats.hpp"
#include "wlticket/synthetic.hpp"

using namespace wlticket;
using namespace wlticket::synthetic;
namespace wt = wlticket::testing;

namespace {

GnnModel model_for(const Dataset& ds, std::size_t hidden, std::uint64_t seed,
                   Activation act = Activation::softsign) {
  ModelSpec s;
  s.input_dim = ds.feature_dim;
  s.num_classes = ds.num_classes;
  s.hidden = hidden;
  s.activation = act;
  return GnnModel::init(s, Rng(seed, 0));
}

std::vector<std::size_t> all_indices(const Dataset& ds) {
  std::vector<std::size_t> v(ds.size());
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

TEST(Tau, ZeroMasksCollapseEverything) {
  const Dataset ds = random_types({}, 1);
  GnnModel m = model_for(ds, 4, 2);
  MaskSet zero = MaskSet::ones(m.mask_shape());
  for (auto& l : zero.layers)
    for (auto& w : l) w = Matrix(w.rows(), w.cols(), 0.0);
  const auto reps = isomorphism_type_representatives(ds).representatives;
  const auto r = measure_tau(m.with_masks(zero), ds, reps);
  EXPECT_EQ(r.tau, 0.0);
  EXPECT_EQ(r.distinguishable, 0u);
  EXPECT_EQ(r.indistinguishable_pairs.size(), reps.size() * (reps.size() - 1) / 2);
}

TEST(Tau, DegenerateSingleRepresentative) {
  const Dataset ds = triangle_vs_path(3);
  const GnnModel m = model_for(ds, 2, 3);
  const std::vector<std::size_t> one{0};
  const auto r = measure_tau(m, ds, one);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.tau, 1.0);
}

TEST(Tau, MatchesPairwiseDefinition) {
  TypesConfig tc;
  tc.types = 12;
  const Dataset ds = random_types(tc, 4);
  const auto reps = isomorphism_type_representatives(ds).representatives;
  for (auto act : {Activation::relu, Activation::softsign}) {
    const GnnModel m = model_for(ds, 2, 5, act).with_masks(random_mask(model_for(ds, 2, 5).mask_shape(), 0.5, Rng(6, 0)));
    std::vector<std::vector<double>> sums;
    for (auto i : reps) sums.push_back(graph_sum(m.forward(ds.graphs[i]).h.back()));
    std::size_t ok = 0;
    for (std::size_t a = 0; a < reps.size(); ++a) {
      bool alone = true;
      for (std::size_t b = 0; b < reps.size(); ++b)
        if (a != b && indistinguishable(sums[a], sums[b])) alone = false;
      ok += alone;
    }
    EXPECT_DOUBLE_EQ(measure_tau(m, ds, reps).tau, static_cast<double>(ok) / static_cast<double>(reps.size()));
  }
}

TEST(Tau, IsomorphicCopiesNeverSeparate) {
  const Dataset ds = random_types({}, 7);
  const GnnModel m = model_for(ds, 8, 8);
  const auto r = measure_tau(m, ds, all_indices(ds));
  const auto types = isomorphism_type_representatives(ds);
  // Each graph collides at least with its own copies.
  EXPECT_EQ(r.distinguishable, 0u);
  EXPECT_GE(r.indistinguishable_pairs.size(), types.type_count() * 6);
}

TEST(Criterion1, UnprunedSoftsignHasNoViolations) {
  const Dataset ds = random_types({}, 9);
  const GnnModel m = model_for(ds, 1, 10);
  const auto reps = isomorphism_type_representatives(ds).representatives;
  const auto c = criterion1_check(m, ds, reps);
  EXPECT_GT(c.pairs_checked, 0u);
  EXPECT_TRUE(c.violations.empty());
}

TEST(GradientDiversity, HandCases) {
  const Matrix g = Matrix::from_rows({{1, 2}, {3, 4}});
  EXPECT_DOUBLE_EQ(gradient_diversity(std::vector<Matrix>{g, g}), 0.5);
  const Matrix e1 = Matrix::from_rows({{1, 0}}), e2 = Matrix::from_rows({{0, 1}});
  EXPECT_DOUBLE_EQ(gradient_diversity(std::vector<Matrix>{e1, e2}), 1.0);
  EXPECT_TRUE(std::isinf(gradient_diversity(std::vector<Matrix>{g, scale(g, -1.0)})));
  EXPECT_THROW(gradient_diversity(std::vector<Matrix>{Matrix(1, 1, 0.0)}), DomainError);
  EXPECT_THROW(gradient_diversity(std::vector<Matrix>{}), DomainError);
  EXPECT_DOUBLE_EQ(gradient_diversity(std::vector<Matrix>{g}), 1.0);
}

TEST(Zeta, IntervalContainsDiversityOnRandomPairs) {
  Rng rng(11, 0);
  int contained = 0, total = 0;
  for (int t = 0; t < 30; ++t) {
    const Graph a = wt::random_graph(5, 0.5, 3, rng, 0);
    const Graph b = wt::random_graph(6, 0.5, 3, rng, 1);
    ModelSpec s;
    s.input_dim = 3;
    s.hidden = 4;
    s.activation = Activation::softsign;
    const GnnModel m = GnnModel::init(s, Rng(100 + static_cast<std::uint64_t>(t), 0));
    const auto z = gdiv_lower_bound(m, a, b);
    ++total;
    contained += z.contains;
    EXPECT_LE(std::abs(z.cross), z.cross_bound * (1 + 1e-12));
    EXPECT_LE(z.zeta_plus, z.literal_zeta_plus);
  }
  EXPECT_EQ(contained, total);
}

TEST(Zeta, OrthogonalGradientsGiveOne) {
  // H_1 = e1, H_2 = e2, identity aggregation and orthogonal dZ rows.
  const Matrix h1 = Matrix::from_rows({{1, 0}}), h2 = Matrix::from_rows({{0, 1}});
  const Matrix i1 = Matrix::identity(1);
  const Matrix dz1 = Matrix::from_rows({{1, 0}}), dz2 = Matrix::from_rows({{0, 1}});
  const auto z = gdiv_lower_bound(h1, h2, i1, i1, dz1, dz2);
  EXPECT_DOUBLE_EQ(z.delta_s, 1.0);
  EXPECT_EQ(z.cross, 0.0);
  EXPECT_EQ(z.cross_bound, 0.0);
  EXPECT_DOUBLE_EQ(z.zeta_plus, 1.0);
  EXPECT_DOUBLE_EQ(z.zeta_minus, 1.0);
  EXPECT_TRUE(z.contains);
}

TEST(Zeta, IdenticalGradientsGiveHalf) {
  const Matrix h = Matrix::from_rows({{1, 2}}), a = Matrix::identity(1), dz = Matrix::from_rows({{0.5, -1}});
  const auto z = gdiv_lower_bound(h, h, a, a, dz, dz);
  EXPECT_DOUBLE_EQ(z.delta_s, 0.5);
  EXPECT_TRUE(z.unbounded);
  EXPECT_TRUE(z.contains);
  EXPECT_NEAR(z.cos2_sum, 1.0, 1e-15);
  EXPECT_THROW(gdiv_lower_bound(h, h, a, a, Matrix(1, 2, 0.0), Matrix(1, 2, 0.0)), DomainError);
}

TEST(Bounds, InjectivityValues) {
  EXPECT_DOUBLE_EQ(injectivity_bound(3, 0.5, 2, 2).raw, 0.8125);
  const auto neg = injectivity_bound(10, 0.9, 1, 1);
  EXPECT_DOUBLE_EQ(neg.raw, 1.0 - 45 * 0.9);
  EXPECT_EQ(neg.clamped, 0.0);
  EXPECT_DOUBLE_EQ(mlp_bound(injectivity_bound(3, 0.5, 2, 2), 2).raw, 0.8125 * 0.8125);
  EXPECT_THROW(injectivity_bound(1, 0.5, 1, 1), DomainError);
  EXPECT_THROW(injectivity_bound(3, 1.0, 1, 1), DomainError);
  EXPECT_THROW(injectivity_bound(3, 0.5, 0, 1), DomainError);
}

TEST(Bounds, GnnBoundAndWidth) {
  const auto g = gnn_bound(2, 2, 0.5, 1, 4, 2, 2);
  EXPECT_DOUBLE_EQ(g.base_raw, 1.0 - 6 * 0.0625);
  EXPECT_DOUBLE_EQ(g.value.raw, std::pow(0.625, 4));
  EXPECT_EQ(required_width(0.99, 3, 1, 0.5), 9u);
  EXPECT_EQ(required_width(0.01, 2, 1, 0.5), 1u);
  // The returned width meets the target and one less does not.
  for (double rho : {0.2, 0.5, 0.8}) {
    const auto m = required_width(0.95, 20, 2, rho);
    EXPECT_GE(injectivity_bound(20, rho, 2, m).raw, 0.95 - 1e-12);
    if (m > 1) { EXPECT_LT(injectivity_bound(20, rho, 2, m - 1).raw, 0.95); }
  }
}

TEST(Bounds, AccuracyCeiling) {
  EXPECT_DOUBLE_EQ(accuracy_ceiling(2, 1, 2), 0.75);
  EXPECT_DOUBLE_EQ(accuracy_ceiling(2, 0, 5), 1.0);
  EXPECT_DOUBLE_EQ(accuracy_ceiling(3, 3, 3), 1.0 / 3.0);
  EXPECT_THROW(accuracy_ceiling(2, 4, 3), DomainError);
  EXPECT_THROW(accuracy_ceiling(0, 0, 3), DomainError);
}

TEST(Bounds, MonteCarloRateRespectsBound) {
  const auto r = injectivity_monte_carlo(3, 0.5, 1, 4, 2000, Rng(12, 0));
  EXPECT_EQ(r.trials, 2000u);
  EXPECT_TRUE(r.consistent());
  EXPECT_DOUBLE_EQ(r.gamma.raw, 1.0 - 3 * 0.0625);
}

TEST(Bounds, JsonSchema) {
  BoundInputs in;
  in.n_inputs = 3;
  in.k = 2;
  in.m = 2;
  in.gamma_target = 0.99;
  in.classes = 2;
  in.collapsed = 1;
  in.types = 2;
  const auto j = to_json(compute_bounds(in));
  EXPECT_EQ(j.at("schema"), "wlticket.bounds");
  EXPECT_EQ(j.at("version"), kReportSchemaVersion);
  EXPECT_DOUBLE_EQ(j.at("gamma").at("raw").get<double>(), 0.8125);
  EXPECT_TRUE(j.at("gamma_gnn").is_null());
  EXPECT_EQ(j.at("m_min").get<std::size_t>(), required_width(0.99, 3, 2, 0.5));
  EXPECT_DOUBLE_EQ(j.at("accuracy_ceiling").get<double>(), 0.75);
  for (const char* key : {"N", "rho", "k", "m", "L", "M_layers", "gamma_target", "C", "U", "I"})
    EXPECT_TRUE(j.at("inputs").contains(key)) << key;
}

TEST(Stats, StudentTCdfMatchesReference) {
  // Reference values from scipy.stats.t.cdf.
  const struct {
    double t, df, cdf;
  } cases[] = {{0.5, 1, 0.6475836176504333},  {-1.3, 3, 0.14223375436394847}, {2.0, 10, 0.9633059826146297},
               {3.5, 4, 0.9875519182698886},  {-0.2, 30, 0.4214150785296623}, {1.96, 1000, 0.9748634075221256}};
  for (const auto& c : cases) EXPECT_NEAR(student_t_cdf(c.t, c.df), c.cdf, 1e-10) << c.t << " " << c.df;
  EXPECT_EQ(student_t_cdf(0.0, 5), 0.5);
  EXPECT_THROW(student_t_cdf(1.0, 0.0), DomainError);
}

TEST(Stats, PearsonMatchesReference) {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 5};
  const auto c = pearson(x, y);
  EXPECT_NEAR(c.r, 0.8315218406202999, 1e-12);
  EXPECT_NEAR(c.p, 0.1684781593797, 1e-10);
  const std::vector<double> x6{1, 2, 3, 4, 5, 6}, y6{2, 1, 4, 3, 7, 5};
  const auto c6 = pearson(x6, y6);
  EXPECT_NEAR(c6.r, 0.7917946548886297, 1e-12);
  EXPECT_NEAR(c6.p, 0.06051140336275659, 1e-10);
  const std::vector<double> lin{3, 5, 7, 9};
  EXPECT_DOUBLE_EQ(pearson(x, lin).r, 1.0);
  EXPECT_EQ(pearson(x, lin).p, 0.0);
  const std::vector<double> flat{2, 2, 2, 2};
  EXPECT_FALSE(pearson(x, flat).defined);
  EXPECT_THROW(pearson(x, x6), DomainError);
}

TEST(Noncolinearity, WidthOneIsAlwaysColinear) {
  const Dataset ds = random_types({}, 13);
  const auto c = colinear_pairs(model_for(ds, 1, 14), ds);
  EXPECT_GT(c.pairs, 0u);
  EXPECT_EQ(c.colinear, c.pairs);
  NoncolinearityConfig cfg;
  cfg.width = 0;
  EXPECT_THROW(noncolinearity_check(ds, cfg, Rng(0, 0)), DomainError);
}

TEST(Noncolinearity, WideLayersAvoidColinearity) {
  const Dataset ds = random_types({}, 15);
  NoncolinearityConfig cfg;
  cfg.width = 16;
  cfg.trials = 5;
  const auto r = noncolinearity_check(ds, cfg, Rng(16, 0));
  EXPECT_EQ(r.trials, 5u);
  EXPECT_GT(r.pairs, 0u);
  EXPECT_LT(r.rate, 0.05);
  EXPECT_GE(r.realized_n, 2u);
}

TEST(TauJson, Fields) {
  ExpressivityReport r;
  r.tau = 0.5;
  r.representatives = {0, 3};
  r.indistinguishable_pairs = {{0, 3}};
  const auto j = to_json(r);
  EXPECT_EQ(j.at("schema"), "wlticket.tau");
  EXPECT_EQ(j.at("tau"), 0.5);
  EXPECT_EQ(j.at("indistinguishable_pairs")[0][1], 3);
  EXPECT_EQ(j.at("tolerance_mode"), "relative");
}
