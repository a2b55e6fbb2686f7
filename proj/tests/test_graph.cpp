#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"
#include "wlticket/dataset_ops.hpp"
#include "wlticket/graph.hpp"
#include "wlticket/isomorphism.hpp"
#include "wlticket/tudataset.hpp"

using namespace wlticket;
namespace fs = std::filesystem;
namespace wt = wlticket::testing;

namespace {

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream os(p, std::ios::binary);
  os << body;
}

// 2 graphs: an edge (labels 0,0) and a triangle (labels 3,0,3).
fs::path tiny_dataset(const std::string& tag) {
  const auto dir = wt::fresh_temp_dir(tag);
  write_file(dir / "T_A.txt", "1, 2\n2, 1\n3, 4\n4, 5\n5, 3\n4, 3\n5, 4\n3, 5\n");
  write_file(dir / "T_graph_indicator.txt", "1\n1\n2\n2\n2\n");
  write_file(dir / "T_graph_labels.txt", "-1\n1\n");
  write_file(dir / "T_node_labels.txt", "0\n0\n3\n0\n3\n");
  return dir;
}

Dataset ten_graphs() {
  Dataset ds{"ten", {}, 2, 1};
  for (int i = 0; i < 10; ++i) ds.graphs.push_back(fixtures::path(2 + i % 3, i % 2));
  return ds;
}

}  // namespace

TEST(Graph, ValidatesInput) {
  EXPECT_THROW(Graph(0, {}, Matrix(0, 1), 0), DataError);
  EXPECT_THROW(Graph::from_labels(2, {{0, 5}}, {0, 0}, 1, 0), DataError);
  EXPECT_THROW(Graph(2, {}, Matrix::from_rows({{1}, {0}}), 0), DataError);
  EXPECT_THROW(Graph::from_labels(2, {}, {0, 0}, 1, -1), DataError);
}

TEST(Graph, SymmetricAdjacencyAndDegrees) {
  const Graph s = fixtures::star(3);
  EXPECT_EQ(s.edge_count(), 3u);
  EXPECT_EQ(s.degree(0), 3u);
  EXPECT_TRUE(s.adjacent(2, 0));
  EXPECT_EQ(s.adjacency_matrix(), transpose(s.adjacency_matrix()));
}

TEST(Graph, PermutedIsIsomorphic) {
  Rng rng(3, 0);
  const Graph g = wt::random_graph(6, 0.5, 3, rng);
  std::vector<std::size_t> p{3, 0, 5, 1, 4, 2};
  const Graph h = g.permuted(p);
  EXPECT_TRUE(wt::brute_force_isomorphic(g, h, true));
  EXPECT_TRUE(is_isomorphism(g, h, p, true));
}

TEST(TuDataset, ParsesTinyFixture) {
  const auto dir = tiny_dataset("tiny");
  const Dataset ds = parse_tudataset(dir, "T");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.num_classes, 2u);
  EXPECT_EQ(ds.feature_dim, 2u);  // labels {0, 3} -> indices {0, 1}
  EXPECT_EQ(ds.graphs[0].node_count(), 2u);
  EXPECT_EQ(ds.graphs[0].label(), 0);
  EXPECT_EQ(ds.graphs[1].label(), 1);
  EXPECT_EQ(ds.graphs[1].edge_count(), 3u);
  EXPECT_EQ(ds.graphs[1].node_labels(), (std::vector<std::size_t>{1, 0, 1}));
}

TEST(TuDataset, SingleGraphFixture) {
  const auto dir = wt::fresh_temp_dir("single");
  write_file(dir / "S_A.txt", "1, 2\n2, 1\n");
  write_file(dir / "S_graph_indicator.txt", "1\n1\n");
  write_file(dir / "S_graph_labels.txt", "0\n");
  write_file(dir / "S_node_labels.txt", "0\n0\n");
  const Dataset ds = parse_tudataset(dir, "S");
  EXPECT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.feature_dim, 1u);
  EXPECT_EQ(ds.num_classes, 1u);
}

TEST(TuDataset, ErrorsNameFileAndLine) {
  const auto dir = tiny_dataset("bad");
  write_file(dir / "T_A.txt", "1, 2\n2, 999\n");
  try {
    parse_tudataset(dir, "T");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("T_A.txt"), std::string::npos);
  }
  write_file(dir / "T_A.txt", "1, 2\n2, x\n");
  try {
    parse_tudataset(dir, "T");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("T_A.txt"), std::string::npos);
    EXPECT_NE(msg.find('2'), std::string::npos);
  }
  fs::remove(dir / "T_graph_labels.txt");
  EXPECT_THROW(parse_tudataset(dir, "T"), DataError);
}

TEST(TuDataset, MissingNodeLabelsFallsBackToDegree) {
  const auto dir = tiny_dataset("nolabels");
  fs::remove(dir / "T_node_labels.txt");
  const Dataset ds = parse_tudataset(dir, "T");
  // Degrees {1, 2} -> two one-hot columns.
  EXPECT_EQ(ds.feature_dim, 2u);
  EXPECT_EQ(ds.graphs[1].node_labels(), (std::vector<std::size_t>{1, 1, 1}));
}

TEST(TuDataset, Mutag) {
  const Dataset ds = parse_tudataset(wt::data_dir() / "MUTAG", "MUTAG");
  EXPECT_EQ(ds.size(), 188u);
  EXPECT_EQ(ds.num_classes, 2u);
  EXPECT_EQ(ds.feature_dim, 7u);
  EXPECT_NEAR(ds.mean_node_count(), 17.9, 0.05);
}

TEST(TuDataset, RoundTripIdentity) {
  const Dataset ds = parse_tudataset(wt::data_dir() / "MUTAG", "MUTAG");
  const auto dir = wt::fresh_temp_dir("roundtrip");
  write_tudataset(ds, dir, "MUTAG");
  EXPECT_EQ(parse_tudataset(dir, "MUTAG"), ds);
  Rng rng(4, 0);
  Dataset small{"small", {}, 3, 4};
  for (int i = 0; i < 12; ++i) small.graphs.push_back(wt::random_graph(2 + i % 5, 0.6, 4, rng, i % 3));
  // Every label must appear for the vocabulary to match.
  small.graphs.push_back(Graph::from_labels(4, {{0, 1}}, {0, 1, 2, 3}, 4, 0));
  write_tudataset(small, dir, "R");
  Dataset back = parse_tudataset(dir, "R");
  back.name = small.name;
  EXPECT_EQ(back, small);
}

TEST(Split, FloorAllocation) {
  const auto s = split(ten_graphs(), {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
  const Dataset mutag = parse_tudataset(wt::data_dir() / "MUTAG", "MUTAG");
  const auto m = split(mutag, {0.8, 0.1, 0.1}, 0);
  EXPECT_EQ(m.train.size(), 152u);
  EXPECT_EQ(m.val.size(), 18u);
  EXPECT_EQ(m.test.size(), 18u);
}

TEST(Split, DeterministicPartition) {
  const Dataset ds = ten_graphs();
  const auto a = split(ds, {0.6, 0.2, 0.2}, 3);
  const auto b = split(ds, {0.6, 0.2, 0.2}, 3);
  EXPECT_EQ(a.train_idx, b.train_idx);
  EXPECT_EQ(a.test_idx, b.test_idx);
  std::vector<std::size_t> all;
  for (const auto* v : {&a.train_idx, &a.val_idx, &a.test_idx}) all.insert(all.end(), v->begin(), v->end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(ds.size());
  std::iota(expect.begin(), expect.end(), std::size_t{0});
  EXPECT_EQ(all, expect);
}

TEST(Split, Errors) {
  EXPECT_THROW(split(Dataset{"e", {}, 2, 1}, {}, 0), DomainError);
  EXPECT_THROW(split(ten_graphs(), {0.5, 0.1, 0.1}, 0), DomainError);
  // A class with fewer graphs than partitions is fine.
  Dataset tiny{"t", {fixtures::path(2, 0), fixtures::path(3, 1)}, 2, 1};
  EXPECT_NO_THROW(split(tiny, {0.8, 0.1, 0.1}, 0));
}

TEST(Sifdg, TwoNodeGraphs) {
  Dataset ds{"two", {}, 2, 2};
  ds.graphs.push_back(Graph::from_labels(2, {{0, 1}}, {0, 0}, 2, 0));
  ds.graphs.push_back(Graph::from_labels(2, {{0, 1}}, {0, 1}, 2, 1));
  const auto r = sifdg_pairs(ds);
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].a, 0u);
  EXPECT_EQ(r.pairs[0].b, 1u);
}

TEST(Sifdg, NonIsomorphicStructuresGiveNothing) {
  Dataset ds{"n", {fixtures::path(4), fixtures::star(3), fixtures::cycle(4)}, 1, 1};
  EXPECT_TRUE(sifdg_pairs(ds).pairs.empty());
}

TEST(Sifdg, SixCyclesDifferingAtOneNode) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i < 6; ++i) e.emplace_back(i, (i + 1) % 6);
  Dataset ds{"c6", {}, 1, 2};
  ds.graphs.push_back(Graph::from_labels(6, e, {0, 0, 0, 0, 0, 0}, 2, 0));
  ds.graphs.push_back(Graph::from_labels(6, e, {0, 0, 0, 1, 0, 0}, 2, 0));
  const auto r = sifdg_pairs(ds);
  ASSERT_EQ(r.pairs.size(), 1u);
  const auto& p = r.pairs[0].permutation;
  EXPECT_EQ(p, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  EXPECT_TRUE(wt::brute_force_isomorphic(ds.graphs[0], ds.graphs[1], false));
  EXPECT_FALSE(wt::brute_force_isomorphic(ds.graphs[0], ds.graphs[1], true));
}

TEST(Sifdg, PairsPassIndependentChecks) {
  Rng rng(5, 0);
  Dataset ds{"r", {}, 1, 2};
  for (int i = 0; i < 6; ++i) {
    const Graph base = wt::random_graph(5, 0.5, 2, rng);
    ds.graphs.push_back(base);
    std::vector<std::size_t> p{4, 2, 0, 3, 1};
    auto labels = base.permuted(p).node_labels();
    labels[0] = 1 - labels[0];
    ds.graphs.push_back(Graph::from_labels(5, base.permuted(p).edges(), labels, 2, 0));
  }
  const auto r = sifdg_pairs(ds);
  EXPECT_FALSE(r.pairs.empty());
  for (const auto& pr : r.pairs) {
    const Graph& a = ds.graphs[pr.a];
    const Graph& b = ds.graphs[pr.b];
    for (std::size_t u = 0; u < a.node_count(); ++u)
      for (std::size_t v = 0; v < a.node_count(); ++v)
        EXPECT_EQ(a.adjacent(u, v), b.adjacent(pr.permutation[u], pr.permutation[v]));
    EXPECT_FALSE(wt::brute_force_isomorphic(a, b, true));
  }
}

TEST(Sifdg, NodeCapSkips) {
  Dataset ds{"cap", {fixtures::cycle(20), fixtures::cycle(20)}, 1, 1};
  const auto r = sifdg_pairs(ds, 16);
  EXPECT_EQ(r.skipped.size(), 2u);
  EXPECT_TRUE(r.pairs.empty());
}
