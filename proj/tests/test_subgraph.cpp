#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "fraudgraph/subgraph.hpp"
#include "helpers.hpp"

using namespace fraudgraph;
using fgtest::tx;

namespace {

std::string pad(int i) {
  char b[16];
  std::snprintf(b, sizeof b, "n%03d", i);
  return b;
}

bool connected_from_center(const Subgraph& s) {
  auto bfs = detail::bfs_local(detail::undirected_local_adjacency(s), 0);
  return std::all_of(bfs.dist.begin(), bfs.dist.end(), [](int d) { return d >= 0; });
}

}  // namespace

TEST(SampleKhop, IsolatedCenter) {
  auto g = fgtest::graph_of({tx("t", "a", "b", "1"), tx("u", "c", "c", "1")});
  auto s = sample_khop(g, "c", SamplingConfig{});
  EXPECT_EQ(s.nodes, std::vector<NodeId>{g.id("c")});
  ASSERT_EQ(s.edges.size(), 1u);  // the self-transfer is its only induced edge
  EXPECT_EQ(s.edges[0].src, s.edges[0].dst);
}

TEST(SampleKhop, StarKeepsTopTenAverages) {
  std::vector<RawTransaction> txs;
  for (int i = 1; i <= 12; ++i) txs.push_back(tx("t" + std::to_string(i), "v", pad(i), std::to_string(i)));
  auto g = fgtest::graph_of(txs);
  SamplingConfig cfg;
  cfg.hops = 1;
  cfg.neighbors_per_hop = 10;
  auto s = sample_khop(g, "v", cfg);
  std::set<std::string> got;
  for (std::size_t i = 1; i < s.nodes.size(); ++i) got.insert(g.name(s.nodes[i]));
  std::set<std::string> want;
  for (int i = 3; i <= 12; ++i) want.insert(pad(i));
  EXPECT_EQ(got, want);
}

TEST(SampleKhop, EqualAverageBreaksOnTotal) {
  // x: 10 transfers of 5 (total 50), y: 1 transfer of 5 (total 5); K = 1.
  std::vector<RawTransaction> txs;
  for (int i = 0; i < 10; ++i) txs.push_back(tx("x" + std::to_string(i), "v", "y_big", "5"));
  txs.push_back(tx("y", "a_small", "v", "5"));
  auto g = fgtest::graph_of(txs);
  SamplingConfig cfg;
  cfg.hops = 1;
  cfg.neighbors_per_hop = 1;
  auto s = sample_khop(g, "v", cfg);
  ASSERT_EQ(s.nodes.size(), 2u);
  EXPECT_EQ(g.name(s.nodes[1]), "y_big");
}

TEST(SampleKhop, AverageUsesBothDirections) {
  // u: out 10 (1 tx) + in 2 (1 tx) -> 6; w: one transfer of 7 -> 7.
  auto g = fgtest::graph_of({tx("1", "v", "u", "10"), tx("2", "u", "v", "2"), tx("3", "v", "w", "7")});
  SamplingConfig cfg;
  cfg.hops = 1;
  cfg.neighbors_per_hop = 1;
  EXPECT_EQ(g.name(sample_khop(g, "v", cfg).nodes[1]), "w");
}

TEST(SampleKhop, UnknownCenter) {
  auto g = fgtest::graph_of({tx("t", "a", "b", "1")});
  EXPECT_THROW(sample_khop(g, "zzz", SamplingConfig{}), NotFoundError);
  EXPECT_THROW(sample_khop(g, NodeId{99}, SamplingConfig{}), NotFoundError);
}

TEST(SampleKhop, HopsAndInducedEdges) {
  // v - a - b chain plus a chord v -> b seen only through induced edges
  auto g = fgtest::graph_of({tx("1", "v", "a", "3"), tx("2", "a", "b", "2"), tx("3", "b", "c", "1")});
  SamplingConfig cfg;
  cfg.hops = 2;
  auto s = sample_khop(g, "v", cfg);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.hop_of(g.id("v")), 0);
  EXPECT_EQ(s.hop_of(g.id("a")), 1);
  EXPECT_EQ(s.hop_of(g.id("b")), 2);
  EXPECT_EQ(s.edges.size(), 2u);
}

TEST(StructuralImportance, ClosedForms) {
  EXPECT_EQ(structural_importance(FlowStats{0, 0, 0, 0, 3}, 2.0), 0.0);
  EXPECT_NEAR(structural_importance(FlowStats{5, 4, 1, 1, 1}, 2.0), 2.2499048351651325, 1e-12);
  EXPECT_NEAR(structural_importance(FlowStats{5, 4, 1, 1, 2}, 2.0), 1.499936556776755, 1e-12);
}

TEST(StructuralImportance, CenterIsDomainError) {
  auto g = fgtest::graph_of({tx("1", "v", "a", "3")});
  auto s = sample_khop(g, "v", SamplingConfig{});
  EXPECT_THROW(structural_importance(s, g.id("v"), 2.0), DomainError);
  // a: in 3, degree 1, hop 1 -> (ln 4 + 2 ln 2) / 2
  EXPECT_NEAR(structural_importance(s, g.id("a"), 2.0), (std::log(4.0) + 2 * std::log(2.0)) / 2.0, 1e-12);
}

TEST(Compress, UnderBudgetUnchanged) {
  auto g = fgtest::graph_of({tx("1", "v", "a", "3"), tx("2", "v", "b", "3"), tx("3", "v", "c", "3"),
                             tx("4", "v", "d", "3")});
  auto s = sample_khop(g, "v", SamplingConfig{});
  EXPECT_EQ(compress_sigc(s, SamplingConfig{}), s);
}

TEST(Compress, PathNodesAreReAdded) {
  // v - a - b - c path with heavy flow at c; 12 light leaves on v.
  std::vector<RawTransaction> txs{tx("p1", "v", "a", "0.01"), tx("p2", "a", "b", "0.01")};
  for (int i = 0; i < 20; ++i) txs.push_back(tx("c" + std::to_string(i), "b", "c", "1000"));
  for (int i = 0; i < 6; ++i) txs.push_back(tx("d" + std::to_string(i), "c", "z" + std::to_string(i), "1000"));
  for (int i = 0; i < 12; ++i) txs.push_back(tx("l" + std::to_string(i), "v", pad(i), "0.001"));
  auto g = fgtest::graph_of(txs);
  SamplingConfig wide;
  wide.hops = 3;
  wide.neighbors_per_hop = 20;
  auto s = sample_khop(g, "v", wide);
  ASSERT_TRUE(s.local_index(g.id("c")).has_value());
  SamplingConfig cfg = wide;
  cfg.budget = 2;
  auto ranked = rank_by_importance(s, cfg.beta);
  std::set<NodeId> top{ranked[0].node, ranked[1].node};
  ASSERT_TRUE(top.count(g.id("c")));
  auto c = compress_sigc(s, cfg);
  EXPECT_TRUE(c.local_index(g.id("a")).has_value());
  EXPECT_TRUE(c.local_index(g.id("b")).has_value());
  EXPECT_TRUE(connected_from_center(c));
  EXPECT_EQ(c.nodes[0], g.id("v"));
}

namespace {

TransactionGraph random_graph(std::mt19937_64& rng, int n, int m) {
  std::vector<RawTransaction> txs;
  for (int i = 0; i < m; ++i) {
    int a = static_cast<int>(rng() % n), b = static_cast<int>(rng() % n);
    txs.push_back(tx("t" + std::to_string(i), pad(a), pad(b), std::to_string(1 + rng() % 500)));
  }
  return fgtest::graph_of(txs);
}

}  // namespace

TEST(Compress, IdempotentConnectedAndMonotone) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = random_graph(rng, 60, 240);
    NodeId center = static_cast<NodeId>(rng() % g.node_count());
    SamplingConfig cfg;
    cfg.budget = 1 + rng() % 8;
    auto s = sample_khop(g, center, cfg);
    auto c = compress_sigc(s, cfg);
    EXPECT_TRUE(connected_from_center(c));
    EXPECT_EQ(compress_sigc(c, cfg), c);
    if (s.size() > cfg.budget) {
      SamplingConfig bigger = cfg;
      bigger.budget = cfg.budget + 3;
      auto c2 = compress_sigc(s, bigger);
      auto ranked = rank_by_importance(s, cfg.beta);
      for (std::size_t r = 0; r < cfg.budget && r < ranked.size(); ++r)
        EXPECT_TRUE(c2.local_index(ranked[r].node).has_value());
    }
  }
}

TEST(Compress, SamplingIsDeterministic) {
  std::mt19937_64 rng(5);
  auto g = random_graph(rng, 80, 300);
  for (NodeId v = 0; v < 10; ++v) EXPECT_EQ(build_subgraph(g, v, SamplingConfig{}), build_subgraph(g, v, SamplingConfig{}));
}

TEST(Subgraphs, ParallelMatchesSerial) {
  std::mt19937_64 rng(6);
  auto g = random_graph(rng, 80, 300);
  std::vector<NodeId> centers;
  for (NodeId v = 0; v < g.node_count(); ++v) centers.push_back(v);
  EXPECT_EQ(build_subgraphs(g, centers, SamplingConfig{}, 1), build_subgraphs(g, centers, SamplingConfig{}, 4));
}

TEST(Subgraphs, JsonlRoundTrip) {
  std::mt19937_64 rng(8);
  auto g = random_graph(rng, 40, 120);
  std::vector<NodeId> centers{0, 1, 2, 3};
  auto subs = build_subgraphs(g, centers, SamplingConfig{});
  EXPECT_EQ(subgraphs_from_jsonl(subgraphs_to_jsonl(subs, g), g), subs);
  EXPECT_THROW(subgraphs_from_jsonl("{oops\n", g), DataError);
}

TEST(Subgraphs, NormalizedAdjacencyTwoNodes) {
  auto g = fgtest::graph_of({tx("1", "a", "b", "1")});
  auto s = sample_khop(g, "a", SamplingConfig{});
  auto a = normalized_adjacency(s);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(a(i, j), 0.5);
}

TEST(SamplingConfig, Validation) {
  SamplingConfig c;
  c.hops = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.beta = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.budget = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
