#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace cnc;
using namespace cnc::testing;

namespace {

NetworkGraph line_graph(int k = 1) {
  return TopologyBuilder()
      .network("A", 0, 0, true)
      .network("B", 1, 0)
      .compute("C", ComputeTier::MEC, 10, 1, 2, 0)
      .link("A", "B", 10)
      .link("B", "C", 10)
      .k(k)
      .build();
}

// A-B-D with 2+2 ms, A-C-D with 3+3 ms.
NetworkGraph diamond(int k) {
  return TopologyBuilder()
      .network("A", 0, 0, true)
      .network("B", 2, 0)
      .network("C", 0, 3)
      .compute("D", ComputeTier::MEC, 10, 1, 2, 2)
      .link("A", "B", 10)
      .link("B", "D", 10)
      .link("A", "C", 10)
      .link("C", "D", 10)
      .k(k)
      .build();
}

NetworkGraph random_graph(Rng& rng, int k) {
  TopologyBuilder b;
  const int n = 8;
  auto name = [](int i) { return "n" + std::to_string(i); };
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(rng.below(7)), y = static_cast<double>(rng.below(7));
    if (i == 5)
      b.compute(name(i), ComputeTier::MEC, 10, 3, x, y);
    else if (i == 6)
      b.compute(name(i), ComputeTier::EdgeCloud, 10, 2, x, y);
    else if (i == 7)
      b.compute(name(i), ComputeTier::CloudCenter, 10, 1, x, y);
    else
      b.network(name(i), x, y, i < 2);
  }
  std::set<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) edges.insert({static_cast<int>(rng.below(static_cast<std::uint64_t>(i))), i});
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform01() < 0.35) edges.insert({i, j});
  for (auto [i, j] : edges) b.link(name(i), name(j), 10);
  return b.k(k).build();
}

void expect_matches_oracle(const NetworkGraph& g, NodeId access, NodeId compute, int k) {
  const auto got = enumerate_k_shortest(g, access, compute, k);
  const auto all = all_simple_paths(g, access, compute);
  const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(k), all.size());
  ASSERT_EQ(got.size(), want);
  for (std::size_t i = 0; i < want; ++i) {
    EXPECT_EQ(got[i].nodes, all[i].nodes) << "rank " << i;
    EXPECT_EQ(got[i].propagation_delay, all[i].delay) << "rank " << i;
  }
}

void expect_well_formed(const NetworkGraph& g) {
  for (std::size_t i = 0; i < g.paths().size(); ++i) {
    const auto& p = g.paths()[i];
    EXPECT_EQ(p.id.index(), i);
    ASSERT_GE(p.nodes.size(), 2u);
    EXPECT_EQ(p.nodes.front(), p.access);
    EXPECT_EQ(p.nodes.back(), p.compute);
    EXPECT_TRUE(g.node(p.access).is_access);
    EXPECT_TRUE(g.node(p.compute).is_compute());
    std::set<NodeId> seen(p.nodes.begin(), p.nodes.end());
    EXPECT_EQ(seen.size(), p.nodes.size()) << "path " << i << " repeats a node";
    ASSERT_EQ(p.links.size() + 1, p.nodes.size());
    double d = 0.0;
    for (std::size_t j = 0; j < p.links.size(); ++j) {
      const auto& l = g.link(p.links[j]);
      EXPECT_TRUE((l.a == p.nodes[j] && l.b == p.nodes[j + 1]) || (l.b == p.nodes[j] && l.a == p.nodes[j + 1]));
      d += l.propagation_delay;
    }
    EXPECT_EQ(p.propagation_delay, d);
  }
}

}  // namespace

TEST(Topology, LineHasSinglePath) {
  auto g = line_graph();
  ASSERT_EQ(g.paths().size(), 1u);
  EXPECT_EQ(g.paths()[0].nodes, ids(g, {"A", "B", "C"}));
  EXPECT_EQ(g.paths()[0].intermediate_nodes().size(), 1u);
  EXPECT_EQ(g.paths()[0].intermediate_nodes()[0], id_of(g, "B"));
}

TEST(Topology, DiamondOrderedByDelay) {
  auto g = diamond(2);
  ASSERT_EQ(g.paths().size(), 2u);
  EXPECT_EQ(g.paths()[0].nodes, ids(g, {"A", "B", "D"}));
  EXPECT_DOUBLE_EQ(g.paths()[0].propagation_delay, 4.0);
  EXPECT_EQ(g.paths()[1].nodes, ids(g, {"A", "C", "D"}));
  EXPECT_DOUBLE_EQ(g.paths()[1].propagation_delay, 3.0 + std::sqrt(5.0));
}

TEST(Topology, DiamondKLimits) {
  auto g1 = diamond(1);
  auto one = enumerate_k_shortest(g1, id_of(g1, "A"), id_of(g1, "D"), 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].nodes, ids(g1, {"A", "B", "D"}));
  auto g5 = diamond(5);
  EXPECT_EQ(g5.paths().size(), 2u);
  EXPECT_EQ(enumerate_k_shortest(g5, id_of(g5, "A"), id_of(g5, "D"), 5).size(), 2u);
  EXPECT_TRUE(enumerate_k_shortest(g5, id_of(g5, "A"), id_of(g5, "D"), 0).empty());
}

TEST(Topology, LinkDelayFollowsDistance) {
  auto cfg = TopologyBuilder().network("A", 0, 0, true).compute("C", ComputeTier::MEC, 5, 1, 3, 4).link("A", "C", 1);
  cfg.cfg.delay_per_distance = 2.0;
  auto g = cfg.build();
  EXPECT_DOUBLE_EQ(g.links()[0].propagation_delay, 10.0);
}

TEST(Topology, RandomGraphsMatchBruteForce) {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(6));
    auto g = random_graph(rng, k);
    expect_well_formed(g);
    for (auto a : g.access_nodes())
      for (auto c : g.compute_nodes()) expect_matches_oracle(g, a, c, k);
  }
}

TEST(Topology, LatticeTiesBreakLexicographically) {
  // 4x4 unit grid: many equal-delay paths between opposite corners.
  TopologyBuilder b;
  auto name = [](int x, int y) { return "g" + std::to_string(x) + std::to_string(y); };
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      if (x == 3 && y == 3)
        b.compute(name(x, y), ComputeTier::MEC, 5, 1, x, y);
      else
        b.network(name(x, y), x, y, x == 0 && y == 0);
    }
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      if (x + 1 < 4) b.link(name(x, y), name(x + 1, y), 1);
      if (y + 1 < 4) b.link(name(x, y), name(x, y + 1), 1);
    }
  for (int k : {1, 4, 20, 25}) {
    auto g = b.k(k).build();
    expect_well_formed(g);
    expect_matches_oracle(g, g.access_nodes()[0], g.compute_nodes()[0], k);
  }
}

TEST(Topology, DefaultConfigTableIsComplete) {
  auto exp = Experiment::load(default_config_path());
  const auto& g = *exp.graph;
  expect_well_formed(g);
  std::size_t total = 0;
  for (auto a : g.access_nodes()) {
    const auto range = g.paths_from(a);
    std::size_t in_block = 0;
    for (auto c : g.compute_nodes()) {
      const auto all = all_simple_paths(g, a, c);
      const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(g.k_paths()), all.size());
      std::size_t have = 0;
      for (const auto& p : g.paths())
        if (p.access == a && p.compute == c) {
          EXPECT_TRUE(range.contains(p.id));
          EXPECT_EQ(p.nodes, all[have].nodes);
          ++have;
        }
      EXPECT_EQ(have, want);
      in_block += have;
    }
    EXPECT_EQ(range.size(), in_block);
    total += in_block;
  }
  EXPECT_EQ(total, g.paths().size());
}

TEST(Topology, BuildIsDeterministic) {
  auto doc = ConfigDocument::load(default_config_path());
  auto g1 = build_topology(TopologyConfig::from_document(doc));
  auto g2 = build_topology(TopologyConfig::from_document(doc));
  ASSERT_EQ(g1.paths().size(), g2.paths().size());
  for (std::size_t i = 0; i < g1.paths().size(); ++i) {
    EXPECT_EQ(g1.paths()[i].nodes, g2.paths()[i].nodes);
    EXPECT_EQ(g1.paths()[i].links, g2.paths()[i].links);
  }
  EXPECT_EQ(g1.fingerprint(), g2.fingerprint());
}

TEST(Topology, TextRoundTripKeepsFingerprint) {
  auto cfg = TopologyConfig::from_document(ConfigDocument::load(default_config_path()));
  auto again = TopologyConfig::from_document(ConfigDocument::parse(cfg.to_text()));
  EXPECT_EQ(build_topology(cfg).fingerprint(), build_topology(again).fingerprint());
}

TEST(Topology, RejectsBadConfigs) {
  auto base = [] {
    return TopologyBuilder().network("A", 0, 0, true).network("B", 1, 0).compute("C", ComputeTier::MEC, 10, 1, 2, 0);
  };
  EXPECT_THROW(base().link("A", "B", 1).build(), ConfigError);  // C unreachable
  EXPECT_THROW(base().network("A", 5, 5).link("A", "B", 1).link("B", "C", 1).build(), ConfigError);
  EXPECT_THROW(base().link("A", "B", 1).link("B", "C", 0).build(), ConfigError);
  EXPECT_THROW(base().link("A", "B", 1).link("B", "C", 1).link("C", "B", 1).build(), ConfigError);
  EXPECT_THROW(base().link("A", "A", 1).link("A", "B", 1).link("B", "C", 1).build(), ConfigError);
  EXPECT_THROW(base().link("A", "X", 1).build(), ConfigError);
  EXPECT_THROW(base().link("A", "B", 1).link("B", "C", 1).k(0).build(), ConfigError);
  EXPECT_THROW(TopologyBuilder().network("B", 1, 0).compute("C", ComputeTier::MEC, 1, 1, 2, 0).link("B", "C", 1).build(),
               ConfigError);  // no access node
  EXPECT_THROW(base()
                   .compute("E", ComputeTier::EdgeCloud, 10, 2, 3, 0)
                   .link("A", "B", 1)
                   .link("B", "C", 1)
                   .link("B", "E", 1)
                   .build(),
               ConfigError);  // edge dearer than MEC
}

TEST(Topology, ExperimentsNeedEveryTier) {
  EXPECT_THROW(require_all_tiers(line_graph()), ConfigError);
  EXPECT_NO_THROW(require_all_tiers(*Experiment::load(default_config_path()).graph));
}

TEST(Topology, LookupErrors) {
  auto g = diamond(2);
  EXPECT_THROW(g.path(PathId(7)), LookupError);
  EXPECT_THROW(g.node(NodeId(99)), LookupError);
  EXPECT_THROW(enumerate_k_shortest(g, id_of(g, "B"), id_of(g, "D"), 1), LookupError);
  EXPECT_THROW(enumerate_k_shortest(g, id_of(g, "A"), id_of(g, "C"), 1), LookupError);
}

TEST(Config, ParsesScalarsRecordsAndComments) {
  auto doc = ConfigDocument::parse(
      "# comment\n"
      "a.b = 3   # trailing\n"
      "range = 1 2.5\n"
      "node name=x kind=network x=1 y=2\n");
  EXPECT_EQ(doc.get_int("a.b", 0), 3);
  EXPECT_EQ(doc.get_range("range", {0, 0}), (std::pair<double, double>{1.0, 2.5}));
  ASSERT_EQ(doc.records("node").size(), 1u);
  EXPECT_EQ(doc.records("node")[0]->get("name"), "x");
  EXPECT_DOUBLE_EQ(doc.get_double("missing", 4.5), 4.5);
  EXPECT_THROW(doc.get_int("range", 0), ConfigError);
  EXPECT_THROW(doc.records("node")[0]->get("tier"), ConfigError);
}
