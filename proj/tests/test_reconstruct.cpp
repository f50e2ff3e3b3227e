#include "dagprobe/reconstruct.hpp"
#include "dagprobe/synth.hpp"

#include <gtest/gtest.h>

namespace dagprobe {
namespace {

std::vector<double> as_double(const std::vector<int>& v) { return {v.begin(), v.end()}; }

TEST(Reconstruct, FionaFromGoldTargets) {
  const auto [g, t] = fiona_fixture();
  const auto pred = reconstruct(as_double(t.norm_depth), distances_as_matrix(t.dist), {1.0, 5.0});
  const auto s = edge_prf(pred.edges, g.edges);
  EXPECT_DOUBLE_EQ(s.precision, 1.0);
  EXPECT_DOUBLE_EQ(s.recall, 5.0 / 7.0);
  EXPECT_DOUBLE_EQ(s.f1, 5.0 / 6.0);
  EXPECT_EQ(pred.sink, g.sink);
}

TEST(Reconstruct, OrientsFromShallowToDeep) {
  Matrix d(3, 3, 1.0);
  const auto pred = reconstruct(std::vector<double>{2.0, 0.5, 1.0}, d, {1.0, 10.0});
  EXPECT_EQ(pred.edges, (std::vector<Edge>{{1, 0}, {2, 0}, {1, 2}}));
  EXPECT_EQ(pred.sink, 0u);
}

TEST(Reconstruct, ThresholdsAreInclusive) {
  Matrix d(2, 2, 0.0);
  d(0, 1) = d(1, 0) = 1.5;
  EXPECT_EQ(reconstruct(std::vector<double>{0.0, 2.0}, d, {1.5, 2.0}).edges.size(), 1u);
  EXPECT_TRUE(reconstruct(std::vector<double>{0.0, 2.0}, d, {1.49, 2.0}).edges.empty());
  EXPECT_TRUE(reconstruct(std::vector<double>{0.0, 2.0}, d, {1.5, 1.99}).edges.empty());
}

TEST(Reconstruct, EqualDepthsNeverConnect) {
  Matrix d(2, 2, 0.0);
  EXPECT_TRUE(reconstruct(std::vector<double>{1.0, 1.0}, d, {5.0, 5.0}).edges.empty());
}

TEST(Reconstruct, RejectsBadInputs) {
  EXPECT_THROW(reconstruct(std::vector<double>{0.0, 1.0}, Matrix(3, 3), {}), ValidationError);
  EXPECT_THROW(reconstruct(std::vector<double>{0.0, NAN}, Matrix(2, 2), {}), ValidationError);
  EXPECT_THROW(reconstruct(std::vector<double>{0.0, 1.0}, Matrix(2, 2), {INFINITY, 1.0}), ValidationError);
}

TEST(Reconstruct, GoldInputsGivePerfectPrecisionAtUnitDistance) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto g = random_dag(3 + seed % 12, 0.3, seed);
    const auto t = compute_targets(g);
    const auto pred = reconstruct(as_double(t.norm_depth), distances_as_matrix(t.dist), {1.0, 100.0});
    if (pred.edges.empty()) continue;
    EXPECT_DOUBLE_EQ(edge_prf(pred.edges, g.edges).precision, 1.0) << seed;
  }
}

TEST(Reconstruct, AlwaysAcyclic) {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(15);
    std::vector<double> depths(n);
    for (double& x : depths) x = static_cast<double>(rng.below(4));  // frequent ties
    Matrix d(n, n);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u; v < n; ++v) d(u, v) = d(v, u) = rng.uniform(0.0, 3.0);
    const auto pred = reconstruct(depths, d, {rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0)});
    EXPECT_TRUE(topological_order(n, pred.edges).has_value());
    for (const Edge& e : pred.edges) EXPECT_LT(depths[e.src], depths[e.dst]);
  }
}

TEST(ThresholdSweep, GridOrderAndMeans) {
  const auto [g, t] = fiona_fixture();
  const std::vector<SweepInput> in{{as_double(t.norm_depth), distances_as_matrix(t.dist), g.edges}};
  const std::vector<double> td{1.0, 4.0}, tg{1.0, 5.0};
  const auto s = threshold_sweep(in, td, tg);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[1].tau_dist, 1.0);
  EXPECT_EQ(s[1].tau_gap, 5.0);
  EXPECT_DOUBLE_EQ(s[1].f1, 5.0 / 6.0);
  // tau_dist 4 with gap 5 admits every reachable pair.
  EXPECT_DOUBLE_EQ(s[3].recall, 1.0);
  EXPECT_TRUE(threshold_sweep({}, td, tg).empty());
}

TEST(Dot, MarksAgreementSpuriousAndMissed) {
  const auto [g, t] = fiona_fixture();
  PredictedGraph p;
  p.depths = as_double(t.norm_depth);
  p.sink = 5;
  p.edges = {{0, 1}, {0, 5}};
  const std::string dot = to_dot(g, p);
  EXPECT_TRUE(dot.starts_with("digraph \"" + g.graph_id + "\""));
  EXPECT_NE(dot.find("\"N0\" -> \"N1\" [color=darkgreen]"), std::string::npos);
  EXPECT_NE(dot.find("\"N0\" -> \"N5\" [color=red]"), std::string::npos);
  EXPECT_NE(dot.find("\"N4\" -> \"N5\" [color=grey, style=dashed]"), std::string::npos);
  EXPECT_TRUE(dot.ends_with("}\n"));
}

}  // namespace
}  // namespace dagprobe
