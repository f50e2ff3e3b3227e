#include "dagprobe/metrics.hpp"
#include "dagprobe/synth.hpp"

#include <gtest/gtest.h>

namespace dagprobe {
namespace {

TEST(RandomDag, ValidSingleSinkOverManySeeds) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const std::size_t n = 1 + seed % 20;
    const double p = static_cast<double>(seed % 7) / 6.0;
    const auto g = random_dag(n, p, seed);
    ASSERT_EQ(g.size(), n);
    ASSERT_NO_THROW(validate(g)) << seed;
    EXPECT_TRUE(out_degrees(g)[g.sink] == 0);
    const auto reach = reaches(g, g.sink);
    for (std::size_t v = 0; v < n; ++v) EXPECT_TRUE(reach[v]);
    const auto in = in_degrees(g);
    for (std::size_t v = 0; v < n; ++v) EXPECT_EQ(g.nodes[v].is_fact, in[v] == 0);
  }
  EXPECT_THROW(random_dag(0, 0.5, 0), ValidationError);
}

TEST(RandomDag, SeedDeterminesTheGraph) {
  const auto a = random_dag(12, 0.3, 77), b = random_dag(12, 0.3, 77), c = random_dag(12, 0.3, 78);
  EXPECT_EQ(a.edges, b.edges);
  EXPECT_EQ(a.sink, b.sink);
  EXPECT_EQ(a.nodes[3].text, b.nodes[3].text);
  EXPECT_NE(a.edges, c.edges);
}

TEST(BruteForce, FionaTargets) {
  const auto [g, t] = fiona_fixture();
  EXPECT_EQ(t.raw_depth, (std::vector<int>{5, 4, 3, 2, 1, 0}));
  EXPECT_EQ(t.norm_depth, (std::vector<int>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(t.dist.at(1, 5), 4);
  EXPECT_EQ(t.dist.at(5, 1), 4);
  EXPECT_EQ(t.dist.at(1, 3), 2);
  EXPECT_EQ(leaf_nodes(g), (std::vector<std::size_t>{0}));
  EXPECT_THROW(brute_force_targets(random_dag(13, 0.2, 0)), ValidationError);
}

TEST(Fiona, RecordMatchesGraph) {
  const auto r = fiona_record();
  EXPECT_EQ(r.proof_steps.size(), 5u);
  EXPECT_EQ(r.proof_steps.back().conclusion, "N5");
  EXPECT_NE(std::string(fiona_theory()).find("Fiona is cold."), std::string::npos);
}

PlantedParams params(double sigma, std::uint64_t seed) {
  PlantedParams p;
  p.dim = 16;
  p.layers = {0, 1, 2, 3};
  p.peak_layer = 1;
  p.noise_sigma = sigma;
  p.seed = seed;
  return p;
}

std::vector<ReasoningGraph> some_graphs() {
  std::vector<ReasoningGraph> gs{fiona_graph()};
  for (std::uint64_t i = 0; i < 8; ++i) gs.push_back(random_dag(5 + i, 0.3, i));
  return gs;
}

TEST(Planted, DeterministicInSeed) {
  const auto gs = some_graphs();
  const auto a = planted_store(gs, params(0.1, 3)), b = planted_store(gs, params(0.1, 3));
  const auto c = planted_store(gs, params(0.1, 4));
  EXPECT_EQ(encode_store(a), encode_store(b));
  EXPECT_NE(encode_store(a), encode_store(c));
  EXPECT_EQ(a.layers(), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(a.node_count(), 6u + 5 + 6 + 7 + 8 + 9 + 10 + 11 + 12);
}

// Without noise, each coordinate carrying the depth direction is an exact
// monotone function of gold depth, so its Spearman with depth is +-1.
TEST(Planted, NoiselessDepthCoordinatesRankPerfectly) {
  const auto gs = some_graphs();
  const auto store = planted_store(gs, params(0.0, 9));
  for (int layer : {0, 1, 2}) {
    std::size_t perfect_coords = 0;
    for (std::size_t k = 0; k < 16; ++k) {
      bool perfect = true;
      for (const auto& g : gs) {
        const Matrix f = store.graph_features(g, layer);
        const auto t = compute_targets(g);
        std::vector<double> col(g.size()), gold(t.norm_depth.begin(), t.norm_depth.end());
        for (std::size_t v = 0; v < g.size(); ++v) col[v] = f(v, k);
        const auto rho = spearman(col, gold);
        perfect = perfect && rho && std::abs(*rho) == 1.0;
      }
      perfect_coords += perfect;
    }
    EXPECT_EQ(perfect_coords, 8u) << "layer " << layer;
  }
}

TEST(Planted, StrengthPeaksAndRamps) {
  PlantedParams p = params(0.0, 0);
  EXPECT_EQ(structure_strength(p, 1), 1.0);
  EXPECT_EQ(structure_strength(p, 3), 0.5);
  EXPECT_EQ(structure_strength(p, 9), 0.0);
  p.ramp_floor = 0.1;
  EXPECT_EQ(structure_strength(p, 9), 0.1);
  // Layer 3 is the layer-1 signal at half strength.
  const auto gs = some_graphs();
  const auto store = planted_store(gs, p);
  const Matrix peak = store.graph_features(gs[0], 1), far = store.graph_features(gs[0], 3);
  for (std::size_t i = 0; i < peak.data().size(); ++i) EXPECT_NEAR(far.data()[i], 0.5 * peak.data()[i], 1e-6);
}

TEST(Planted, DistanceEmbeddingFitsChains) {
  ReasoningGraph chain = random_dag(1, 0.0, 0);
  chain.nodes.clear();
  for (int v = 0; v < 5; ++v) chain.nodes.push_back({"c" + std::to_string(v), "t", v == 0});
  chain.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  chain.sink = 4;
  const auto t = compute_targets(chain);
  const auto x = distance_embedding(t, 1);
  for (std::size_t u = 0; u < 5; ++u)
    for (std::size_t v = 0; v < 5; ++v) EXPECT_NEAR(std::abs(x[u] - x[v]), *t.dist.at(u, v), 1e-3);
  EXPECT_THROW(planted_store(some_graphs(), [] { PlantedParams p; p.dim = 1; return p; }()), ValidationError);
}

}  // namespace
}  // namespace dagprobe
