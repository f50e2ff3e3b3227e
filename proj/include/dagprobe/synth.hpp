#pragma once

// Synthetic data and brute-force oracles: random single-sink DAGs,
// exhaustive path enumeration, planted feature stores, and the "Fiona"
// worked example.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dagprobe/error.hpp"
#include "dagprobe/feature_store.hpp"
#include "dagprobe/graph.hpp"
#include "dagprobe/ingest.hpp"
#include "dagprobe/probe.hpp"
#include "dagprobe/random.hpp"

namespace dagprobe {

/// A few placeholder words drawn from a fixed pseudo-vocabulary.
inline std::string placeholder_text(Rng& rng) {
  const std::size_t words = 3 + rng.below(4);
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s.push_back(' ');
    s += "w" + std::to_string(rng.below(200));
  }
  s.push_back('.');
  return s;
}

/// Random DAG with one sink: a random topological order, each forward pair
/// kept with probability `edge_prob`, then every non-final node without an
/// out-edge gets one to a random later node (so all nodes reach the last).
inline ReasoningGraph random_dag(std::size_t n_nodes, double edge_prob, std::uint64_t seed) {
  if (n_nodes == 0) throw ValidationError("random_dag: need at least one node");
  Rng rng(seed);
  std::vector<std::size_t> order(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));

  std::set<Edge> edges;
  std::vector<bool> has_out(n_nodes, false);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    for (std::size_t j = i + 1; j < n_nodes; ++j) {
      if (rng.uniform() < edge_prob) {
        edges.insert({order[i], order[j]});
        has_out[i] = true;
      }
    }
  }
  for (std::size_t i = n_nodes - 1; i-- > 0;) {
    if (has_out[i]) continue;
    const std::size_t j = i + 1 + static_cast<std::size_t>(rng.below(n_nodes - 1 - i));
    edges.insert({order[i], order[j]});
    has_out[i] = true;
  }

  ReasoningGraph g;
  g.graph_id = "synth-" + std::to_string(seed);
  const auto indeg_zero = [&](std::size_t v) {
    return std::none_of(edges.begin(), edges.end(), [&](const Edge& e) { return e.dst == v; });
  };
  for (std::size_t v = 0; v < n_nodes; ++v)
    g.nodes.push_back({"v" + std::to_string(v), placeholder_text(rng), indeg_zero(v)});
  g.edges.assign(edges.begin(), edges.end());
  g.sink = order.back();
  return g;
}

/// Exhaustive enumeration of every simple directed path. Exponential; an
/// independent oracle for compute_targets on small graphs only.
inline GraphTargets brute_force_targets(const ReasoningGraph& g) {
  constexpr std::size_t kMaxNodes = 12;
  const std::size_t n = g.size();
  if (n > kMaxNodes) throw ValidationError("brute_force_targets: graph exceeds 12 nodes");
  std::vector<std::vector<std::size_t>> adj(n);
  for (const Edge& e : g.edges) adj[e.src].push_back(e.dst);

  std::vector<std::vector<int>> longest(n, std::vector<int>(n, -1));
  std::vector<bool> on_path(n, false);
  std::function<void(std::size_t, std::size_t, int)> walk = [&](std::size_t start, std::size_t v, int len) {
    longest[start][v] = std::max(longest[start][v], len);
    on_path[v] = true;
    for (std::size_t w : adj[v])
      if (!on_path[w]) walk(start, w, len + 1);
    on_path[v] = false;
  };
  for (std::size_t s = 0; s < n; ++s) walk(s, s, 0);

  GraphTargets t;
  t.raw_depth.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (longest[v][g.sink] < 0) throw ValidationError("brute_force_targets: node cannot reach sink");
    t.raw_depth[v] = longest[v][g.sink];
  }
  t.norm_depth = compute_norm_depths(t.raw_depth);
  t.dist = DistanceMatrix(n);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      const int d = std::max(longest[u][v], longest[v][u]);
      if (d >= 0) t.dist.set(u, v, d);
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// The worked ProofWriter example: Fiona is cold, and five rule applications
// derive green, young, smart, red and finally nice.

inline const char* fiona_theory() {
  return "Dave is cold. Dave is smart. Dave is green. Dave is young. "
         "Erin is cold. Erin is kind. Erin is red. Erin is smart. Erin is green. "
         "Fiona is cold. Fiona is kind. "
         "Gary is kind. Gary is red. Gary is smart. "
         "If someone is green and red then they are nice. "
         "All smart people are red. "
         "If someone is kind and smart then they are cold. "
         "Nice people are smart. "
         "If someone is cold then they are green. "
         "Green people are young. "
         "All green, young people are smart. "
         "Nice people are green. "
         "If Gary is kind and Gary is green then Gary is smart.";
}

inline TheoryRecord fiona_record() {
  TheoryRecord r;
  r.example_id = "fiona";
  r.theory_text = fiona_theory();
  r.query_text = "Fiona is nice.";
  r.gold_answer = true;
  r.facts = {{"N0", "Fiona is cold."}};
  r.proof_steps = {
      {{"N0"}, "N1", "Fiona is green."},        // cold -> green
      {{"N1"}, "N2", "Fiona is young."},        // green -> young
      {{"N1", "N2"}, "N3", "Fiona is smart."},  // green & young -> smart
      {{"N3"}, "N4", "Fiona is red."},          // smart -> red
      {{"N1", "N4"}, "N5", "Fiona is nice."},   // green & red -> nice
  };
  return r;
}

inline ReasoningGraph fiona_graph() {
  ReasoningGraph g;
  g.graph_id = "fiona";
  g.nodes = {{"N0", "Fiona is cold.", true},  {"N1", "Fiona is green.", false},
             {"N2", "Fiona is young.", false}, {"N3", "Fiona is smart.", false},
             {"N4", "Fiona is red.", false},   {"N5", "Fiona is nice.", false}};
  g.edges = {{0, 1}, {1, 2}, {1, 3}, {2, 3}, {3, 4}, {1, 5}, {4, 5}};
  g.sink = 5;
  return g;
}

/// The fixture graph with oracle-derived targets.
inline std::pair<ReasoningGraph, GraphTargets> fiona_fixture() {
  ReasoningGraph g = fiona_graph();
  validate(g);
  GraphTargets t = brute_force_targets(g);
  return {std::move(g), std::move(t)};
}

// ---------------------------------------------------------------------------

struct PlantedParams {
  std::size_t dim = 64;
  std::vector<int> layers{0};
  int peak_layer = 0;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  double ramp_slope = 0.25;  // structure lost per layer away from the peak
  double ramp_floor = 0.0;
};

/// Triangular structure-strength profile, 1 at the peak.
inline double structure_strength(const PlantedParams& p, int layer) {
  const double s = 1.0 - p.ramp_slope * std::abs(layer - p.peak_layer);
  return std::max(p.ramp_floor, s);
}

/// One coordinate per node whose pairwise gaps approximate the gold
/// distances on connected pairs (least squares, Adam on a 1-D embedding,
/// started from the raw depths). Centered to mean zero.
inline std::vector<double> distance_embedding(const GraphTargets& t, std::uint64_t seed) {
  const std::size_t n = t.raw_depth.size();
  std::vector<double> x(n);
  Rng rng(seed);
  for (std::size_t v = 0; v < n; ++v) x[v] = t.raw_depth[v] + 1e-3 * rng.normal();

  std::vector<std::tuple<std::size_t, std::size_t, double>> pairs;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (auto d = t.dist.at(u, v)) pairs.emplace_back(u, v, *d);

  auto loss = [&](const std::vector<double>& y) {
    double s = 0.0;
    for (auto [u, v, d] : pairs) {
      const double r = std::abs(y[u] - y[v]) - d;
      s += r * r;
    }
    return s;
  };
  std::vector<double> best = x;
  double best_loss = loss(x);
  if (!pairs.empty()) {
    AdamW opt(n, {0.05, 0.0, 0.9, 0.999, 1e-8});
    std::vector<double> grad(n);
    for (int it = 0; it < 2000; ++it) {
      std::fill(grad.begin(), grad.end(), 0.0);
      for (auto [u, v, d] : pairs) {
        const double diff = x[u] - x[v];
        const double r = std::abs(diff) - d;
        const double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
        grad[u] += 2.0 * r * sgn;
        grad[v] -= 2.0 * r * sgn;
      }
      opt.step(x, grad);
      const double l = loss(x);
      if (l < best_loss) {
        best_loss = l;
        best = x;
      }
    }
  }
  double mean = 0.0;
  for (double v : best) mean += v;
  mean /= static_cast<double>(n);
  for (double& v : best) v -= mean;
  return best;
}

/// Planted store: at layer l, z_v = s(l) * (d_v * w_depth + x_v * p) + noise,
/// with d_v the normalized depth, x_v the distance embedding, and w_depth, p
/// random unit vectors on disjoint halves of the coordinates.
inline FeatureStore planted_store(const std::vector<ReasoningGraph>& graphs, const PlantedParams& p) {
  if (p.dim < 2) throw ValidationError("planted_store: dim must be at least 2");
  if (p.layers.empty()) throw ValidationError("planted_store: no layers");
  std::vector<int> layers = p.layers;
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());

  Rng dir_rng(derive_seed(p.seed, 10));
  std::vector<std::size_t> coords(p.dim);
  for (std::size_t i = 0; i < p.dim; ++i) coords[i] = i;
  dir_rng.shuffle(std::span<std::size_t>(coords));
  std::vector<double> w_depth(p.dim, 0.0), w_dist(p.dim, 0.0);
  const std::size_t half = p.dim / 2;
  for (std::size_t i = 0; i < p.dim; ++i)
    (i < half ? w_depth : w_dist)[coords[i]] = dir_rng.normal();
  for (auto* v : {&w_depth, &w_dist}) {
    double norm = 0.0;
    for (double x : *v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : *v) x /= norm;
  }

  StoreHeader h;
  h.model_name = "synthetic-planted";
  h.hidden_dim = p.dim;
  h.layers = layers;
  h.condition = Condition::contextual;
  h.meta = {{"generator", "planted"},         {"seed", p.seed},
            {"peak_layer", p.peak_layer},     {"noise_sigma", p.noise_sigma},
            {"ramp_slope", p.ramp_slope},     {"ramp_floor", p.ramp_floor}};

  std::vector<std::vector<double>> depth, embed;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const GraphTargets t = compute_targets(graphs[gi]);
    depth.emplace_back(t.norm_depth.begin(), t.norm_depth.end());
    embed.push_back(distance_embedding(t, derive_seed(p.seed, 1000 + gi)));
    for (const auto& n : graphs[gi].nodes) h.index.push_back({graphs[gi].graph_id, n.node_id});
  }

  std::vector<float> payload;
  payload.reserve(layers.size() * h.index.size() * p.dim);
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const double s = structure_strength(p, layers[li]);
    Rng noise(derive_seed(p.seed, 20 + li));
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
      for (std::size_t v = 0; v < graphs[gi].size(); ++v) {
        for (std::size_t k = 0; k < p.dim; ++k) {
          const double z = s * (depth[gi][v] * w_depth[k] + embed[gi][v] * w_dist[k]) +
                           p.noise_sigma * noise.normal();
          payload.push_back(static_cast<float>(z));
        }
      }
    }
  }
  return FeatureStore(std::move(h), std::move(payload));
}

}  // namespace dagprobe
