#pragma once

// Threshold-rule DAG reconstruction from predicted depths and distances.
//
// A pair {u, v} becomes an edge when its predicted distance is at most
// tau_dist and its predicted depth gap is at most tau_gap; the edge points
// from the shallower to the deeper node. Pairs with exactly equal predicted
// depth never get an edge, so the result is acyclic for any input.

#include <cmath>
#include <cstdio>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dagprobe/error.hpp"
#include "dagprobe/graph.hpp"
#include "dagprobe/matrix.hpp"
#include "dagprobe/metrics.hpp"

namespace dagprobe {

struct ReconstructionParams {
  double tau_dist = 1.0;
  double tau_gap = 1.0;
};

struct PredictedGraph {
  std::vector<double> depths;
  std::size_t sink = 0;
  std::vector<Edge> edges;
};

/// `distances` must be n x n; non-finite entries (e.g. +inf for gold
/// inputs on unreachable pairs) never pass the distance threshold.
inline PredictedGraph reconstruct(std::span<const double> depths, const Matrix& distances,
                                  ReconstructionParams params) {
  const std::size_t n = depths.size();
  if (distances.rows() != n || distances.cols() != n)
    throw ValidationError("reconstruct: distance matrix does not match node count");
  if (!std::isfinite(params.tau_dist) || !std::isfinite(params.tau_gap))
    throw ValidationError("reconstruct: thresholds must be finite");
  for (double d : depths)
    if (!std::isfinite(d)) throw ValidationError("reconstruct: non-finite predicted depth");

  PredictedGraph g;
  g.depths.assign(depths.begin(), depths.end());
  g.sink = predict_sink(depths);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (depths[u] == depths[v]) continue;
      if (!(distances(u, v) <= params.tau_dist)) continue;
      if (std::abs(depths[u] - depths[v]) > params.tau_gap) continue;
      if (depths[u] < depths[v])
        g.edges.push_back({u, v});
      else
        g.edges.push_back({v, u});
    }
  }
  return g;
}

/// Gold distances as a dense matrix, with +inf where undefined.
inline Matrix distances_as_matrix(const DistanceMatrix& dist) {
  const std::size_t n = dist.size();
  Matrix m(n, n, 0.0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      m(u, v) = dist.defined(u, v) ? static_cast<double>(*dist.at(u, v)) : INFINITY;
  return m;
}

/// Predictions and gold edges for one graph, as consumed by the sweep.
struct SweepInput {
  std::vector<double> depths;
  Matrix distances;
  std::vector<Edge> gold_edges;
};

struct SweepCell {
  double tau_dist = 0.0;
  double tau_gap = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Mean edge precision/recall/F1 across graphs at every grid point,
/// tau_dist-major.
inline std::vector<SweepCell> threshold_sweep(std::span<const SweepInput> graphs,
                                              std::span<const double> tau_dist_grid,
                                              std::span<const double> tau_gap_grid) {
  std::vector<SweepCell> surface;
  if (graphs.empty()) return surface;
  for (double td : tau_dist_grid) {
    for (double tg : tau_gap_grid) {
      SweepCell cell{td, tg};
      for (const auto& in : graphs) {
        const auto pred = reconstruct(in.depths, in.distances, {td, tg});
        const auto s = edge_prf(pred.edges, in.gold_edges);
        cell.precision += s.precision;
        cell.recall += s.recall;
        cell.f1 += s.f1;
      }
      const double n = static_cast<double>(graphs.size());
      cell.precision /= n;
      cell.recall /= n;
      cell.f1 /= n;
      surface.push_back(cell);
    }
  }
  return surface;
}

/// DOT rendering of a predicted graph: green edges agree with gold, red
/// edges are spurious, dashed grey edges are gold edges that were missed.
inline std::string to_dot(const ReasoningGraph& gold, const PredictedGraph& pred,
                          const std::string& title = {}) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out.push_back('\\');
      if (c == '\n') {
        out += "\\n";
        continue;
      }
      out.push_back(c);
    }
    return out + "\"";
  };
  const std::set<Edge> gold_edges(gold.edges.begin(), gold.edges.end());
  const std::set<Edge> pred_edges(pred.edges.begin(), pred.edges.end());
  std::string dot = "digraph " + quote(title.empty() ? gold.graph_id : title) + " {\n";
  dot += "  rankdir=LR;\n  node [shape=box];\n";
  for (std::size_t v = 0; v < gold.size(); ++v) {
    char depth[32];
    std::snprintf(depth, sizeof(depth), "%.3f", pred.depths[v]);
    std::string attrs = "label=" + quote(gold.nodes[v].node_id + ": " + gold.nodes[v].text +
                                         "\nd=" + depth);
    if (v == pred.sink) attrs += ", peripheries=2";
    if (v == gold.sink) attrs += ", style=bold";
    dot += "  " + quote(gold.nodes[v].node_id) + " [" + attrs + "];\n";
  }
  for (const Edge& e : pred.edges) {
    const char* color = gold_edges.count(e) ? "darkgreen" : "red";
    dot += "  " + quote(gold.nodes[e.src].node_id) + " -> " + quote(gold.nodes[e.dst].node_id) +
           " [color=" + color + "];\n";
  }
  for (const Edge& e : gold.edges) {
    if (pred_edges.count(e)) continue;
    dot += "  " + quote(gold.nodes[e.src].node_id) + " -> " + quote(gold.nodes[e.dst].node_id) +
           " [color=grey, style=dashed];\n";
  }
  dot += "}\n";
  return dot;
}

}  // namespace dagprobe
