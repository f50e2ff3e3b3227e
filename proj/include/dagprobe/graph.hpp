#pragma once

// Reasoning-DAG data model and its graph-theoretic targets.
//
// Path lengths count edges. raw depth is the longest path to the sink,
// normalized depth flips it so the sink is deepest, and the pairwise
// distance is the longest directed path between two nodes in whichever
// direction exists.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "dagprobe/error.hpp"

namespace dagprobe {

struct NodeRecord {
  std::string node_id;
  std::string text;
  bool is_fact = false;

  bool operator==(const NodeRecord&) const = default;
};

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;

  auto operator<=>(const Edge&) const = default;
};

struct ReasoningGraph {
  std::string graph_id;
  std::vector<NodeRecord> nodes;
  std::vector<Edge> edges;
  std::size_t sink = 0;

  std::size_t size() const { return nodes.size(); }
  bool operator==(const ReasoningGraph&) const = default;
};

/// Symmetric node-by-node matrix of path lengths with an explicit marker
/// for pairs where neither node reaches the other.
class DistanceMatrix {
 public:
  static constexpr int kUndefined = -1;

  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), cells_(n * n, kUndefined) {}

  std::size_t size() const { return n_; }

  std::optional<int> at(std::size_t u, std::size_t v) const {
    const int d = cells_[u * n_ + v];
    if (d == kUndefined) return std::nullopt;
    return d;
  }

  bool defined(std::size_t u, std::size_t v) const {
    return cells_[u * n_ + v] != kUndefined;
  }

  void set(std::size_t u, std::size_t v, int d) {
    cells_[u * n_ + v] = d;
    cells_[v * n_ + u] = d;
  }

  bool operator==(const DistanceMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<int> cells_;
};

struct GraphTargets {
  std::vector<int> raw_depth;
  std::vector<int> norm_depth;
  DistanceMatrix dist;

  bool operator==(const GraphTargets&) const = default;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> out_adjacency(std::size_t n,
                                                           std::span<const Edge> edges) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (const Edge& e : edges) adj[e.src].push_back(e.dst);
  return adj;
}

}  // namespace detail

/// Kahn's algorithm; nullopt when the edge set has a cycle. Ties are
/// resolved by lowest index so the order is deterministic.
inline std::optional<std::vector<std::size_t>> topological_order(std::size_t n,
                                                                 std::span<const Edge> edges) {
  std::vector<std::size_t> indegree(n, 0);
  for (const Edge& e : edges) ++indegree[e.dst];
  const auto adj = detail::out_adjacency(n, edges);

  std::set<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.insert(v);

  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (std::size_t w : adj[v])
      if (--indegree[w] == 0) ready.insert(w);
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

inline std::vector<std::size_t> out_degrees(const ReasoningGraph& g) {
  std::vector<std::size_t> deg(g.size(), 0);
  for (const Edge& e : g.edges) ++deg[e.src];
  return deg;
}

inline std::vector<std::size_t> in_degrees(const ReasoningGraph& g) {
  std::vector<std::size_t> deg(g.size(), 0);
  for (const Edge& e : g.edges) ++deg[e.dst];
  return deg;
}

/// Nodes with in-degree zero, in canonical order.
inline std::vector<std::size_t> leaf_nodes(const ReasoningGraph& g) {
  const auto indeg = in_degrees(g);
  std::vector<std::size_t> leaves;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (indeg[v] == 0) leaves.push_back(v);
  return leaves;
}

/// Which nodes have a directed path to `target` (target itself included).
inline std::vector<bool> reaches(const ReasoningGraph& g, std::size_t target) {
  std::vector<std::vector<std::size_t>> rev(g.size());
  for (const Edge& e : g.edges) rev[e.dst].push_back(e.src);
  std::vector<bool> seen(g.size(), false);
  std::vector<std::size_t> stack{target};
  seen[target] = true;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t u : rev[v]) {
      if (!seen[u]) {
        seen[u] = true;
        stack.push_back(u);
      }
    }
  }
  return seen;
}

/// Throws ValidationError naming the first violated invariant.
inline void validate(const ReasoningGraph& g) {
  const std::string where = "graph '" + g.graph_id + "': ";
  if (g.nodes.empty()) throw ValidationError(where + "no nodes");
  std::unordered_set<std::string> ids;
  for (const NodeRecord& n : g.nodes) {
    if (n.text.empty()) throw ValidationError(where + "node '" + n.node_id + "' has empty text");
    if (!ids.insert(n.node_id).second)
      throw ValidationError(where + "duplicate node id '" + n.node_id + "'");
  }
  std::set<Edge> seen;
  for (const Edge& e : g.edges) {
    if (e.src >= g.size() || e.dst >= g.size())
      throw ValidationError(where + "edge index out of range");
    if (e.src == e.dst) throw ValidationError(where + "self-loop on '" + g.nodes[e.src].node_id + "'");
    if (!seen.insert(e).second)
      throw ValidationError(where + "duplicate edge " + g.nodes[e.src].node_id + "->" +
                            g.nodes[e.dst].node_id);
  }
  if (g.sink >= g.size()) throw ValidationError(where + "sink index out of range");
  if (!topological_order(g.size(), g.edges)) throw ValidationError(where + "graph has a cycle");
  if (out_degrees(g)[g.sink] != 0) throw ValidationError(where + "sink has outgoing edges");
  const auto ok = reaches(g, g.sink);
  for (std::size_t v = 0; v < g.size(); ++v)
    if (!ok[v])
      throw ValidationError(where + "node '" + g.nodes[v].node_id + "' cannot reach the sink");
}

/// Longest path (edge count) from every node to the sink, by dynamic
/// programming over reverse topological order.
inline std::vector<int> compute_raw_depths(const ReasoningGraph& g) {
  const auto order = topological_order(g.size(), g.edges);
  if (!order) throw ValidationError("graph '" + g.graph_id + "': graph has a cycle");
  const auto adj = detail::out_adjacency(g.size(), g.edges);

  constexpr int kNone = -1;
  std::vector<int> depth(g.size(), kNone);
  depth[g.sink] = 0;
  for (auto it = order->rbegin(); it != order->rend(); ++it) {
    const std::size_t v = *it;
    if (v == g.sink) continue;
    for (std::size_t w : adj[v])
      if (depth[w] != kNone) depth[v] = std::max(depth[v], depth[w] + 1);
  }
  for (std::size_t v = 0; v < g.size(); ++v)
    if (depth[v] == kNone)
      throw ValidationError("graph '" + g.graph_id + "': node '" + g.nodes[v].node_id +
                            "' cannot reach the sink");
  return depth;
}

inline std::vector<int> compute_norm_depths(std::span<const int> raw_depth) {
  if (raw_depth.empty()) return {};
  const int top = *std::max_element(raw_depth.begin(), raw_depth.end());
  std::vector<int> out;
  out.reserve(raw_depth.size());
  for (int d : raw_depth) out.push_back(top - d);
  return out;
}

/// All-pairs longest directed path, symmetrized by taking whichever
/// direction exists. One DAG longest-path pass per source: O(V·(V+E)).
inline DistanceMatrix compute_pairwise_distances(const ReasoningGraph& g) {
  const std::size_t n = g.size();
  const auto order = topological_order(n, g.edges);
  if (!order) throw ValidationError("graph '" + g.graph_id + "': graph has a cycle");
  const auto adj = detail::out_adjacency(n, g.edges);

  DistanceMatrix dist(n);
  std::vector<int> longest(n);
  for (std::size_t src = 0; src < n; ++src) {
    std::fill(longest.begin(), longest.end(), DistanceMatrix::kUndefined);
    longest[src] = 0;
    for (std::size_t v : *order) {
      if (longest[v] == DistanceMatrix::kUndefined) continue;
      for (std::size_t w : adj[v]) longest[w] = std::max(longest[w], longest[v] + 1);
    }
    for (std::size_t dst = 0; dst < n; ++dst) {
      if (longest[dst] == DistanceMatrix::kUndefined) continue;
      // A DAG has a path in at most one direction between distinct nodes.
      const auto prev = dist.at(src, dst);
      dist.set(src, dst, std::max(prev.value_or(0), longest[dst]));
    }
  }
  return dist;
}

inline GraphTargets compute_targets(const ReasoningGraph& g) {
  GraphTargets t;
  t.raw_depth = compute_raw_depths(g);
  t.norm_depth = compute_norm_depths(t.raw_depth);
  t.dist = compute_pairwise_distances(g);
  return t;
}

inline std::optional<std::size_t> find_node(const ReasoningGraph& g, std::string_view node_id) {
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.nodes[i].node_id == node_id) return i;
  return std::nullopt;
}

}  // namespace dagprobe
