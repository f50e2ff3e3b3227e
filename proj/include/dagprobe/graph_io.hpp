#pragma once

// JSON-lines graph file:
//   {"graph_id", "nodes":[{"id","text","is_fact"}], "edges":[[src_id,dst_id]], "sink": id}
// Node order in the file is the canonical index order.
//
// Node-text file (one line per node):
//   {"graph_id", "node_id", "text"}

#include <string>
#include <unordered_map>
#include <vector>

#include "dagprobe/error.hpp"
#include "dagprobe/graph.hpp"
#include "dagprobe/io_util.hpp"
#include "json.hpp"

namespace dagprobe {

using ordered_json = nlohmann::ordered_json;

inline ordered_json graph_to_json(const ReasoningGraph& g) {
  ordered_json j;
  j["graph_id"] = g.graph_id;
  ordered_json nodes = ordered_json::array();
  for (const NodeRecord& n : g.nodes)
    nodes.push_back({{"id", n.node_id}, {"text", n.text}, {"is_fact", n.is_fact}});
  j["nodes"] = std::move(nodes);
  ordered_json edges = ordered_json::array();
  for (const Edge& e : g.edges)
    edges.push_back(ordered_json::array({g.nodes[e.src].node_id, g.nodes[e.dst].node_id}));
  j["edges"] = std::move(edges);
  j["sink"] = g.nodes.at(g.sink).node_id;
  return j;
}

/// Parses and validates one graph object.
inline ReasoningGraph graph_from_json(const nlohmann::json& j) {
  try {
    ReasoningGraph g;
    g.graph_id = j.at("graph_id").get<std::string>();
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& n : j.at("nodes")) {
      NodeRecord rec;
      rec.node_id = n.at("id").get<std::string>();
      rec.text = n.at("text").get<std::string>();
      rec.is_fact = n.value("is_fact", false);
      index.emplace(rec.node_id, g.nodes.size());
      g.nodes.push_back(std::move(rec));
    }
    auto lookup = [&](const std::string& id) {
      auto it = index.find(id);
      if (it == index.end())
        throw ValidationError("graph '" + g.graph_id + "': unknown node id '" + id + "'");
      return it->second;
    };
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2)
        throw FormatError("graph '" + g.graph_id + "': edge must be [src_id, dst_id]");
      g.edges.push_back({lookup(e[0].get<std::string>()), lookup(e[1].get<std::string>())});
    }
    g.sink = lookup(j.at("sink").get<std::string>());
    validate(g);
    return g;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("graph record schema mismatch: ") + ex.what());
  }
}

inline std::vector<ReasoningGraph> read_graphs(const fs::path& path) {
  std::vector<ReasoningGraph> graphs;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& ex) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": invalid JSON: " + ex.what());
    }
    graphs.push_back(graph_from_json(j));
  }
  return graphs;
}

inline std::string graphs_to_jsonl(const std::vector<ReasoningGraph>& graphs) {
  std::string out;
  for (const auto& g : graphs) {
    out += graph_to_json(g).dump();
    out += '\n';
  }
  return out;
}

inline void write_graphs(const fs::path& path, const std::vector<ReasoningGraph>& graphs) {
  write_file_atomic(path, graphs_to_jsonl(graphs));
}

inline void write_node_texts(const fs::path& path, const std::vector<ReasoningGraph>& graphs) {
  std::string out;
  for (const auto& g : graphs) {
    for (const auto& n : g.nodes) {
      ordered_json j;
      j["graph_id"] = g.graph_id;
      j["node_id"] = n.node_id;
      j["text"] = n.text;
      out += j.dump();
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

}  // namespace dagprobe
