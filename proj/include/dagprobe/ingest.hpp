#pragma once

// Proof-trace ingestion: normalized theory records -> reasoning DAGs.
//
// Normalized JSON-lines record:
//   {"example_id", "theory", "question", "answer",
//    "facts": [{"id","text"}],
//    "proof": [{"premises":[ids], "conclusion": id, "text": ...}]}
//
// Premise ids must name a fact or an earlier conclusion. Statements are
// deduplicated by whitespace-normalized text, so a conclusion reused by
// several rule applications becomes one node with several out-edges.

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dagprobe/error.hpp"
#include "dagprobe/graph.hpp"
#include "dagprobe/io_util.hpp"
#include "json.hpp"

namespace dagprobe {

struct FactRecord {
  std::string id;
  std::string text;
};

struct ProofStep {
  std::vector<std::string> premises;
  std::string conclusion;
  std::string text;
};

struct TheoryRecord {
  std::string example_id;
  std::string theory_text;
  std::string query_text;
  bool gold_answer = false;
  std::vector<FactRecord> facts;
  std::vector<ProofStep> proof_steps;
};

struct IngestResult {
  ReasoningGraph graph;
  std::size_t dropped_nodes = 0;  // side derivations with no path to the sink
};

inline IngestResult build_graph(const TheoryRecord& record) {
  const std::string where = "example '" + record.example_id + "': ";

  std::unordered_map<std::string, std::string> fact_text;
  for (const auto& f : record.facts) fact_text.emplace(f.id, f.text);

  ReasoningGraph full;
  full.graph_id = record.example_id;
  std::unordered_map<std::string, std::size_t> by_statement;
  std::unordered_map<std::string, std::size_t> by_id;

  auto intern = [&](const std::string& id, const std::string& text, bool is_fact) {
    std::string key = normalize_whitespace(text);
    if (key.empty()) throw ValidationError(where + "statement '" + id + "' has empty text");
    auto [it, inserted] = by_statement.emplace(key, full.nodes.size());
    if (inserted) full.nodes.push_back({id, key, is_fact});
    by_id[id] = it->second;
    return it->second;
  };

  if (record.proof_steps.empty()) {
    const std::string query = normalize_whitespace(record.query_text);
    for (const auto& f : record.facts) {
      if (normalize_whitespace(f.text) == query) {
        full.nodes.push_back({f.id, query, true});
        full.sink = 0;
        validate(full);
        return {std::move(full), 0};
      }
    }
    throw ValidationError(where + "empty proof and the question is not a stated fact");
  }

  std::set<Edge> edge_set;
  for (const ProofStep& step : record.proof_steps) {
    std::vector<std::size_t> premise_nodes;
    for (const std::string& pid : step.premises) {
      if (auto it = by_id.find(pid); it != by_id.end()) {
        premise_nodes.push_back(it->second);
      } else if (auto ft = fact_text.find(pid); ft != fact_text.end()) {
        premise_nodes.push_back(intern(pid, ft->second, true));
      } else {
        throw ValidationError(where + "premise '" + pid +
                              "' is neither a fact nor an earlier conclusion");
      }
    }
    const std::size_t conclusion = intern(step.conclusion, step.text, false);
    for (std::size_t p : premise_nodes) {
      if (p == conclusion)
        throw ValidationError(where + "cycle: '" + full.nodes[p].text + "' derives itself");
      if (edge_set.insert({p, conclusion}).second) full.edges.push_back({p, conclusion});
    }
  }
  full.sink = by_id.at(record.proof_steps.back().conclusion);

  if (!topological_order(full.size(), full.edges))
    throw ValidationError(where + "cycle detected in proof trace");

  const auto keep = reaches(full, full.sink);
  std::vector<std::size_t> remap(full.size(), 0);
  IngestResult result;
  ReasoningGraph& g = result.graph;
  g.graph_id = full.graph_id;
  for (std::size_t v = 0; v < full.size(); ++v) {
    if (!keep[v]) {
      ++result.dropped_nodes;
      continue;
    }
    remap[v] = g.nodes.size();
    g.nodes.push_back(full.nodes[v]);
  }
  for (const Edge& e : full.edges)
    if (keep[e.src] && keep[e.dst]) g.edges.push_back({remap[e.src], remap[e.dst]});
  g.sink = remap[full.sink];
  validate(g);
  return result;
}

enum class InputMode { contextual, node_only };

/// Half-open interval of Unicode code points.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const CharSpan&) const = default;
};

struct NodeInput {
  std::string text;
  CharSpan span;  // where the node text sits inside `text`
};

/// Builds the encoder input for one node: theory, newline, node text in
/// contextual mode; the node text alone in node-only mode.
inline NodeInput node_input_text(std::string_view theory, std::string_view node_text,
                                 InputMode mode) {
  NodeInput out;
  if (mode == InputMode::contextual) {
    out.text.reserve(theory.size() + 1 + node_text.size());
    out.text.append(theory);
    out.text.push_back('\n');
  }
  const std::size_t begin = utf8_length(out.text);
  out.text.append(node_text);
  out.span = {begin, begin + utf8_length(node_text)};
  return out;
}

/// Slices a code-point span out of a UTF-8 string.
inline std::string slice_code_points(std::string_view s, CharSpan span) {
  std::size_t cp = 0;
  std::size_t start = s.size();
  std::size_t stop = s.size();
  for (std::size_t i = 0; i <= s.size(); ++i) {
    const bool boundary = i == s.size() || (static_cast<unsigned char>(s[i]) & 0xC0) != 0x80;
    if (!boundary) continue;
    if (cp == span.begin) start = i;
    if (cp == span.end) {
      stop = i;
      break;
    }
    ++cp;
  }
  return std::string(s.substr(start, stop - start));
}

inline TheoryRecord theory_record_from_json(const nlohmann::json& j) {
  try {
    TheoryRecord r;
    r.example_id = j.at("example_id").get<std::string>();
    r.theory_text = j.at("theory").get<std::string>();
    r.query_text = j.at("question").get<std::string>();
    const auto& ans = j.at("answer");
    if (ans.is_boolean()) {
      r.gold_answer = ans.get<bool>();
    } else {
      const std::string s = ans.get<std::string>();
      if (s != "true" && s != "false" && s != "True" && s != "False")
        throw FormatError("example '" + r.example_id + "': answer must be true or false");
      r.gold_answer = s == "true" || s == "True";
    }
    if (j.contains("facts"))
      for (const auto& f : j.at("facts"))
        r.facts.push_back({f.at("id").get<std::string>(), f.at("text").get<std::string>()});
    for (const auto& s : j.at("proof")) {
      ProofStep step;
      step.premises = s.at("premises").get<std::vector<std::string>>();
      step.conclusion = s.at("conclusion").get<std::string>();
      step.text = s.at("text").get<std::string>();
      r.proof_steps.push_back(std::move(step));
    }
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("theory record schema mismatch: ") + ex.what());
  }
}

inline nlohmann::ordered_json theory_record_to_json(const TheoryRecord& r) {
  nlohmann::ordered_json j;
  j["example_id"] = r.example_id;
  j["theory"] = r.theory_text;
  j["question"] = r.query_text;
  j["answer"] = r.gold_answer;
  auto facts = nlohmann::ordered_json::array();
  for (const auto& f : r.facts) facts.push_back({{"id", f.id}, {"text", f.text}});
  j["facts"] = std::move(facts);
  auto proof = nlohmann::ordered_json::array();
  for (const auto& s : r.proof_steps)
    proof.push_back({{"premises", s.premises}, {"conclusion", s.conclusion}, {"text", s.text}});
  j["proof"] = std::move(proof);
  return j;
}

inline std::vector<TheoryRecord> read_theory_records(const fs::path& path) {
  std::vector<TheoryRecord> out;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    try {
      out.push_back(theory_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& ex) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": invalid JSON: " + ex.what());
    }
  }
  return out;
}

}  // namespace dagprobe
