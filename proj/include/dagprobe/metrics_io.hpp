#pragma once

// Per-graph metric records as CSV, and generation outcomes as JSON lines.
// CSV lines starting with '#' are provenance comments and are skipped on
// read. Undefined values are empty fields; reals carry 9 significant digits.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dagprobe/error.hpp"
#include "dagprobe/io_util.hpp"
#include "dagprobe/metrics.hpp"
#include "json.hpp"

namespace dagprobe {

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::vector<std::string> parse_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back().push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back().push_back(c);
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  return fields;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw FormatError("CSV schema mismatch: missing column '" + std::string(name) + "'");
  }
};

inline CsvTable read_csv(const fs::path& path) {
  CsvTable t;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (line.starts_with('#')) continue;
    auto fields = parse_csv_line(line);
    if (t.columns.empty()) {
      t.columns = std::move(fields);
      continue;
    }
    if (fields.size() != t.columns.size())
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(t.columns.size()) + " fields, found " +
                        std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

inline std::string format_optional(std::optional<double> x) {
  return x ? format_real(*x) : std::string();
}

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c{"graph_id",       "layer",         "condition",
                               "variant",        "outcome",       "depth_spearman",
                               "dist_spearman",  "sink_correct",  "depth_pair_accuracy",
                               "leaf_accuracy",  "edge_precision", "edge_recall",
                               "edge_f1"};
    for (int b = 0; b <= kMaxDepthBin; ++b) c.push_back("mae_d" + std::to_string(b));
    return c;
  }();
  return cols;
}

inline std::string metrics_to_csv(std::span<const GraphMetricRecord> records,
                                  const std::string& preamble = {}) {
  std::string out = preamble;
  const auto& cols = metric_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (const auto& r : records) {
    out += csv_field(r.graph_id) + "," + std::to_string(r.layer) + "," + csv_field(r.condition) +
           "," + csv_field(r.variant) + "," + csv_field(r.outcome) + "," +
           format_optional(r.depth_spearman) + "," + format_optional(r.dist_spearman) + "," +
           (r.sink_correct ? "1" : "0") + "," + format_optional(r.depth_pair_accuracy) + "," +
           format_real(r.leaf_accuracy) + "," + format_real(r.edges.precision) + "," +
           format_real(r.edges.recall) + "," + format_real(r.edges.f1);
    for (int b = 0; b <= kMaxDepthBin; ++b) {
      auto it = r.depth_mae_by_bin.find(b);
      out += ",";
      if (it != r.depth_mae_by_bin.end()) out += format_real(it->second);
    }
    out += "\n";
  }
  return out;
}

namespace detail {

inline double parse_real(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    const double x = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw FormatError("metrics CSV: bad number '" + s + "' in column " + std::string(what));
  }
}

inline std::optional<double> parse_optional(const std::string& s, std::string_view what) {
  if (s.empty()) return std::nullopt;
  return parse_real(s, what);
}

}  // namespace detail

inline std::vector<GraphMetricRecord> read_metrics_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  if (t.columns.empty()) return {};
  std::map<std::string, std::size_t> at;
  for (const auto& c : metric_columns()) at[c] = t.column(c);
  std::vector<GraphMetricRecord> out;
  for (const auto& row : t.rows) {
    GraphMetricRecord r;
    r.graph_id = row[at["graph_id"]];
    r.layer = static_cast<int>(detail::parse_real(row[at["layer"]], "layer"));
    r.condition = row[at["condition"]];
    r.variant = row[at["variant"]];
    r.outcome = row[at["outcome"]];
    r.depth_spearman = detail::parse_optional(row[at["depth_spearman"]], "depth_spearman");
    r.dist_spearman = detail::parse_optional(row[at["dist_spearman"]], "dist_spearman");
    r.sink_correct = row[at["sink_correct"]] == "1";
    r.depth_pair_accuracy = detail::parse_optional(row[at["depth_pair_accuracy"]], "depth_pair_accuracy");
    r.leaf_accuracy = detail::parse_real(row[at["leaf_accuracy"]], "leaf_accuracy");
    r.edges.precision = detail::parse_real(row[at["edge_precision"]], "edge_precision");
    r.edges.recall = detail::parse_real(row[at["edge_recall"]], "edge_recall");
    r.edges.f1 = detail::parse_real(row[at["edge_f1"]], "edge_f1");
    for (int b = 0; b <= kMaxDepthBin; ++b) {
      const std::string col = "mae_d" + std::to_string(b);
      if (auto v = detail::parse_optional(row[at[col]], col)) r.depth_mae_by_bin[b] = *v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Outcome lines: {"example_id","outcome","raw_answer"}. A line may instead
// carry a raw "generation" and a boolean "gold", in which case the outcome is
// parsed here.

inline nlohmann::ordered_json outcome_record_to_json(const OutcomeRecord& r) {
  nlohmann::ordered_json j;
  j["example_id"] = r.example_id;
  j["outcome"] = to_string(r.outcome);
  j["raw_answer"] = r.raw_answer;
  return j;
}

inline OutcomeRecord outcome_record_from_json(const nlohmann::json& j) {
  try {
    const std::string id = j.at("example_id").get<std::string>();
    if (j.contains("outcome")) {
      OutcomeRecord r;
      r.example_id = id;
      r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
      r.raw_answer = j.value("raw_answer", std::string());
      return r;
    }
    const auto& gold = j.at("gold");
    bool g = false;
    if (gold.is_boolean()) {
      g = gold.get<bool>();
    } else {
      const auto s = gold.get<std::string>();
      if (s != "true" && s != "false") throw FormatError("outcome gold must be true or false");
      g = s == "true";
    }
    return parse_answer(id, j.at("generation").get<std::string>(), g);
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("outcome record schema mismatch: ") + ex.what());
  }
}

inline std::vector<OutcomeRecord> read_outcomes(const fs::path& path) {
  std::vector<OutcomeRecord> out;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    try {
      out.push_back(outcome_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& ex) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": invalid JSON: " + ex.what());
    }
  }
  return out;
}

inline void write_outcomes(const fs::path& path, std::span<const OutcomeRecord> records) {
  std::string out;
  for (const auto& r : records) out += outcome_record_to_json(r).dump() + "\n";
  write_file_atomic(path, out);
}

}  // namespace dagprobe
