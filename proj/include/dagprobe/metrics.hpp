#pragma once

// Per-graph evaluation metrics, aggregation, and answer-tag parsing.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dagprobe/error.hpp"
#include "dagprobe/graph.hpp"

namespace dagprobe {

/// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Spearman rank correlation with average ranks for ties; undefined when
/// either side is constant.
inline std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("spearman: length mismatch");
  if (x.size() < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

/// Index of the largest predicted depth; ties go to the lowest index.
inline std::size_t predict_sink(std::span<const double> depths) {
  if (depths.empty()) throw ValidationError("predict_sink: no nodes");
  std::size_t best = 0;
  for (std::size_t v = 1; v < depths.size(); ++v)
    if (depths[v] > depths[best]) best = v;
  return best;
}

inline bool sink_accuracy(std::span<const double> predicted_depths, std::size_t gold_sink) {
  return predict_sink(predicted_depths) == gold_sink;
}

inline constexpr int kMaxDepthBin = 5;

/// Mean |pred - gold| per gold depth 0..5; bins with no nodes are absent.
inline std::map<int, double> depth_mae_binned(std::span<const double> predicted,
                                              std::span<const int> gold) {
  std::map<int, double> sum;
  std::map<int, std::size_t> count;
  for (std::size_t v = 0; v < gold.size(); ++v) {
    if (gold[v] < 0 || gold[v] > kMaxDepthBin) continue;
    sum[gold[v]] += std::abs(predicted[v] - gold[v]);
    ++count[gold[v]];
  }
  for (auto& [bin, s] : sum) s /= static_cast<double>(count[bin]);
  return sum;
}

/// Fraction of unordered pairs with different gold depths whose predicted
/// order agrees. Predicted ties count as wrong. Undefined with no such pair.
inline std::optional<double> depth_pair_accuracy(std::span<const double> predicted,
                                                 std::span<const int> gold) {
  std::size_t total = 0, right = 0;
  for (std::size_t u = 0; u < gold.size(); ++u) {
    for (std::size_t v = u + 1; v < gold.size(); ++v) {
      if (gold[u] == gold[v]) continue;
      ++total;
      const bool gold_up = gold[u] > gold[v];
      if (predicted[u] != predicted[v] && (predicted[u] > predicted[v]) == gold_up) ++right;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(right) / static_cast<double>(total);
}

/// Overlap between the gold leaves and the k shallowest predicted nodes,
/// k = number of gold leaves. Boundary ties go to the lowest index.
inline double leaf_accuracy(std::span<const double> predicted_depths,
                            std::span<const std::size_t> gold_leaves) {
  const std::size_t k = gold_leaves.size();
  if (k == 0) return 0.0;
  std::vector<std::size_t> idx(predicted_depths.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return predicted_depths[a] < predicted_depths[b];
  });
  const std::set<std::size_t> leaves(gold_leaves.begin(), gold_leaves.end());
  std::size_t hit = 0;
  for (std::size_t i = 0; i < k && i < idx.size(); ++i) hit += leaves.count(idx[i]);
  return static_cast<double>(hit) / static_cast<double>(k);
}

struct EdgeScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Set-based edge precision/recall/F1. An empty prediction scores precision 0.
inline EdgeScores edge_prf(std::span<const Edge> predicted, std::span<const Edge> gold) {
  const std::set<Edge> p(predicted.begin(), predicted.end());
  const std::set<Edge> g(gold.begin(), gold.end());
  std::size_t hit = 0;
  for (const Edge& e : p) hit += g.count(e);
  EdgeScores s;
  s.precision = p.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(p.size());
  s.recall = g.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(g.size());
  s.f1 = hit == 0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

// ---------------------------------------------------------------------------

enum class Outcome { correct, incorrect, incomplete };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::correct: return "correct";
    case Outcome::incorrect: return "incorrect";
    case Outcome::incomplete: return "incomplete";
  }
  return "?";
}

inline Outcome outcome_from_string(std::string_view s) {
  if (s == "correct") return Outcome::correct;
  if (s == "incorrect") return Outcome::incorrect;
  if (s == "incomplete") return Outcome::incomplete;
  throw FormatError("unknown outcome '" + std::string(s) + "'");
}

struct OutcomeRecord {
  std::string example_id;
  Outcome outcome = Outcome::incomplete;
  std::string raw_answer;
};

/// The token after the first "<answer>" tag (case-insensitive); nullopt
/// when there is no tag.
inline std::optional<std::string> answer_token(std::string_view text) {
  std::string lower(text);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const std::string_view tag = "<answer>";
  const auto pos = lower.find(tag);
  if (pos == std::string::npos) return std::nullopt;
  std::size_t i = pos + tag.size();
  while (i < lower.size() && std::isspace(static_cast<unsigned char>(lower[i]))) ++i;
  std::size_t j = i;
  while (j < lower.size() && !std::isspace(static_cast<unsigned char>(lower[j])) && lower[j] != '<') ++j;
  std::string tok = lower.substr(i, j - i);
  while (!tok.empty() && !std::isalnum(static_cast<unsigned char>(tok.back()))) tok.pop_back();
  return tok;
}

inline OutcomeRecord parse_answer(std::string_view example_id, std::string_view generation,
                                  bool gold) {
  OutcomeRecord r;
  r.example_id = std::string(example_id);
  const auto tok = answer_token(generation);
  r.raw_answer = tok.value_or("");
  if (!tok || (*tok != "true" && *tok != "false")) {
    r.outcome = Outcome::incomplete;
  } else {
    r.outcome = ((*tok == "true") == gold) ? Outcome::correct : Outcome::incorrect;
  }
  return r;
}

// ---------------------------------------------------------------------------

struct GraphMetricRecord {
  std::string graph_id;
  int layer = 0;
  std::string condition;
  std::string variant;
  std::string outcome = "all";
  std::optional<double> depth_spearman;
  std::optional<double> dist_spearman;
  bool sink_correct = false;
  std::map<int, double> depth_mae_by_bin;
  std::optional<double> depth_pair_accuracy;
  double leaf_accuracy = 0.0;
  EdgeScores edges;
};

struct GroupKey {
  int layer = 0;
  std::string condition;
  std::string variant;
  std::string outcome;

  auto operator<=>(const GroupKey&) const = default;
};

struct MeanStat {
  double mean = 0.0;
  std::size_t count = 0;     // records contributing
  std::size_t excluded = 0;  // records where the metric was undefined
};

struct AggregateRow {
  GroupKey key;
  std::size_t graphs = 0;
  MeanStat depth_spearman;
  MeanStat dist_spearman;
  MeanStat sink_accuracy;
  MeanStat depth_pair_accuracy;
  MeanStat leaf_accuracy;
  MeanStat edge_precision;
  MeanStat edge_recall;
  MeanStat edge_f1;
  std::map<int, MeanStat> depth_mae_by_bin;
};

enum class GroupBy { layer_condition_variant, with_outcome };

namespace detail {

struct Acc {
  double sum = 0.0;
  std::size_t n = 0, excluded = 0;
  void add(std::optional<double> v) {
    if (v) {
      sum += *v;
      ++n;
    } else {
      ++excluded;
    }
  }
  MeanStat stat() const { return {n ? sum / static_cast<double>(n) : 0.0, n, excluded}; }
};

}  // namespace detail

/// Arithmetic mean per group; undefined values are excluded from their
/// metric's mean and counted.
inline std::vector<AggregateRow> aggregate(std::span<const GraphMetricRecord> records,
                                           GroupBy by = GroupBy::with_outcome) {
  struct Accs {
    std::size_t graphs = 0;
    detail::Acc ds, dd, sink, pair, leaf, p, r, f;
    std::map<int, detail::Acc> mae;
  };
  std::map<GroupKey, Accs> groups;
  for (const auto& rec : records) {
    GroupKey k{rec.layer, rec.condition, rec.variant,
               by == GroupBy::with_outcome ? rec.outcome : std::string("all")};
    Accs& a = groups[k];
    ++a.graphs;
    a.ds.add(rec.depth_spearman);
    a.dd.add(rec.dist_spearman);
    a.sink.add(rec.sink_correct ? 1.0 : 0.0);
    a.pair.add(rec.depth_pair_accuracy);
    a.leaf.add(rec.leaf_accuracy);
    a.p.add(rec.edges.precision);
    a.r.add(rec.edges.recall);
    a.f.add(rec.edges.f1);
    for (const auto& [bin, v] : rec.depth_mae_by_bin) a.mae[bin].add(v);
  }
  std::vector<AggregateRow> rows;
  for (const auto& [k, a] : groups) {
    AggregateRow row;
    row.key = k;
    row.graphs = a.graphs;
    row.depth_spearman = a.ds.stat();
    row.dist_spearman = a.dd.stat();
    row.sink_accuracy = a.sink.stat();
    row.depth_pair_accuracy = a.pair.stat();
    row.leaf_accuracy = a.leaf.stat();
    row.edge_precision = a.p.stat();
    row.edge_recall = a.r.stat();
    row.edge_f1 = a.f.stat();
    for (const auto& [bin, acc] : a.mae) row.depth_mae_by_bin[bin] = acc.stat();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace dagprobe
