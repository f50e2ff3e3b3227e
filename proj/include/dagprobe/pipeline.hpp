#pragma once

// Pipeline stages behind the command-line tool. Each stage reads and writes
// files under one workspace directory:
//
//   records.jsonl, graphs.jsonl, node_texts.jsonl   ingest / synth
//   features.rdpf, bow.rdpf                         synth, bow
//   split.json                                      train
//   probes/<condition>/L<layer>_<variant>.json      train
//   curves/<condition>/L<layer>_<variant>.csv       train
//   metrics/<condition>.csv                         eval
//   sweeps/<condition>_L<layer>.csv, dot/...        reconstruct
//   report/*.csv                                    report
//
// Every output carries provenance (config hash, seed, format versions) and
// is written atomically.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "dagprobe/error.hpp"
#include "dagprobe/feature_store.hpp"
#include "dagprobe/graph.hpp"
#include "dagprobe/graph_io.hpp"
#include "dagprobe/ingest.hpp"
#include "dagprobe/io_util.hpp"
#include "dagprobe/metrics.hpp"
#include "dagprobe/metrics_io.hpp"
#include "dagprobe/probe.hpp"
#include "dagprobe/probe_io.hpp"
#include "dagprobe/proofwriter.hpp"
#include "dagprobe/random.hpp"
#include "dagprobe/reconstruct.hpp"
#include "dagprobe/synth.hpp"
#include "dagprobe/train.hpp"
#include "json.hpp"

namespace dagprobe::pipeline {

inline constexpr int kProbeFormatVersion = 1;
inline constexpr int kMetricsFormatVersion = 1;

// Seed streams derived from the top-level seed.
inline constexpr std::uint64_t kTestSplitStream = 4;
inline constexpr std::uint64_t kShuffleStream = 5;
inline constexpr std::uint64_t kSynthSizeStream = 6;
inline constexpr std::uint64_t kPlantedStream = 7;
inline constexpr std::uint64_t kBowStream = 8;
inline constexpr std::uint64_t kGraphStreamBase = 100;

struct SynthParams {
  std::string fixture;  // "fiona" or empty for random graphs
  std::size_t graphs = 100;
  std::size_t min_nodes = 10;
  std::size_t max_nodes = 16;
  double edge_prob = 0.15;
  std::size_t dim = 64;
  std::size_t layers = 8;
  int peak_layer = 4;
  double noise_sigma = 0.05;
  double ramp_slope = 0.25;
};

struct RunConfig {
  std::uint64_t seed = 0;
  TrainConfig train;
  double test_fraction = 0.2;
  std::vector<ProbeVariant> variants{ProbeVariant::ranking, ProbeVariant::regression,
                                     ProbeVariant::classification, ProbeVariant::distance};
  std::vector<int> layers;  // empty: every layer in the store
  std::size_t bow_dim = 256;
  ReconstructionParams reconstruction{1.5, 1.5};
  std::vector<double> tau_dist_grid{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  std::vector<double> tau_gap_grid{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  ProbeVariant recon_depth_variant = ProbeVariant::ranking;
  SynthParams synth;
  std::size_t jobs = 1;  // worker threads; never changes outputs

  TrainConfig train_config() const {
    TrainConfig c = train;
    c.seed = seed;
    return c;
  }

  void validate() const {
    train_config().validate();
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
      throw ValidationError("test_fraction must be in [0, 1)");
    if (variants.empty()) throw ValidationError("no probe variants selected");
    if (bow_dim < 2) throw ValidationError("bow_dim must be at least 2");
    if (tau_dist_grid.empty() || tau_gap_grid.empty()) throw ValidationError("empty threshold grid");
    if (!is_depth_variant(recon_depth_variant))
      throw ValidationError("reconstruction needs a depth variant");
    if (synth.min_nodes == 0 || synth.min_nodes > synth.max_nodes)
      throw ValidationError("synth node range is empty");
    if (!(synth.edge_prob >= 0.0 && synth.edge_prob <= 1.0))
      throw ValidationError("synth edge_prob must be in [0, 1]");
    if (synth.layers == 0 || synth.dim < 2) throw ValidationError("synth needs layers and dim >= 2");
    if (jobs == 0) throw ValidationError("jobs must be positive");
  }
};

/// Every field that can change an output; `jobs` is excluded.
inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  auto train = to_json(c.train_config());
  train.erase("seed");
  j["train"] = std::move(train);
  j["test_fraction"] = c.test_fraction;
  auto variants = nlohmann::ordered_json::array();
  for (auto v : c.variants) variants.push_back(to_string(v));
  j["variants"] = std::move(variants);
  j["layers"] = c.layers;
  j["bow_dim"] = c.bow_dim;
  j["reconstruction"] = {{"tau_dist", c.reconstruction.tau_dist},
                         {"tau_gap", c.reconstruction.tau_gap},
                         {"depth_variant", to_string(c.recon_depth_variant)},
                         {"tau_dist_grid", c.tau_dist_grid},
                         {"tau_gap_grid", c.tau_gap_grid}};
  const SynthParams& s = c.synth;
  j["synth"] = {{"fixture", s.fixture},       {"graphs", s.graphs},         {"min_nodes", s.min_nodes},
                {"max_nodes", s.max_nodes},   {"edge_prob", s.edge_prob},   {"dim", s.dim},
                {"layers", s.layers},         {"peak_layer", s.peak_layer}, {"noise_sigma", s.noise_sigma},
                {"ramp_slope", s.ramp_slope}};
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& v : j.at("variants")) c.variants.push_back(variant_from_string(v.get<std::string>()));
    }
    if (j.contains("layers")) c.layers = j.at("layers").get<std::vector<int>>();
    c.bow_dim = j.value("bow_dim", c.bow_dim);
    if (j.contains("reconstruction")) {
      const auto& r = j.at("reconstruction");
      c.reconstruction.tau_dist = r.value("tau_dist", c.reconstruction.tau_dist);
      c.reconstruction.tau_gap = r.value("tau_gap", c.reconstruction.tau_gap);
      if (r.contains("depth_variant"))
        c.recon_depth_variant = variant_from_string(r.at("depth_variant").get<std::string>());
      if (r.contains("tau_dist_grid")) c.tau_dist_grid = r.at("tau_dist_grid").get<std::vector<double>>();
      if (r.contains("tau_gap_grid")) c.tau_gap_grid = r.at("tau_gap_grid").get<std::vector<double>>();
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      SynthParams& p = c.synth;
      p.fixture = s.value("fixture", p.fixture);
      p.graphs = s.value("graphs", p.graphs);
      p.min_nodes = s.value("min_nodes", p.min_nodes);
      p.max_nodes = s.value("max_nodes", p.max_nodes);
      p.edge_prob = s.value("edge_prob", p.edge_prob);
      p.dim = s.value("dim", p.dim);
      p.layers = s.value("layers", p.layers);
      p.peak_layer = s.value("peak_layer", p.peak_layer);
      p.noise_sigma = s.value("noise_sigma", p.noise_sigma);
      p.ramp_slope = s.value("ramp_slope", p.ramp_slope);
    }
    c.jobs = j.value("jobs", c.jobs);
    return c;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("config schema mismatch: ") + ex.what());
  }
}

inline RunConfig load_run_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& ex) {
    throw FormatError(path.string() + ": invalid JSON: " + ex.what());
  }
  if (!j.is_object()) throw FormatError(path.string() + ": config must be a JSON object");
  return run_config_from_json(j);
}

inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(to_json(c).dump())); }

inline nlohmann::ordered_json provenance(const RunConfig& c, std::string_view stage) {
  nlohmann::ordered_json p;
  p["tool"] = "dagprobe";
  p["stage"] = stage;
  p["config_hash"] = config_hash(c);
  p["seed"] = c.seed;
  p["formats"] = {{"rdpf", kRdpfVersion}, {"probe", kProbeFormatVersion}, {"metrics", kMetricsFormatVersion}};
  return p;
}

inline std::string csv_preamble(const RunConfig& c, std::string_view stage,
                                const std::vector<std::string>& notes = {}) {
  std::string out = "# dagprobe " + std::string(stage) + " config_hash=" + config_hash(c) +
                    " seed=" + std::to_string(c.seed) + " rdpf=" + std::to_string(kRdpfVersion) +
                    " probe=" + std::to_string(kProbeFormatVersion) +
                    " metrics=" + std::to_string(kMetricsFormatVersion) + "\n";
  for (const auto& n : notes) out += "# " + n + "\n";
  return out;
}

/// Runs f(0..count-1) on up to `jobs` threads. Each index must write only
/// its own outputs; the first failure (lowest index) is rethrown.
template <class F>
void parallel_for(std::size_t count, std::size_t jobs, F&& f) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(jobs, count); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------

struct Workspace {
  fs::path root;

  fs::path records() const { return root / "records.jsonl"; }
  fs::path graphs() const { return root / "graphs.jsonl"; }
  fs::path node_texts() const { return root / "node_texts.jsonl"; }
  fs::path features() const { return root / "features.rdpf"; }
  fs::path bow() const { return root / "bow.rdpf"; }
  fs::path split() const { return root / "split.json"; }
  fs::path probe(const std::string& condition, int layer, ProbeVariant v) const {
    return root / "probes" / condition / ("L" + std::to_string(layer) + "_" + to_string(v) + ".json");
  }
  fs::path curve(const std::string& condition, int layer, ProbeVariant v) const {
    return root / "curves" / condition / ("L" + std::to_string(layer) + "_" + to_string(v) + ".csv");
  }
  fs::path metrics_dir() const { return root / "metrics"; }
  fs::path metrics(const std::string& condition) const { return metrics_dir() / (condition + ".csv"); }
  fs::path sweeps_dir() const { return root / "sweeps"; }
  fs::path sweep(const std::string& condition, int layer) const {
    return sweeps_dir() / (condition + "_L" + std::to_string(layer) + ".csv");
  }
  fs::path dot(const std::string& condition, int layer, const std::string& graph_id) const {
    std::string safe;
    for (char c : graph_id) safe.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
    return root / "dot" / condition / ("L" + std::to_string(layer)) / (safe + ".dot");
  }
  fs::path report_dir() const { return root / "report"; }
};

inline std::string condition_name(const FeatureStore& store, bool shuffled) {
  return shuffled ? std::string("label_shuffled") : to_string(store.header().condition);
}

/// Graph structure and targets as a stage sees them. Under the label
/// shuffle, each graph's targets are permuted with a per-graph permutation
/// drawn in file order from one stream, and the structure is relabeled to
/// match, so train and eval see the same permuted annotations.
struct StageGraph {
  ReasoningGraph graph;
  GraphTargets targets;
};

inline std::vector<StageGraph> stage_graphs(const std::vector<ReasoningGraph>& graphs, bool shuffled,
                                            std::uint64_t seed) {
  std::vector<StageGraph> out;
  out.reserve(graphs.size());
  Rng rng(derive_seed(seed, kShuffleStream));
  for (const auto& g : graphs) {
    GraphTargets t = compute_targets(g);
    if (!shuffled) {
      out.push_back({g, std::move(t)});
      continue;
    }
    const auto perm = shuffle_labels(t, rng);
    out.push_back({relabel_structure(g, perm), std::move(t)});
  }
  return out;
}

inline Split test_split(std::size_t count, const RunConfig& c) {
  return split_graphs(count, c.test_fraction, derive_seed(c.seed, kTestSplitStream));
}

inline std::vector<int> selected_layers(const FeatureStore& store, const RunConfig& c) {
  if (c.layers.empty()) return store.layers();
  std::vector<int> out;
  for (int l : c.layers) {
    store.layer_position(l);  // throws if absent
    out.push_back(l);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline FeatureStore load_store_for(const fs::path& path, const std::vector<ReasoningGraph>& graphs) {
  FeatureStore store = read_store(path);
  store.validate_against(graphs);
  return store;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOptions {
  std::vector<fs::path> inputs;
  bool proofwriter = false;  // raw release format instead of normalized records
};

struct IngestSummary {
  std::size_t records = 0;
  std::size_t dropped_nodes = 0;
  std::size_t skipped = 0;
};

inline IngestSummary run_ingest(const Workspace& ws, const IngestOptions& opts, std::ostream& log) {
  if (opts.inputs.empty()) throw ValidationError("no input files");
  std::vector<TheoryRecord> records;
  IngestSummary summary;
  for (const auto& path : opts.inputs) {
    if (!opts.proofwriter) {
      auto part = read_theory_records(path);
      records.insert(records.end(), part.begin(), part.end());
      continue;
    }
    std::size_t line_no = 0;
    for (const std::string& line : read_lines(path)) {
      ++line_no;
      nlohmann::json raw;
      try {
        raw = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& ex) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": invalid JSON: " + ex.what());
      }
      proofwriter::ConversionResult conv;
      try {
        conv = proofwriter::convert_record(raw);
      } catch (const nlohmann::json::exception& ex) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": not a ProofWriter record: " + ex.what());
      }
      for (const auto& msg : conv.skipped) log << "ingest: skipped " << msg << "\n";
      summary.skipped += conv.skipped.size();
      records.insert(records.end(), conv.records.begin(), conv.records.end());
    }
  }
  if (records.empty()) throw ValidationError("no records to ingest");

  std::vector<ReasoningGraph> graphs;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.example_id).second)
      throw ValidationError("duplicate example_id '" + r.example_id + "'");
    IngestResult res = build_graph(r);
    if (res.dropped_nodes)
      log << "ingest: " << r.example_id << ": dropped " << res.dropped_nodes
          << " node(s) with no path to the sink\n";
    summary.dropped_nodes += res.dropped_nodes;
    graphs.push_back(std::move(res.graph));
  }
  std::string lines;
  for (const auto& r : records) lines += theory_record_to_json(r).dump() + "\n";
  write_file_atomic(ws.records(), lines);
  write_graphs(ws.graphs(), graphs);
  write_node_texts(ws.node_texts(), graphs);
  summary.records = records.size();
  log << "ingest: " << summary.records << " graph(s), " << summary.dropped_nodes << " dropped node(s), "
      << summary.skipped << " skipped question(s)\n";
  return summary;
}

// ---------------------------------------------------------------------------
// synth and bow

inline std::vector<ReasoningGraph> synth_graphs(const RunConfig& c) {
  const SynthParams& s = c.synth;
  if (!s.fixture.empty()) {
    if (s.fixture != "fiona") throw ValidationError("unknown fixture '" + s.fixture + "'");
    return {fiona_graph()};
  }
  if (s.graphs == 0) throw ValidationError("synth: graph count must be positive");
  std::vector<ReasoningGraph> graphs;
  Rng sizes(derive_seed(c.seed, kSynthSizeStream));
  const std::size_t width = std::to_string(s.graphs - 1).size();
  for (std::size_t i = 0; i < s.graphs; ++i) {
    const std::size_t n = s.min_nodes + static_cast<std::size_t>(sizes.below(s.max_nodes - s.min_nodes + 1));
    ReasoningGraph g = random_dag(n, s.edge_prob, derive_seed(c.seed, kGraphStreamBase + i));
    std::string id = std::to_string(i);
    g.graph_id = "synth-" + std::string(width - id.size(), '0') + id;
    graphs.push_back(std::move(g));
  }
  return graphs;
}

inline PlantedParams planted_params(const RunConfig& c) {
  PlantedParams p;
  p.dim = c.synth.dim;
  p.layers.clear();
  for (std::size_t l = 0; l < c.synth.layers; ++l) p.layers.push_back(static_cast<int>(l));
  p.peak_layer = c.synth.peak_layer;
  p.noise_sigma = c.synth.noise_sigma;
  p.ramp_slope = c.synth.ramp_slope;
  p.seed = derive_seed(c.seed, kPlantedStream);
  return p;
}

inline FeatureStore with_provenance(const FeatureStore& store, const RunConfig& c, std::string_view stage) {
  StoreHeader h = store.header();
  h.meta["provenance"] = provenance(c, stage);
  return FeatureStore(std::move(h), std::vector<float>(store.payload().begin(), store.payload().end()));
}

inline void run_synth(const Workspace& ws, const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto graphs = synth_graphs(c);
  for (const auto& g : graphs) validate(g);
  if (c.synth.fixture == "fiona") {
    write_file_atomic(ws.records(), theory_record_to_json(fiona_record()).dump() + "\n");
  }
  write_graphs(ws.graphs(), graphs);
  write_node_texts(ws.node_texts(), graphs);
  write_store(with_provenance(planted_store(graphs, planted_params(c)), c, "synth"), ws.features());
  write_store(with_provenance(bow_store(graphs, c.bow_dim, derive_seed(c.seed, kBowStream)), c, "synth"),
              ws.bow());
  log << "synth: " << graphs.size() << " graph(s), planted store with " << c.synth.layers
      << " layer(s), dim " << c.synth.dim << "\n";
}

inline void run_bow(const Workspace& ws, const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto graphs = read_graphs(ws.graphs());
  write_store(with_provenance(bow_store(graphs, c.bow_dim, derive_seed(c.seed, kBowStream)), c, "bow"),
              ws.bow());
  log << "bow: " << graphs.size() << " graph(s), dim " << c.bow_dim << "\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  fs::path store;
  bool shuffle_labels = false;
};

inline void write_split(const Workspace& ws, const RunConfig& c, const std::vector<ReasoningGraph>& graphs,
                        const Split& split) {
  nlohmann::ordered_json j;
  j["provenance"] = provenance(c, "train");
  j["test_fraction"] = c.test_fraction;
  auto ids = [&](const std::vector<std::size_t>& idx) {
    auto a = nlohmann::ordered_json::array();
    for (auto i : idx) a.push_back(graphs[i].graph_id);
    return a;
  };
  j["train"] = ids(split.kept);
  j["test"] = ids(split.held_out);
  write_file_atomic(ws.split(), j.dump(2) + "\n");
}

inline void run_train(const Workspace& ws, const TrainOptions& opts, const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto graphs = read_graphs(ws.graphs());
  const FeatureStore store = load_store_for(opts.store, graphs);
  const std::string condition = condition_name(store, opts.shuffle_labels);
  const Split split = test_split(graphs.size(), c);
  write_split(ws, c, graphs, split);
  const auto staged = stage_graphs(graphs, opts.shuffle_labels, c.seed);
  const auto layers = selected_layers(store, c);

  struct Job {
    int layer;
    ProbeVariant variant;
  };
  std::vector<Job> jobs;
  for (int l : layers)
    for (auto v : c.variants) jobs.push_back({l, v});
  std::vector<std::string> messages(jobs.size());

  nlohmann::ordered_json prov = provenance(c, "train");
  prov["store"] = {{"model_name", store.header().model_name},
                   {"condition", to_string(store.header().condition)},
                   {"hidden_dim", store.dim()},
                   {"checksum", hex64(fnv1a64(encode_store(store)))}};
  prov["train_graphs"] = split.kept.size();

  parallel_for(jobs.size(), c.jobs, [&](std::size_t ji) {
    const Job& job = jobs[ji];
    std::vector<GraphData> pool;
    pool.reserve(split.kept.size());
    for (auto gi : split.kept)
      pool.push_back({graphs[gi].graph_id, store.graph_features(graphs[gi], job.layer), staged[gi].targets});
    TrainResult res = train_probe(pool, job.variant, c.train_config(), job.layer);

    ProbeFile f;
    f.probe = res.probe;
    f.condition = condition;
    f.config = c.train_config();
    f.best_dev_loss = res.best_dev_loss;
    f.best_epoch = res.best_epoch;
    if (job.variant == ProbeVariant::ranking) {
      std::vector<double> scores, depths;
      for (auto di : res.dev_graphs) {
        const auto s = predict_depths(res.probe, pool[di].features);
        scores.insert(scores.end(), s.begin(), s.end());
        for (int d : pool[di].targets.norm_depth) depths.push_back(d);
      }
      f.calibration = fit_calibration(scores, depths);
    }
    f.provenance = prov;
    write_probe_file(ws.probe(condition, job.layer, job.variant), f);
    write_file_atomic(ws.curve(condition, job.layer, job.variant),
                      curve_csv(res.curve, csv_preamble(c, "train")));
    messages[ji] = "train: " + condition + " L" + std::to_string(job.layer) + " " + to_string(job.variant) +
                   " best_epoch=" + std::to_string(res.best_epoch) +
                   " dev_loss=" + format_real(res.best_dev_loss);
  });
  for (const auto& m : messages) log << m << "\n";
}

// ---------------------------------------------------------------------------
// eval

/// Depth predictions of one probe on one graph. `scores` are the raw probe
/// outputs used for every rank-based metric; `depths` are in depth units
/// (calibrated for the ranking probe) and feed MAE and reconstruction.
struct DepthPrediction {
  std::vector<double> scores;
  std::vector<double> depths;
};

inline DepthPrediction predict_graph_depths(const ProbeFile& f, const Matrix& features) {
  DepthPrediction p;
  p.scores = predict_depths(f.probe, features);
  p.depths = p.scores;
  if (f.probe.variant == ProbeVariant::ranking)
    for (double& d : p.depths) d = f.calibration.apply(d);
  return p;
}

inline GraphMetricRecord evaluate_graph(const ReasoningGraph& g, const GraphTargets& t,
                                        const DepthPrediction& pred, const Matrix* distances,
                                        ReconstructionParams params) {
  GraphMetricRecord r;
  r.graph_id = g.graph_id;
  const std::vector<double> gold(t.norm_depth.begin(), t.norm_depth.end());
  r.depth_spearman = spearman(pred.scores, gold);
  r.sink_correct = sink_accuracy(pred.scores, g.sink);
  r.depth_mae_by_bin = depth_mae_binned(pred.depths, t.norm_depth);
  r.depth_pair_accuracy = depth_pair_accuracy(pred.scores, t.norm_depth);
  r.leaf_accuracy = leaf_accuracy(pred.scores, leaf_nodes(g));
  if (distances) {
    std::vector<double> p, q;
    for (std::size_t u = 0; u < g.size(); ++u)
      for (std::size_t v = u + 1; v < g.size(); ++v)
        if (auto d = t.dist.at(u, v)) {
          p.push_back((*distances)(u, v));
          q.push_back(*d);
        }
    if (p.size() >= 2) r.dist_spearman = spearman(p, q);
    r.edges = edge_prf(reconstruct(pred.depths, *distances, params).edges, g.edges);
  } else {
    r.edges = edge_prf({}, g.edges);
  }
  return r;
}

struct EvalOptions {
  fs::path store;
  bool shuffle_labels = false;
  bool gold_as_pred = false;
  fs::path outcomes;  // optional OutcomeRecord JSON lines
};

inline std::map<std::string, std::string> load_outcomes(const fs::path& path) {
  std::map<std::string, std::string> out;
  if (path.empty()) return out;
  for (const auto& r : read_outcomes(path)) out[r.example_id] = to_string(r.outcome);
  return out;
}

inline std::vector<GraphMetricRecord> run_eval(const Workspace& ws, const EvalOptions& opts, const RunConfig& c,
                                               std::ostream& log) {
  c.validate();
  const auto graphs = read_graphs(ws.graphs());
  const auto outcomes = load_outcomes(opts.outcomes);
  std::vector<GraphMetricRecord> records;
  std::string condition;

  if (opts.gold_as_pred) {
    condition = "gold";
    for (const auto& g : graphs) {
      const GraphTargets t = compute_targets(g);
      DepthPrediction pred;
      pred.scores.assign(t.norm_depth.begin(), t.norm_depth.end());
      pred.depths = pred.scores;
      const Matrix dist = distances_as_matrix(t.dist);
      GraphMetricRecord r = evaluate_graph(g, t, pred, &dist, c.reconstruction);
      r.layer = 0;
      r.condition = condition;
      r.variant = "gold";
      records.push_back(std::move(r));
    }
  } else {
    if (opts.store.empty()) throw ValidationError("eval needs --store or --gold-as-pred");
    const FeatureStore store = load_store_for(opts.store, graphs);
    condition = condition_name(store, opts.shuffle_labels);
    const Split split = test_split(graphs.size(), c);
    const auto staged = stage_graphs(graphs, opts.shuffle_labels, c.seed);
    const bool has_dist =
        std::find(c.variants.begin(), c.variants.end(), ProbeVariant::distance) != c.variants.end();
    for (int layer : selected_layers(store, c)) {
      std::optional<ProbeFile> dist_probe;
      if (has_dist) dist_probe = read_probe_file(ws.probe(condition, layer, ProbeVariant::distance));
      for (auto v : c.variants) {
        if (!is_depth_variant(v)) continue;
        const ProbeFile depth_probe = read_probe_file(ws.probe(condition, layer, v));
        for (auto gi : split.held_out) {
          const Matrix feats = store.graph_features(graphs[gi], layer);
          const DepthPrediction pred = predict_graph_depths(depth_probe, feats);
          std::optional<Matrix> dist;
          if (dist_probe) dist = predict_distances(dist_probe->probe, feats);
          GraphMetricRecord r = evaluate_graph(staged[gi].graph, staged[gi].targets, pred,
                                               dist ? &*dist : nullptr, c.reconstruction);
          r.layer = layer;
          r.condition = condition;
          r.variant = to_string(v);
          records.push_back(std::move(r));
        }
      }
    }
  }
  if (!outcomes.empty()) {
    for (auto& r : records) {
      auto it = outcomes.find(r.graph_id);
      r.outcome = it == outcomes.end() ? "unmatched" : it->second;
    }
  }
  write_file_atomic(
      ws.metrics(condition),
      metrics_to_csv(records, csv_preamble(c, "eval",
                                           {"mae for the ranking probe uses an affine score-to-depth map "
                                            "fitted by least squares on the dev graphs"})));
  log << "eval: " << condition << ": " << records.size() << " record(s)\n";
  return records;
}

// ---------------------------------------------------------------------------
// reconstruct

struct ReconstructOptions {
  fs::path store;
  bool shuffle_labels = false;
  bool gold_as_pred = false;
  bool write_dot = true;
};

inline std::string sweep_csv(const std::string& condition, int layer, std::span<const SweepCell> cells,
                             const std::string& preamble) {
  std::string out = preamble + "condition,layer,tau_dist,tau_gap,precision,recall,f1\n";
  for (const auto& s : cells)
    out += csv_field(condition) + "," + std::to_string(layer) + "," + format_real(s.tau_dist) + "," +
           format_real(s.tau_gap) + "," + format_real(s.precision) + "," + format_real(s.recall) + "," +
           format_real(s.f1) + "\n";
  return out;
}

inline void run_reconstruct(const Workspace& ws, const ReconstructOptions& opts, const RunConfig& c,
                            std::ostream& log) {
  c.validate();
  const auto graphs = read_graphs(ws.graphs());
  const std::string dot_note = "// " + csv_preamble(c, "reconstruct").substr(2);

  auto emit = [&](const std::string& condition, int layer, const std::vector<const ReasoningGraph*>& gold,
                  std::vector<SweepInput> inputs) {
    if (opts.write_dot) {
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto pred = reconstruct(inputs[i].depths, inputs[i].distances, c.reconstruction);
        write_file_atomic(ws.dot(condition, layer, gold[i]->graph_id), dot_note + to_dot(*gold[i], pred));
      }
    }
    const auto cells = threshold_sweep(inputs, c.tau_dist_grid, c.tau_gap_grid);
    write_file_atomic(ws.sweep(condition, layer), sweep_csv(condition, layer, cells, csv_preamble(c, "reconstruct")));
    log << "reconstruct: " << condition << " L" << layer << ": " << inputs.size() << " graph(s)\n";
  };

  if (opts.gold_as_pred) {
    std::vector<SweepInput> inputs;
    std::vector<const ReasoningGraph*> gold;
    for (const auto& g : graphs) {
      const GraphTargets t = compute_targets(g);
      inputs.push_back({std::vector<double>(t.norm_depth.begin(), t.norm_depth.end()),
                        distances_as_matrix(t.dist), g.edges});
      gold.push_back(&g);
    }
    emit("gold", 0, gold, std::move(inputs));
    return;
  }
  if (opts.store.empty()) throw ValidationError("reconstruct needs --store or --gold-as-pred");
  const FeatureStore store = load_store_for(opts.store, graphs);
  const std::string condition = condition_name(store, opts.shuffle_labels);
  const Split split = test_split(graphs.size(), c);
  const auto staged = stage_graphs(graphs, opts.shuffle_labels, c.seed);
  for (int layer : selected_layers(store, c)) {
    const ProbeFile depth_probe = read_probe_file(ws.probe(condition, layer, c.recon_depth_variant));
    const ProbeFile dist_probe = read_probe_file(ws.probe(condition, layer, ProbeVariant::distance));
    std::vector<SweepInput> inputs;
    std::vector<const ReasoningGraph*> gold;
    for (auto gi : split.held_out) {
      const Matrix feats = store.graph_features(graphs[gi], layer);
      inputs.push_back({predict_graph_depths(depth_probe, feats).depths, predict_distances(dist_probe.probe, feats),
                        staged[gi].graph.edges});
      gold.push_back(&staged[gi].graph);
    }
    emit(condition, layer, gold, std::move(inputs));
  }
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
  std::vector<fs::path> metrics;  // empty: every CSV under <workspace>/metrics
};

inline std::vector<fs::path> csv_files_in(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

inline std::string stat_cells(const MeanStat& s) {
  return format_real(s.mean) + "," + std::to_string(s.count) + "," + std::to_string(s.excluded);
}

inline std::string stat_header(const std::string& name) {
  return name + "," + name + "_n," + name + "_excluded";
}

inline std::string aggregate_csv(std::span<const AggregateRow> rows, bool with_outcome, const std::string& preamble) {
  std::string out = preamble + "layer,condition,variant,";
  if (with_outcome) out += "outcome,";
  out += "graphs";
  for (const char* m : {"depth_spearman", "dist_spearman", "sink_accuracy", "depth_pair_accuracy",
                        "leaf_accuracy", "edge_precision", "edge_recall", "edge_f1"})
    out += "," + stat_header(m);
  out += "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.key.layer) + "," + csv_field(r.key.condition) + "," + csv_field(r.key.variant) + ",";
    if (with_outcome) out += csv_field(r.key.outcome) + ",";
    out += std::to_string(r.graphs);
    for (const MeanStat* s : {&r.depth_spearman, &r.dist_spearman, &r.sink_accuracy, &r.depth_pair_accuracy,
                              &r.leaf_accuracy, &r.edge_precision, &r.edge_recall, &r.edge_f1})
      out += "," + stat_cells(*s);
    out += "\n";
  }
  return out;
}

}  // namespace detail

inline void run_report(const Workspace& ws, const ReportOptions& opts, const RunConfig& c, std::ostream& log) {
  const auto files = opts.metrics.empty() ? csv_files_in(ws.metrics_dir()) : opts.metrics;
  if (files.empty()) throw FileError("no metrics files under " + ws.metrics_dir().string());
  std::vector<GraphMetricRecord> records;
  for (const auto& f : files) {
    auto part = read_metrics_csv(f);
    records.insert(records.end(), part.begin(), part.end());
  }
  if (records.empty()) throw ValidationError("metrics input holds no records");
  const std::string pre = csv_preamble(c, "report");
  const fs::path dir = ws.report_dir();

  const auto layerwise = aggregate(records, GroupBy::layer_condition_variant);
  write_file_atomic(dir / "layerwise.csv", detail::aggregate_csv(layerwise, false, pre));

  // Peak layer per (condition, variant) by mean depth Spearman; ties go to
  // the lower layer.
  std::map<std::pair<std::string, std::string>, const AggregateRow*> peak;
  for (const auto& r : layerwise) {
    auto& best = peak[{r.key.condition, r.key.variant}];
    if (!best || r.depth_spearman.mean > best->depth_spearman.mean) best = &r;
  }
  std::string baselines = pre + "condition,variant,peak_layer,graphs," + detail::stat_header("depth_spearman") +
                          "," + detail::stat_header("dist_spearman") + "," + detail::stat_header("sink_accuracy") +
                          "," + detail::stat_header("edge_f1") + "\n";
  for (const auto& [key, r] : peak)
    baselines += csv_field(key.first) + "," + csv_field(key.second) + "," + std::to_string(r->key.layer) + "," +
                 std::to_string(r->graphs) + "," + detail::stat_cells(r->depth_spearman) + "," +
                 detail::stat_cells(r->dist_spearman) + "," + detail::stat_cells(r->sink_accuracy) + "," +
                 detail::stat_cells(r->edge_f1) + "\n";
  write_file_atomic(dir / "baselines.csv", baselines);

  std::string heat = csv_preamble(c, "report",
                                  {"mae for the ranking probe uses an affine score-to-depth map fitted by least "
                                   "squares on the dev graphs"}) +
                     "layer,condition,variant,depth,mae,graphs\n";
  for (const auto& r : layerwise)
    for (const auto& [bin, s] : r.depth_mae_by_bin)
      heat += std::to_string(r.key.layer) + "," + csv_field(r.key.condition) + "," + csv_field(r.key.variant) + "," +
              std::to_string(bin) + "," + format_real(s.mean) + "," + std::to_string(s.count) + "\n";
  write_file_atomic(dir / "mae_heatmap.csv", heat);

  write_file_atomic(dir / "outcomes.csv",
                    detail::aggregate_csv(aggregate(records, GroupBy::with_outcome), true, pre));
  std::string points = pre + "graph_id,layer,condition,variant,outcome,depth_spearman,dist_spearman\n";
  for (const auto& r : records)
    points += csv_field(r.graph_id) + "," + std::to_string(r.layer) + "," + csv_field(r.condition) + "," +
              csv_field(r.variant) + "," + csv_field(r.outcome) + "," + format_optional(r.depth_spearman) + "," +
              format_optional(r.dist_spearman) + "\n";
  write_file_atomic(dir / "outcome_points.csv", points);

  std::string surface = pre + "condition,layer,tau_dist,tau_gap,precision,recall,f1\n";
  std::size_t sweep_rows = 0;
  for (const auto& f : csv_files_in(ws.sweeps_dir())) {
    const CsvTable t = read_csv(f);
    const std::size_t cols[] = {t.column("condition"), t.column("layer"), t.column("tau_dist"), t.column("tau_gap"),
                                t.column("precision"), t.column("recall"), t.column("f1")};
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < 7; ++i) surface += (i ? "," : "") + csv_field(row[cols[i]]);
      surface += "\n";
      ++sweep_rows;
    }
  }
  write_file_atomic(dir / "f1_surface.csv", surface);
  log << "report: " << records.size() << " record(s) from " << files.size() << " file(s), " << sweep_rows
      << " sweep row(s) -> " << dir.string() << "\n";
}

}  // namespace dagprobe::pipeline
