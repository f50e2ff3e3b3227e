// dagprobe: command-line entry point for the probing pipeline.
//
// Exit codes: 0 success, 1 usage or unexpected error, 2 missing file,
// 3 schema mismatch, 4 format version mismatch, 5 invalid data,
// 6 training failure.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dagprobe/pipeline.hpp"

namespace {

using namespace dagprobe;
namespace pl = dagprobe::pipeline;

enum ExitCode { kOk = 0, kOther = 1, kMissingFile = 2, kSchema = 3, kVersion = 4, kInvalid = 5, kTraining = 6 };

int fail(const std::string& stage, const char* kind, const std::string& what, int code) {
  std::cerr << "dagprobe " << stage << ": " << kind << ": " << what << "\n";
  return code;
}

int run_stage(const std::string& stage, const std::function<void()>& body) {
  try {
    body();
    return kOk;
  } catch (const VersionError& e) {
    return fail(stage, "format version mismatch", e.what(), kVersion);
  } catch (const FormatError& e) {
    return fail(stage, "schema mismatch", e.what(), kSchema);
  } catch (const FileError& e) {
    return fail(stage, "missing file", e.what(), kMissingFile);
  } catch (const ValidationError& e) {
    return fail(stage, "invalid data", e.what(), kInvalid);
  } catch (const TrainingError& e) {
    return fail(stage, "training failed", e.what(), kTraining);
  } catch (const std::exception& e) {
    return fail(stage, "error", e.what(), kOther);
  }
}

/// Command-line values; each one set on the command line overrides the
/// config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<double> lr, weight_decay, dev_fraction, test_fraction;
  std::optional<std::size_t> epochs, batch_size, patience, bow_dim;
  std::vector<std::string> variants;
  std::vector<int> layers;
  std::optional<double> tau_dist, tau_gap;
  std::vector<double> tau_dist_grid, tau_gap_grid;
  std::optional<std::string> recon_variant, fixture;
  std::optional<std::size_t> graphs, min_nodes, max_nodes, dim, n_layers;
  std::optional<double> edge_prob, noise_sigma, ramp_slope;
  std::optional<int> peak_layer;

  void apply(pl::RunConfig& c) const {
    if (seed) c.seed = *seed;
    if (jobs) c.jobs = *jobs;
    if (lr) c.train.learning_rate = *lr;
    if (weight_decay) c.train.weight_decay = *weight_decay;
    if (dev_fraction) c.train.dev_fraction = *dev_fraction;
    if (test_fraction) c.test_fraction = *test_fraction;
    if (epochs) c.train.epochs = *epochs;
    if (batch_size) c.train.batch_size = *batch_size;
    if (patience) c.train.early_stop_patience = *patience;
    if (bow_dim) c.bow_dim = *bow_dim;
    if (!variants.empty()) {
      c.variants.clear();
      for (const auto& v : variants) c.variants.push_back(variant_from_string(v));
    }
    if (!layers.empty()) c.layers = layers;
    if (tau_dist) c.reconstruction.tau_dist = *tau_dist;
    if (tau_gap) c.reconstruction.tau_gap = *tau_gap;
    if (!tau_dist_grid.empty()) c.tau_dist_grid = tau_dist_grid;
    if (!tau_gap_grid.empty()) c.tau_gap_grid = tau_gap_grid;
    if (recon_variant) c.recon_depth_variant = variant_from_string(*recon_variant);
    if (fixture) c.synth.fixture = *fixture;
    if (graphs) c.synth.graphs = *graphs;
    if (min_nodes) c.synth.min_nodes = *min_nodes;
    if (max_nodes) c.synth.max_nodes = *max_nodes;
    if (dim) c.synth.dim = *dim;
    if (n_layers) c.synth.layers = *n_layers;
    if (edge_prob) c.synth.edge_prob = *edge_prob;
    if (noise_sigma) c.synth.noise_sigma = *noise_sigma;
    if (ramp_slope) c.synth.ramp_slope = *ramp_slope;
    if (peak_layer) c.synth.peak_layer = *peak_layer;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear probes for reasoning-graph structure in frozen hidden states."};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  Overrides ov;
  app.add_option("--config", config_path, "JSON config file; command-line flags override it");
  app.add_option("--out", out_dir,
                 "Workspace directory (default: $DAGPROBE_OUT_DIR, else ./dagprobe_out)");
  app.add_option("--seed", ov.seed, "Top-level seed for every random stream");
  app.add_option("--jobs", ov.jobs, "Worker threads for per-layer jobs (outputs do not depend on it)");

  auto* ingest = app.add_subcommand("ingest", "Parse proof records into graphs.jsonl and node_texts.jsonl");
  pl::IngestOptions ingest_opts;
  std::vector<std::string> ingest_inputs;
  ingest->add_option("inputs", ingest_inputs, "Normalized JSON-lines record files")->required();
  ingest->add_flag("--proofwriter", ingest_opts.proofwriter, "Inputs are raw ProofWriter release files");

  auto* synth = app.add_subcommand("synth", "Write synthetic graphs, a planted store and a bag-of-words store");
  synth->add_option("--fixture", ov.fixture, "Named fixture instead of random graphs (fiona)");
  synth->add_option("--graphs", ov.graphs, "Number of random graphs");
  synth->add_option("--min-nodes", ov.min_nodes, "Smallest graph size");
  synth->add_option("--max-nodes", ov.max_nodes, "Largest graph size");
  synth->add_option("--edge-prob", ov.edge_prob, "Forward-edge probability");
  synth->add_option("--dim", ov.dim, "Planted feature dimension");
  synth->add_option("--layers", ov.n_layers, "Number of planted layers");
  synth->add_option("--peak-layer", ov.peak_layer, "Layer with the strongest planted structure");
  synth->add_option("--noise", ov.noise_sigma, "Gaussian noise standard deviation");
  synth->add_option("--ramp-slope", ov.ramp_slope, "Structure lost per layer away from the peak");
  synth->add_option("--bow-dim", ov.bow_dim, "Bag-of-words feature dimension");

  auto* bow = app.add_subcommand("bow", "Write bag-of-words features for the workspace graphs");
  bow->add_option("--bow-dim", ov.bow_dim, "Hashed feature dimension");

  auto add_selection = [&](CLI::App* sub) {
    sub->add_option("--layers", ov.layers, "Subset of store layers (default: all)");
    sub->add_option("--variants", ov.variants, "Probe variants: ranking regression classification distance");
    sub->add_option("--test-fraction", ov.test_fraction, "Held-out graph fraction");
  };

  auto* train = app.add_subcommand("train", "Train probes for every selected layer and variant");
  pl::TrainOptions train_opts;
  std::string train_store;
  train->add_option("--store", train_store, "RDPF feature store")->required();
  train->add_flag("--shuffle-labels", train_opts.shuffle_labels, "Label-shuffled control");
  add_selection(train);
  train->add_option("--lr", ov.lr, "Learning rate");
  train->add_option("--weight-decay", ov.weight_decay, "Decoupled weight decay");
  train->add_option("--epochs", ov.epochs, "Maximum epochs");
  train->add_option("--batch-size", ov.batch_size, "Mini-batch size");
  train->add_option("--patience", ov.patience, "Early-stopping patience in epochs");
  train->add_option("--dev-fraction", ov.dev_fraction, "Dev graph fraction of the training pool");

  auto add_recon = [&](CLI::App* sub) {
    sub->add_option("--tau-dist", ov.tau_dist, "Maximum predicted distance for an edge");
    sub->add_option("--tau-gap", ov.tau_gap, "Maximum predicted depth gap for an edge");
  };

  auto* eval = app.add_subcommand("eval", "Per-graph metrics on the held-out graphs");
  pl::EvalOptions eval_opts;
  std::string eval_store, eval_outcomes;
  eval->add_option("--store", eval_store, "RDPF feature store the probes were trained on");
  eval->add_flag("--shuffle-labels", eval_opts.shuffle_labels, "Evaluate the label-shuffled control");
  eval->add_flag("--gold-as-pred", eval_opts.gold_as_pred, "Use gold targets as predictions, all graphs");
  eval->add_option("--outcomes", eval_outcomes, "Generation outcome JSON lines to join by example id");
  add_selection(eval);
  add_recon(eval);

  auto* recon = app.add_subcommand("reconstruct", "DOT export and threshold sweep per layer");
  pl::ReconstructOptions recon_opts;
  std::string recon_store;
  bool no_dot = false;
  recon->add_option("--store", recon_store, "RDPF feature store the probes were trained on");
  recon->add_flag("--shuffle-labels", recon_opts.shuffle_labels, "Use the label-shuffled probes");
  recon->add_flag("--gold-as-pred", recon_opts.gold_as_pred, "Reconstruct from gold targets");
  recon->add_flag("--no-dot", no_dot, "Skip DOT files");
  recon->add_option("--depth-variant", ov.recon_variant, "Depth probe used for reconstruction");
  recon->add_option("--tau-dist-grid", ov.tau_dist_grid, "Sweep values for tau_dist");
  recon->add_option("--tau-gap-grid", ov.tau_gap_grid, "Sweep values for tau_gap");
  recon->add_option("--layers", ov.layers, "Subset of store layers (default: all)");
  recon->add_option("--test-fraction", ov.test_fraction, "Held-out graph fraction");
  add_recon(recon);

  auto* report = app.add_subcommand("report", "Aggregate metrics into plot-ready CSV tables");
  std::vector<std::string> report_metrics;
  report->add_option("--metrics", report_metrics, "Metrics CSV files (default: <out>/metrics/*.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  pl::RunConfig config;
  pl::Workspace ws;
  if (const int rc = run_stage(stage, [&] {
        if (!config_path.empty()) config = pl::load_run_config(config_path);
        ov.apply(config);
        if (out_dir.empty()) {
          const char* env = std::getenv("DAGPROBE_OUT_DIR");
          out_dir = env && *env ? env : "dagprobe_out";
        }
        ws.root = out_dir;
      });
      rc != kOk)
    return rc;

  return run_stage(stage, [&] {
    if (*ingest) {
      for (const auto& p : ingest_inputs) ingest_opts.inputs.emplace_back(p);
      pl::run_ingest(ws, ingest_opts, std::cerr);
    } else if (*synth) {
      pl::run_synth(ws, config, std::cerr);
    } else if (*bow) {
      pl::run_bow(ws, config, std::cerr);
    } else if (*train) {
      train_opts.store = train_store;
      pl::run_train(ws, train_opts, config, std::cerr);
    } else if (*eval) {
      eval_opts.store = eval_store;
      eval_opts.outcomes = eval_outcomes;
      pl::run_eval(ws, eval_opts, config, std::cerr);
    } else if (*recon) {
      recon_opts.store = recon_store;
      recon_opts.write_dot = !no_dot;
      pl::run_reconstruct(ws, recon_opts, config, std::cerr);
    } else if (*report) {
      pl::ReportOptions opts;
      for (const auto& p : report_metrics) opts.metrics.emplace_back(p);
      pl::run_report(ws, opts, config, std::cerr);
    }
  });
}
