#pragma once

// Probe training on frozen features: dataset assembly, graph-level splits,
// label shuffling, the mini-batch AdamW loop with dev-loss model selection,
// and the ranking-score calibration used for MAE reporting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dagprobe/error.hpp"
#include "dagprobe/feature_store.hpp"
#include "dagprobe/graph.hpp"
#include "dagprobe/matrix.hpp"
#include "dagprobe/probe.hpp"
#include "dagprobe/random.hpp"
#include "json.hpp"

namespace dagprobe {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  double dev_fraction = 0.1;
  std::size_t early_stop_patience = 20;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ValidationError("betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    if (batch_size == 0) throw ValidationError("batch_size must be positive");
    if (!(dev_fraction > 0.0 && dev_fraction < 1.0))
      throw ValidationError("dev_fraction must lie in (0, 1)");
    if (early_stop_patience == 0) throw ValidationError("early_stop_patience must be positive");
  }

  AdamParams adam() const { return {learning_rate, weight_decay, beta1, beta2, epsilon}; }
};

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["dev_fraction"] = c.dev_fraction;
  j["early_stop_patience"] = c.early_stop_patience;
  return j;
}

/// Reads any subset of TrainConfig keys over the given defaults.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.dev_fraction = j.value("dev_fraction", c.dev_fraction);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  return c;
}

/// Features and supervision targets of one graph at one layer.
struct GraphData {
  std::string graph_id;
  Matrix features;  // n x d, canonical node order
  GraphTargets targets;
};

inline std::vector<GraphData> make_dataset(const std::vector<ReasoningGraph>& graphs,
                                           const FeatureStore& store, int layer) {
  std::vector<GraphData> data;
  data.reserve(graphs.size());
  for (const auto& g : graphs)
    data.push_back({g.graph_id, store.graph_features(g, layer), compute_targets(g)});
  return data;
}

/// Ordered (deep, shallow) node pairs whose normalized depths differ by one.
inline std::vector<std::pair<std::size_t, std::size_t>> make_depth_pairs(const GraphTargets& t) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const auto& d = t.norm_depth;
  for (std::size_t u = 0; u < d.size(); ++u)
    for (std::size_t v = 0; v < d.size(); ++v)
      if (d[u] == d[v] + 1) pairs.emplace_back(u, v);
  return pairs;
}

struct Split {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> held_out;
};

/// Seeded graph-level split. With a positive fraction and two or more
/// graphs, at least one graph lands on each side; with one graph or a zero
/// fraction nothing is held out.
inline Split split_graphs(std::size_t count, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> perm(count);
  for (std::size_t i = 0; i < count; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  std::size_t held = 0;
  if (count >= 2 && fraction > 0.0) {
    held = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(count)));
    held = std::clamp<std::size_t>(held, 1, count - 1);
  }
  Split s;
  s.held_out.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(held));
  s.kept.assign(perm.begin() + static_cast<std::ptrdiff_t>(held), perm.end());
  std::sort(s.held_out.begin(), s.held_out.end());
  std::sort(s.kept.begin(), s.kept.end());
  return s;
}

/// Permutes the node -> target assignment within the graph: node v takes
/// the targets of node perm[v]. Depths and distances move together under
/// one permutation, which is returned.
inline std::vector<std::size_t> shuffle_labels(GraphTargets& t, Rng& rng) {
  const std::size_t n = t.norm_depth.size();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(std::span<std::size_t>(perm));
  GraphTargets s;
  s.raw_depth.resize(n);
  s.norm_depth.resize(n);
  s.dist = DistanceMatrix(n);
  for (std::size_t v = 0; v < n; ++v) {
    s.raw_depth[v] = t.raw_depth[perm[v]];
    s.norm_depth[v] = t.norm_depth[perm[v]];
    for (std::size_t u = 0; u < n; ++u)
      if (auto d = t.dist.at(perm[u], perm[v])) s.dist.set(u, v, *d);
  }
  t = std::move(s);
  return perm;
}

/// The graph whose targets are the shuffled ones: node texts stay put while
/// edges and the sink follow the permutation returned by shuffle_labels.
inline ReasoningGraph relabel_structure(const ReasoningGraph& g, std::span<const std::size_t> perm) {
  if (perm.size() != g.size()) throw ValidationError("relabel_structure: permutation size mismatch");
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t v = 0; v < perm.size(); ++v) inv[perm[v]] = v;
  ReasoningGraph out = g;
  for (Edge& e : out.edges) e = {inv[e.src], inv[e.dst]};
  std::sort(out.edges.begin(), out.edges.end());
  out.sink = inv[g.sink];
  return out;
}

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
};

struct TrainResult {
  Probe probe;
  std::vector<EpochStats> curve;
  double best_dev_loss = 0.0;
  std::size_t best_epoch = 0;
  std::vector<std::size_t> dev_graphs;  // indices into the training pool
};

namespace detail {

struct TrainItem {
  std::uint32_t graph;
  std::uint32_t a;
  std::uint32_t b;
  double target;
};

inline std::vector<TrainItem> make_items(std::span<const GraphData> pool,
                                         std::span<const std::size_t> graphs,
                                         ProbeVariant variant) {
  std::vector<TrainItem> items;
  for (std::size_t gi : graphs) {
    const auto g = static_cast<std::uint32_t>(gi);
    const GraphTargets& t = pool[gi].targets;
    const std::size_t n = t.norm_depth.size();
    switch (variant) {
      case ProbeVariant::ranking:
        for (auto [deep, shallow] : make_depth_pairs(t))
          items.push_back({g, static_cast<std::uint32_t>(deep), static_cast<std::uint32_t>(shallow), 0.0});
        break;
      case ProbeVariant::regression:
        for (std::size_t v = 0; v < n; ++v)
          items.push_back({g, static_cast<std::uint32_t>(v), 0, static_cast<double>(t.norm_depth[v])});
        break;
      case ProbeVariant::classification:
        for (std::size_t v = 0; v < n; ++v)
          if (t.norm_depth[v] >= 0 && static_cast<std::size_t>(t.norm_depth[v]) < kDepthClasses)
            items.push_back({g, static_cast<std::uint32_t>(v), 0, static_cast<double>(t.norm_depth[v])});
        break;
      case ProbeVariant::distance:
        for (std::size_t u = 0; u < n; ++u)
          for (std::size_t v = u + 1; v < n; ++v)
            if (auto d = t.dist.at(u, v))
              items.push_back({g, static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v),
                               static_cast<double>(*d)});
        break;
    }
  }
  return items;
}

inline double item_objective(std::span<const GraphData> pool, const TrainItem& it,
                             ProbeVariant variant, std::span<const double> w, std::size_t classes,
                             std::span<double> grad, double scale) {
  const Matrix& f = pool[it.graph].features;
  switch (variant) {
    case ProbeVariant::ranking:
      return ranking_objective(w, f.row(it.a), f.row(it.b), grad, scale);
    case ProbeVariant::regression:
      return regression_objective(w, f.row(it.a), it.target, grad, scale);
    case ProbeVariant::classification:
      return classification_objective(w, classes, f.row(it.a), static_cast<std::size_t>(it.target),
                                      grad, scale);
    case ProbeVariant::distance:
      return distance_objective(w, f.row(it.a), f.row(it.b), it.target, grad, scale);
  }
  return 0.0;
}

inline double mean_loss(std::span<const GraphData> pool, std::span<const TrainItem> items,
                        ProbeVariant variant, std::span<const double> w, std::size_t classes) {
  if (items.empty()) return 0.0;
  double s = 0.0;
  for (const auto& it : items) s += item_objective(pool, it, variant, w, classes, {}, 1.0);
  return s / static_cast<double>(items.size());
}

}  // namespace detail

/// Trains one probe on `pool`. A seeded graph-level dev split drives model
/// selection: the returned weights are those of the epoch with the lowest
/// dev loss (epoch 0 is the initialization). Single-threaded with a fixed
/// reduction order, so the same inputs always give the same bits.
inline TrainResult train_probe(std::span<const GraphData> pool, ProbeVariant variant,
                               const TrainConfig& config, int layer = 0) {
  config.validate();
  if (pool.empty()) throw TrainingError("no training graphs");
  const std::size_t d = pool.front().features.cols();
  for (const auto& g : pool)
    if (g.features.cols() != d) throw TrainingError("inconsistent feature dimensions");

  const Split split = split_graphs(pool.size(), config.dev_fraction, derive_seed(config.seed, 2));
  const auto& dev_graphs = split.held_out.empty() ? split.kept : split.held_out;
  std::vector<detail::TrainItem> train = detail::make_items(pool, split.kept, variant);
  const std::vector<detail::TrainItem> dev = detail::make_items(pool, dev_graphs, variant);
  if (train.empty())
    throw TrainingError("no valid " + to_string(variant) + " training examples after filtering");

  const std::size_t classes = variant == ProbeVariant::classification ? kDepthClasses : 1;
  TrainResult result;
  result.dev_graphs = dev_graphs;
  Probe& probe = result.probe;
  probe.variant = variant;
  probe.layer = layer;
  probe.dim = d;
  probe.weights = Matrix(classes, d);
  {
    Rng init(derive_seed(config.seed, 1));
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& x : probe.weights.data()) x = init.uniform(-bound, bound);
  }

  std::vector<double> w(probe.weights.data().begin(), probe.weights.data().end());
  std::vector<double> best = w;
  double best_dev = detail::mean_loss(pool, dev, variant, w, classes);
  result.curve.push_back({0, detail::mean_loss(pool, train, variant, w, classes), best_dev});
  result.best_epoch = 0;

  AdamW opt(w.size(), config.adam());
  Rng order(derive_seed(config.seed, 3));
  std::vector<double> grad(w.size());
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order.shuffle(std::span<detail::TrainItem>(train));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train.size(); start += config.batch_size) {
      const std::size_t stop = std::min(train.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < stop; ++i)
        epoch_loss += detail::item_objective(pool, train[i], variant, w, classes, grad, scale);
      opt.step(w, grad);
    }
    epoch_loss /= static_cast<double>(train.size());
    const double dev_loss = detail::mean_loss(pool, dev, variant, w, classes);
    if (!std::isfinite(epoch_loss) || !std::isfinite(dev_loss))
      throw TrainingError(to_string(variant) + " probe diverged at epoch " + std::to_string(epoch));
    result.curve.push_back({epoch, epoch_loss, dev_loss});
    if (dev_loss < best_dev) {
      best_dev = dev_loss;
      best = w;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  std::copy(best.begin(), best.end(), probe.weights.data().begin());
  result.best_dev_loss = best_dev;
  return result;
}

/// Least-squares affine map score -> depth. A constant score maps to the
/// mean depth.
struct Calibration {
  double scale = 1.0;
  double offset = 0.0;

  double apply(double x) const { return scale * x + offset; }
};

inline Calibration fit_calibration(std::span<const double> scores, std::span<const double> depths) {
  if (scores.size() != depths.size() || scores.empty()) return {};
  const double n = static_cast<double>(scores.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    mx += scores[i];
    my += depths[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    sxx += (scores[i] - mx) * (scores[i] - mx);
    sxy += (scores[i] - mx) * (depths[i] - my);
  }
  if (sxx <= 0.0) return {0.0, my};
  const double a = sxy / sxx;
  return {a, my - a * mx};
}

}  // namespace dagprobe
