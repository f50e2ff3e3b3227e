// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances are fixed below.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "dagprobe/dagprobe.hpp"
#include "gradcheck.hpp"

namespace {

using namespace dagprobe;
using Clock = std::chrono::steady_clock;

constexpr double kGradTol = 1e-4;
constexpr int kGradTrials = 100;
constexpr double kPlantedDepthMin = 0.95;
constexpr double kPlantedDistMin = 0.90;
constexpr double kControlMaxAbs = 0.2;
constexpr double kPlantedMaxSeconds = 120.0;
constexpr double kOracleMaxSeconds = 10.0;
constexpr int kLocalizationSeeds = 20;
constexpr int kLocalizationMinHits = 18;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

void check(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [ok, detail] = body();
    report(name, ok, detail);
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, x);
  return buf;
}

int cli(const std::string& args) {
  const std::string cmd = std::string("'") + DAGPROBE_CLI + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Means {
  double depth = 0.0, dist = 0.0;
};

Means ranking_means(const fs::path& metrics) {
  Means m;
  std::size_t nd = 0, nx = 0;
  for (const auto& r : read_metrics_csv(metrics)) {
    if (r.variant != "ranking") continue;
    if (r.depth_spearman) m.depth += *r.depth_spearman, ++nd;
    if (r.dist_spearman) m.dist += *r.dist_spearman, ++nx;
  }
  if (nd == 0 || nx == 0) throw ValidationError("no ranking rows in " + metrics.string());
  m.depth /= static_cast<double>(nd);
  m.dist /= static_cast<double>(nx);
  return m;
}

std::vector<double> as_double(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "dagprobe_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  check("targets match exhaustive path enumeration (200 graphs)", [] {
    const auto t0 = Clock::now();
    int mismatches = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto g = random_dag(1 + seed % 10, 0.1 + 0.05 * static_cast<double>(seed % 13), seed);
      mismatches += !(compute_targets(g) == brute_force_targets(g));
    }
    const double s = std::chrono::duration<double>(Clock::now() - t0).count();
    return std::pair{mismatches == 0 && s < kOracleMaxSeconds,
                     std::to_string(mismatches) + " mismatches in " + fmt("%.2fs", s)};
  });

  check("Fiona worked example targets", [] {
    const auto g = fiona_graph();
    const auto t = compute_targets(g);
    const bool ok = t.raw_depth == std::vector<int>{5, 4, 3, 2, 1, 0} && t.dist.at(1, 5) == 4 &&
                    leaf_nodes(g) == std::vector<std::size_t>{0} && g.sink == 5;
    return std::pair{ok, "raw depths 5..0, dist(N1,N5)=" + std::to_string(t.dist.at(1, 5).value_or(-1)) + ", leaves {N0}"};
  });

  const std::pair<const char*, double (*)(Rng&)> grads[] = {{"ranking", testing::ranking_trial},
                                                            {"regression", testing::regression_trial},
                                                            {"classification", testing::classification_trial},
                                                            {"distance", testing::distance_trial}};
  for (const auto& [name, trial] : grads) {
    check(std::string("gradient check, ") + name, [&, trial = trial] {
      Rng rng(derive_seed(2024, std::hash<std::string>{}(name)));
      double worst = 0.0;
      for (int i = 0; i < kGradTrials; ++i) worst = std::max(worst, trial(rng));
      return std::pair{worst <= kGradTol, "max relative error " + fmt("%.2e", worst) + " over 100 trials"};
    });
  }

  // Planted recovery through the command-line pipeline: 100 graphs of 10 to
  // 16 nodes, edge probability 0.15, dimension 64, noise 0.05, 20% held out.
  const fs::path planted = work / "planted";
  const std::string out = "--out '" + planted.string() + "' --seed 0 ";
  const std::string store = " --store '" + (planted / "features.rdpf").string() + "'";
  const std::string bow = " --store '" + (planted / "bow.rdpf").string() + "'";
  const std::string sel = " --layers 0 --variants ranking distance";
  const auto t0 = Clock::now();
  int rc = cli(out + "synth --graphs 100 --min-nodes 10 --max-nodes 16 --edge-prob 0.15 --dim 64 --layers 1 "
                     "--peak-layer 0 --noise 0.05");
  for (const std::string& stage : {"train" + store + sel, "train --shuffle-labels" + store + sel, "train" + bow + sel,
                                   "eval" + store + sel, "eval --shuffle-labels" + store + sel, "eval" + bow + sel})
    if (rc == 0) rc = cli(out + stage);
  const double planted_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  check("planted structure recovered on held-out graphs", [&] {
    if (rc != 0) return std::pair{false, "pipeline exited with " + std::to_string(rc)};
    const Means m = ranking_means(planted / "metrics" / "contextual.csv");
    return std::pair{m.depth >= kPlantedDepthMin && m.dist >= kPlantedDistMin && planted_seconds < kPlantedMaxSeconds,
                     "depth rho " + fmt("%.3f", m.depth) + " (>= 0.95), distance rho " + fmt("%.3f", m.dist) +
                         " (>= 0.90), " + fmt("%.1fs", planted_seconds) + " (< 120s)"};
  });

  check("label-shuffled control at chance", [&] {
    if (rc != 0) return std::pair{false, "pipeline exited with " + std::to_string(rc)};
    const Means m = ranking_means(planted / "metrics" / "label_shuffled.csv");
    return std::pair{std::abs(m.depth) <= kControlMaxAbs && std::abs(m.dist) <= kControlMaxAbs,
                     "depth rho " + fmt("%.3f", m.depth) + ", distance rho " + fmt("%.3f", m.dist) + " (|rho| <= 0.2)"};
  });

  check("bag-of-words baseline carries no structure", [&] {
    if (rc != 0) return std::pair{false, "pipeline exited with " + std::to_string(rc)};
    const Means m = ranking_means(planted / "metrics" / "bow.csv");
    return std::pair{std::abs(m.depth) <= kControlMaxAbs && std::abs(m.dist) <= kControlMaxAbs,
                     "depth rho " + fmt("%.3f", m.depth) + ", distance rho " + fmt("%.3f", m.dist) + " (|rho| <= 0.2)"};
  });

  check("peak layer localized", [] {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < kLocalizationSeeds; ++seed) {
      Rng sizes(seed);
      std::vector<ReasoningGraph> graphs;
      for (int i = 0; i < 100; ++i)
        graphs.push_back(random_dag(10 + sizes.below(7), 0.15, derive_seed(seed, 500 + i)));
      PlantedParams p;
      p.seed = seed;
      p.noise_sigma = 1.0;
      p.ramp_slope = 0.25;
      p.layers = {0, 1, 2, 3, 4, 5, 6, 7};
      p.peak_layer = static_cast<int>(derive_seed(seed, 77) % 8);
      const auto store = planted_store(graphs, p);
      const Split split = split_graphs(graphs.size(), 0.2, derive_seed(seed, 4));
      int best = -1;
      double best_rho = -2.0;
      for (int layer : p.layers) {
        const auto data = make_dataset(graphs, store, layer);
        std::vector<GraphData> train, test;
        for (auto i : split.kept) train.push_back(data[i]);
        for (auto i : split.held_out) test.push_back(data[i]);
        TrainConfig c;
        c.seed = seed;
        const auto res = train_probe(train, ProbeVariant::ranking, c);
        double s = 0.0;
        int n = 0;
        for (const auto& g : test)
          if (auto r = spearman(predict_depths(res.probe, g.features), as_double(g.targets.norm_depth))) s += *r, ++n;
        if (n && s / n > best_rho) best_rho = s / n, best = layer;
      }
      hits += best == p.peak_layer;
    }
    return std::pair{hits >= kLocalizationMinHits,
                     std::to_string(hits) + "/20 seeds peak at the planted layer (>= 18)"};
  });

  check("gold inputs reconstruct with precision 1 at tau_dist=1", [] {
    int bad = 0, scored = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const auto g = random_dag(2 + seed % 15, 0.3, seed);
      const auto t = compute_targets(g);
      const auto p = reconstruct(as_double(t.norm_depth), distances_as_matrix(t.dist), {1.0, 1e6});
      ++scored;
      bad += edge_prf(p.edges, g.edges).precision != 1.0;
    }
    return std::pair{bad == 0, std::to_string(scored - bad) + "/" + std::to_string(scored) + " graphs at precision 1"};
  });

  check("reconstruction is acyclic (500 random inputs)", [] {
    Rng rng(99);
    int cyclic = 0;
    for (int i = 0; i < 500; ++i) {
      const std::size_t n = 1 + rng.below(20);
      std::vector<double> d(n);
      for (double& x : d) x = rng.uniform() < 0.3 ? static_cast<double>(rng.below(3)) : rng.normal();
      Matrix m(n, n);
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u; v < n; ++v) m(u, v) = m(v, u) = rng.uniform(0.0, 4.0);
      const auto p = reconstruct(d, m, {rng.uniform(0.0, 4.0), rng.uniform(0.0, 4.0)});
      cyclic += !topological_order(n, p.edges).has_value();
    }
    return std::pair{cyclic == 0, std::to_string(cyclic) + " cyclic outputs"};
  });

  check("Fiona reconstruction scores", [] {
    const auto [g, t] = fiona_fixture();
    const auto p = reconstruct(as_double(t.norm_depth), distances_as_matrix(t.dist), {1.0, 5.0});
    const auto s = edge_prf(p.edges, g.edges);
    const bool ok = std::abs(s.precision - 1.0) < 1e-12 && std::abs(s.recall - 5.0 / 7.0) < 1e-12 &&
                    std::abs(s.f1 - 5.0 / 6.0) < 1e-12;
    return std::pair{ok, "P=" + fmt("%.4f", s.precision) + " R=" + fmt("%.4f", s.recall) + " F1=" + fmt("%.4f", s.f1)};
  });

  check("metric unit values", [] {
    const std::vector<double> x{1, 2, 3, 4}, up{2, 4, 6, 8}, down{8, 6, 4, 2};
    const auto e = edge_prf(std::vector<Edge>{{0, 1}}, std::vector<Edge>{{0, 1}, {1, 2}});
    const bool ok = spearman(x, up) == 1.0 && spearman(x, down) == -1.0 && e.precision == 1.0 && e.recall == 0.5 &&
                    std::abs(e.f1 - 2.0 / 3.0) < 1e-12 && std::abs(softplus(0.0) - std::log(2.0)) <= 1e-12;
    return std::pair{ok, "spearman +-1, edge P/R/F1 (1, 0.5, 2/3), softplus(0)=ln 2"};
  });

  check("training is byte-identical across runs", [&] {
    const std::string synth = "synth --graphs 30 --dim 16 --layers 2 --peak-layer 1";
    for (const char* side : {"a", "b"}) {
      const std::string o = "--out '" + (work / side).string() + "' --seed 3 ";
      if (cli(o + synth) != 0 ||
          cli(o + "train --epochs 20 --store '" + (work / side / "features.rdpf").string() + "'") != 0)
        return std::pair{false, std::string("pipeline failed for run ") + side};
    }
    int files = 0, differ = 0;
    for (const auto& e : fs::recursive_directory_iterator(work / "a")) {
      if (!e.is_regular_file() || e.path().extension() == ".rdpf") continue;
      const fs::path other = work / "b" / fs::relative(e.path(), work / "a");
      ++files;
      differ += !fs::exists(other) || read_text_file(other) != read_text_file(e.path());
    }
    return std::pair{differ == 0 && files > 0,
                     std::to_string(files - differ) + "/" + std::to_string(files) + " output files identical"};
  });

  fs::remove_all(work);
  std::printf("%s: %d criterion failure(s)\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
