// End-to-end checks that drive the dagprobe executable.

#include "dagprobe/feature_store.hpp"
#include "dagprobe/graph_io.hpp"
#include "dagprobe/io_util.hpp"
#include "dagprobe/metrics_io.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <string>

namespace dagprobe {
namespace {

struct CliResult {
  int code = -1;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("dagprobe_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  /// Runs `dagprobe <args>` through the shell; `env` is prepended verbatim.
  CliResult run(const std::string& args, const std::string& env = {}) const {
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + DAGPROBE_CLI + "' " + args + " 2> '" +
                            err.string() + "' > /dev/null";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = fs::exists(err) ? read_text_file(err) : "";
    return r;
  }

  std::string out(const fs::path& sub = {}) const { return "--out '" + (dir_ / sub).string() + "' "; }

  fs::path dir_;
};

TEST_F(Cli, FionaGoldAsPredictionIsPerfect) {
  ASSERT_EQ(run(out() + "synth --fixture fiona --dim 8 --layers 2").code, 0);
  const CliResult r = run(out() + "eval --gold-as-pred --store '" + (dir_ / "features.rdpf").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto recs = read_metrics_csv(dir_ / "metrics" / "gold.csv");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].graph_id, "fiona");
  EXPECT_EQ(recs[0].depth_spearman, 1.0);
  EXPECT_TRUE(recs[0].sink_correct);
  EXPECT_EQ(recs[0].edges.precision, 1.0);
}

TEST_F(Cli, IngestReproducesTheFixtureGraph) {
  ASSERT_EQ(run(out("a") + "synth --fixture fiona --dim 4 --layers 1").code, 0);
  const CliResult r = run(out("b") + "ingest '" + (dir_ / "a" / "records.jsonl").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto a = read_graphs(dir_ / "a" / "graphs.jsonl"), b = read_graphs(dir_ / "b" / "graphs.jsonl");
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(a[0].edges, b[0].edges);
  EXPECT_EQ(a[0].sink, b[0].sink);
}

TEST_F(Cli, TrainingIsByteReproducible) {
  const std::string synth = "synth --graphs 20 --dim 12 --layers 2 --peak-layer 1";
  const std::string train = "train --epochs 15 --store ";
  for (const char* side : {"a", "b"}) {
    ASSERT_EQ(run(out(side) + synth).code, 0);
    const CliResult r = run(out(side) + "--jobs " + (side[0] == 'a' ? "1 " : "2 ") + train + "'" +
                      (dir_ / side / "features.rdpf").string() + "'");
    ASSERT_EQ(r.code, 0) << r.err;
  }
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir_ / "a" / "probes")) {
    if (!e.is_regular_file()) continue;
    const fs::path other = dir_ / "b" / fs::relative(e.path(), dir_ / "a");
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(read_text_file(e.path()), read_text_file(other)) << e.path();
    ++compared;
  }
  EXPECT_EQ(compared, 8u);
  EXPECT_EQ(read_text_file(dir_ / "a" / "split.json"), read_text_file(dir_ / "b" / "split.json"));
}

TEST_F(Cli, ReportOnEmptyMetricsFailsAndNamesTheStage) {
  write_file_atomic(dir_ / "empty.csv", "");
  const CliResult r = run(out() + "report --metrics '" + (dir_ / "empty.csv").string() + "'");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("dagprobe report:"), std::string::npos) << r.err;
}

TEST_F(Cli, DistinctExitCodesPerFailureKind) {
  const CliResult missing = run(out() + "train --store '" + (dir_ / "nope.rdpf").string() + "'");
  EXPECT_EQ(missing.code, 2) << missing.err;
  EXPECT_NE(missing.err.find("dagprobe train: missing file"), std::string::npos) << missing.err;

  write_file_atomic(dir_ / "bad.csv", "graph_id,layer\nx,0\n");
  const CliResult schema = run(out() + "report --metrics '" + (dir_ / "bad.csv").string() + "'");
  EXPECT_EQ(schema.code, 3) << schema.err;

  ASSERT_EQ(run(out() + "synth --fixture fiona --dim 4 --layers 1").code, 0);
  std::string bytes = read_text_file(dir_ / "features.rdpf");
  bytes[4] = 9;  // version field
  write_file_atomic(dir_ / "v9.rdpf", bytes);
  const CliResult version = run(out() + "train --store '" + (dir_ / "v9.rdpf").string() + "'");
  EXPECT_EQ(version.code, 4) << version.err;
  EXPECT_NE(version.err.find("version"), std::string::npos);

  const CliResult invalid = run(out() + "synth --edge-prob 1.5");
  EXPECT_EQ(invalid.code, 5) << invalid.err;

  EXPECT_NE(run("frobnicate").code, 0);
}

TEST_F(Cli, FlagsOverrideTheConfigFile) {
  write_file_atomic(dir_ / "config.json", R"({"seed": 5, "synth": {"graphs": 7, "dim": 4, "layers": 1}})");
  ASSERT_EQ(run(out("cfg") + "--config '" + (dir_ / "config.json").string() + "' synth").code, 0);
  EXPECT_EQ(read_graphs(dir_ / "cfg" / "graphs.jsonl").size(), 7u);
  const CliResult r = run(out("flag") + "--config '" + (dir_ / "config.json").string() + "' --seed 11 synth --graphs 3");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_graphs(dir_ / "flag" / "graphs.jsonl").size(), 3u);
  const auto store = read_store(dir_ / "flag" / "features.rdpf");
  EXPECT_EQ(store.dim(), 4u);
  EXPECT_EQ(store.header().meta.at("provenance").at("seed"), 11);
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
  const fs::path target = dir_ / "from_env";
  const CliResult r = run("synth --fixture fiona --dim 4 --layers 1", "DAGPROBE_OUT_DIR='" + target.string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(target / "graphs.jsonl"));
  // --out wins over the environment.
  ASSERT_EQ(run(out("flag") + "synth --fixture fiona --dim 4 --layers 1", "DAGPROBE_OUT_DIR='" + target.string() + "'").code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "flag" / "graphs.jsonl"));
}

TEST_F(Cli, FullPipelineProducesReportTables) {
  const std::string store = "'" + (dir_ / "features.rdpf").string() + "'";
  ASSERT_EQ(run(out() + "synth --graphs 15 --dim 12 --layers 2 --peak-layer 0").code, 0);
  for (const std::string args : {"train --epochs 10 --store " + store, "eval --store " + store,
                                 "reconstruct --store " + store, std::string("report")}) {
    const CliResult r = run(out() + args);
    ASSERT_EQ(r.code, 0) << args << "\n" << r.err;
  }
  for (const char* f : {"layerwise.csv", "baselines.csv", "mae_heatmap.csv", "outcomes.csv", "f1_surface.csv"})
    EXPECT_TRUE(fs::exists(dir_ / "report" / f)) << f;
  EXPECT_TRUE(fs::exists(dir_ / "sweeps" / "contextual_L0.csv"));
  EXPECT_TRUE(read_text_file(dir_ / "metrics" / "contextual.csv").starts_with("# dagprobe eval config_hash="));
}

}  // namespace
}  // namespace dagprobe
