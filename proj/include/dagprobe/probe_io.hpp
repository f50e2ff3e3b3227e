#pragma once

// Probe files (JSON) and training curves (CSV).
//
//   {"variant", "layer", "dim", "weights": [...], "config": {...},
//    "best_dev_loss", "best_epoch", "condition", "calibration", "provenance"}
//
// Rank-1 probes store a flat weight array; the depth classifier stores one
// array per class.

#include <string>
#include <vector>

#include "dagprobe/error.hpp"
#include "dagprobe/io_util.hpp"
#include "dagprobe/probe.hpp"
#include "dagprobe/train.hpp"
#include "json.hpp"

namespace dagprobe {

struct ProbeFile {
  Probe probe;
  std::string condition;
  TrainConfig config;
  double best_dev_loss = 0.0;
  std::size_t best_epoch = 0;
  Calibration calibration;
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
};

inline nlohmann::ordered_json probe_file_to_json(const ProbeFile& f) {
  const Probe& p = f.probe;
  nlohmann::ordered_json j;
  j["variant"] = to_string(p.variant);
  j["layer"] = p.layer;
  j["dim"] = p.dim;
  if (p.variant == ProbeVariant::classification) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < p.classes(); ++c) {
      auto r = p.weights.row(c);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    j["weights"] = std::move(rows);
  } else {
    auto r = p.weights.row(0);
    j["weights"] = std::vector<double>(r.begin(), r.end());
  }
  j["config"] = to_json(f.config);
  j["best_dev_loss"] = f.best_dev_loss;
  j["best_epoch"] = f.best_epoch;
  j["condition"] = f.condition;
  j["calibration"] = {{"scale", f.calibration.scale}, {"offset", f.calibration.offset}};
  j["provenance"] = f.provenance;
  return j;
}

inline ProbeFile probe_file_from_json(const nlohmann::json& j) {
  try {
    ProbeFile f;
    Probe& p = f.probe;
    p.variant = variant_from_string(j.at("variant").get<std::string>());
    p.layer = j.at("layer").get<int>();
    p.dim = j.at("dim").get<std::size_t>();
    const auto& w = j.at("weights");
    if (p.variant == ProbeVariant::classification) {
      p.weights = Matrix(w.size(), p.dim);
      if (w.size() < 2) throw ValidationError("classifier probe needs at least 2 classes");
      for (std::size_t c = 0; c < w.size(); ++c) {
        const auto row = w.at(c).get<std::vector<double>>();
        if (row.size() != p.dim) throw ValidationError("classifier row length differs from dim");
        std::copy(row.begin(), row.end(), p.weights.row(c).begin());
      }
    } else {
      const auto row = w.get<std::vector<double>>();
      if (row.size() != p.dim) throw ValidationError("probe weight length differs from dim");
      p.weights = Matrix(1, p.dim);
      std::copy(row.begin(), row.end(), p.weights.row(0).begin());
    }
    for (double x : p.weights.data())
      if (!std::isfinite(x)) throw ValidationError("probe weights must be finite");
    if (j.contains("config")) f.config = train_config_from_json(j.at("config"));
    f.best_dev_loss = j.value("best_dev_loss", 0.0);
    f.best_epoch = j.value("best_epoch", std::size_t{0});
    f.condition = j.value("condition", std::string("contextual"));
    if (j.contains("calibration"))
      f.calibration = {j.at("calibration").at("scale").get<double>(),
                       j.at("calibration").at("offset").get<double>()};
    if (j.contains("provenance")) f.provenance = j.at("provenance");
    return f;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("probe file schema mismatch: ") + ex.what());
  }
}

inline void write_probe_file(const fs::path& path, const ProbeFile& f) {
  write_file_atomic(path, probe_file_to_json(f).dump(2) + "\n");
}

inline ProbeFile read_probe_file(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& ex) {
    throw FormatError(path.string() + ": invalid JSON: " + ex.what());
  }
  return probe_file_from_json(j);
}

inline std::string curve_csv(const std::vector<EpochStats>& curve, const std::string& preamble = {}) {
  std::string out = preamble;
  out += "epoch,train_loss,dev_loss\n";
  for (const auto& e : curve)
    out += std::to_string(e.epoch) + "," + format_real(e.train_loss) + "," + format_real(e.dev_loss) + "\n";
  return out;
}

}  // namespace dagprobe
