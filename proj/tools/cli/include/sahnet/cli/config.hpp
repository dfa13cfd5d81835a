#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "sahnet/eval/metrics.hpp"
#include "sahnet/net/densenet.hpp"
#include "sahnet/prep/pipeline.hpp"
#include "sahnet/train/fit.hpp"

namespace sahnet::cli {

/// Synthetic stand-in for the patient cohort: head phantoms with hyperdense
/// spherical lesions; a subject dies when its lesion burden (voxels) reaches
/// the threshold, then labels flip with probability flip_rate.
struct SynthConfig {
  std::size_t n_subjects = 80;
  std::array<std::size_t, 3> volume_shape{32, 32, 32};  // x, y, z
  double spacing_mm = 4.0;
  double noise_hu = 3.0;
  double radius_min = 2.0;  // voxels
  double radius_max = 6.5;
  double intensity_delta_hu = 40.0;
  std::size_t lesion_count_min = 1;
  std::size_t lesion_count_max = 1;
  double burden_threshold = 382.0;  // voxels
  /// Burdens within this fraction of the threshold are redrawn so the rule
  /// has a clear gap.
  double burden_margin = 0.15;
  double flip_rate = 0.0;
  // Severity s = (burden - threshold) / threshold drives the metadata.
  double age_coef = 10.0;          // years per unit severity
  double wfns_coef = 2.0;          // grades per unit severity
  double hypertension_coef = 2.0;  // log-odds per unit severity

  /// Throws Error(ConfigInvalid).
  void validate() const;
};

struct PrepSection {
  prep::PipelineOptions pipeline;
  std::array<std::size_t, 3> template_shape{64, 76, 64};
  double template_spacing_mm = 3.0;
};

struct ModelSection {
  net::DenseNetConfig net = net::DenseNetConfig::tiny();
  bool fuse_metadata = false;
};

struct TrainSection {
  train::TrainConfig fit;
  double val_fraction = 0.2;
  /// HU window mapped to [0, 1] when loading HU volumes.
  double window_low_hu = 0.0;
  double window_high_hu = 100.0;
};

struct EvalSection {
  double threshold = 0.5;  // predict dead when score_dead >= threshold
  eval::UndefinedPolicy macro_policy = eval::UndefinedPolicy::ZeroFill;
};

struct StatsSection {
  /// Normal quantile of the Wald interval. The published tables round as
  /// if 1.96 was used.
  double ci_z = 1.96;
};

struct ExplainSection {
  std::string layer;  // empty: last convolution
  int target_class = 1;
  double top_threshold = 0.9;
};

struct PathsSection {
  std::filesystem::path data;         // dataset directory
  std::filesystem::path out;          // output directory
  std::filesystem::path checkpoint;   // checkpoint stem or file
  std::filesystem::path predictions;  // predictions CSV for eval
  std::filesystem::path cohort;       // cohort CSV for stats
  std::filesystem::path template_volume;  // prep registration target, optional
};

struct RunConfig {
  PrepSection prep;
  ModelSection model;
  TrainSection train;
  EvalSection eval;
  ExplainSection explain;
  StatsSection stats;
  PathsSection paths;
  SynthConfig synth;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// Throws Error(ConfigInvalid) for unknown keys or ill-typed values.
/// Cross-field checks of every section. Throws Error(ConfigInvalid).
void validate(const RunConfig& c);
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
/// Every field, defaults included.
nlohmann::json to_json(const RunConfig& c);
/// Writes resolved_config.json into `dir`.
void write_resolved(const RunConfig& c, const std::filesystem::path& dir);

/// Pretty JSON with a trailing newline; numbers printed by nlohmann's
/// shortest round-trip formatting.
std::string dump(const nlohmann::json& j);

}  // namespace sahnet::cli
