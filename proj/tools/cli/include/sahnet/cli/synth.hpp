#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sahnet/cli/config.hpp"
#include "sahnet/net/metadata.hpp"
#include "sahnet/volio/volume.hpp"

namespace sahnet::cli {

struct Lesion {
  std::array<double, 3> centre{};  // voxel coordinates x, y, z
  double radius = 0.0;             // voxels
  std::size_t voxels = 0;          // voxels of this sphere alone
};

struct SubjectTruth {
  std::string id;
  int label = 0;       // after label noise
  int rule_label = 0;  // burden >= threshold
  std::size_t burden = 0;  // voxels covered by any lesion
  std::vector<Lesion> lesions;
  std::array<std::size_t, 3> bbox_min{};  // inclusive, x y z
  std::array<std::size_t, 3> bbox_max{};
  net::MetadataRow metadata{};

  bool in_bbox(std::size_t x, std::size_t y, std::size_t z) const;
};

struct SynthSubject {
  SubjectTruth truth;
  volio::Volume volume;  // HU
};

struct Cohort {
  std::vector<SynthSubject> subjects;
  std::vector<int> labels() const;
};

/// Deterministic in (config, seed). Throws Error(ConfigInvalid).
Cohort generate_cohort(const SynthConfig& config, std::uint64_t seed);

/// Writes images/<id>.nii, labels.csv, metadata.csv and ground_truth.json.
void write_cohort(const Cohort& cohort, const std::filesystem::path& dir);

nlohmann::json ground_truth_json(const Cohort& cohort);
/// Reads ground_truth.json back (ids, labels, burden, lesions, boxes).
std::vector<SubjectTruth> read_ground_truth(const std::filesystem::path& path);

}  // namespace sahnet::cli
