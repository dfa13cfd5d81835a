#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "sahnet/cli/synth.hpp"
#include "sahnet/train/fit.hpp"
#include "sahnet/volio/volume.hpp"

namespace sahnet::cli {

struct LoadOptions {
  double window_low_hu = 0.0;
  double window_high_hu = 100.0;
  std::size_t spatial_dims = 3;
};

/// HU volumes are windowed to [0, 1]; Normalized volumes pass through.
/// Anything else raises Error(DegenerateInput).
tensor::Tensor to_image(const volio::Volume& v, const LoadOptions& options);

/// Reads labels.csv (subject_id, label), optional metadata.csv and
/// images/<id>.nii[.gz]. Rows keep the labels.csv order.
train::Dataset load_dataset(const std::filesystem::path& dir, const LoadOptions& options);

/// metadata.csv rows keyed by subject_id.
std::map<std::string, net::MetadataRow> read_metadata(const std::filesystem::path& csv);

/// Path of a subject volume inside a dataset directory.
std::filesystem::path subject_image(const std::filesystem::path& dir, const std::string& id);

/// In-memory equivalent of write_cohort followed by load_dataset.
train::Dataset cohort_dataset(const Cohort& cohort, const LoadOptions& options);

/// Streams the train command derives from its --seed.
struct TrainSeeds {
  std::uint64_t split, model, fuse;
};
TrainSeeds train_seeds(std::uint64_t seed);

}  // namespace sahnet::cli
