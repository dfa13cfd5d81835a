#include "sahnet/cli/dataset.hpp"

#include <algorithm>
#include <map>

#include "sahnet/cli/csv.hpp"
#include "sahnet/error.hpp"
#include "sahnet/net/convert.hpp"
#include "sahnet/random.hpp"
#include "sahnet/volio/nifti.hpp"

namespace sahnet::cli {

tensor::Tensor to_image(const volio::Volume& v, const LoadOptions& o) {
  auto t = net::volume_to_sample(v, o.spatial_dims);
  if (v.unit() == volio::IntensityUnit::Normalized) return t;
  if (v.unit() != volio::IntensityUnit::HU)
    fail(Errc::DegenerateInput, "training volumes must be HU or Normalized");
  if (!(o.window_high_hu > o.window_low_hu)) fail(Errc::ConfigInvalid, "empty HU window");
  const double width = o.window_high_hu - o.window_low_hu;
  for (double& x : t.data()) x = std::clamp((x - o.window_low_hu) / width, 0.0, 1.0);
  return t;
}

std::filesystem::path subject_image(const std::filesystem::path& dir, const std::string& id) {
  for (const char* ext : {".nii", ".nii.gz"}) {
    auto p = dir / "images" / (id + ext);
    if (std::filesystem::exists(p)) return p;
  }
  fail(Errc::IoFailure, "no image for subject '" + id + "' under " + (dir / "images").string());
}

std::map<std::string, net::MetadataRow> read_metadata(const std::filesystem::path& csv) {
  const Table m = read_csv(csv);
  const auto mid = m.column("subject_id");
  const auto names = net::metadata_columns();
  std::vector<std::size_t> cols;
  for (const auto& n : names) cols.push_back(m.column(n));
  std::map<std::string, net::MetadataRow> out;
  for (const auto& row : m.rows) {
    net::MetadataRow r{};
    for (std::size_t f = 0; f < cols.size(); ++f) r[f] = parse_double(row[cols[f]], names[f]);
    out[row[mid]] = r;
  }
  return out;
}

train::Dataset load_dataset(const std::filesystem::path& dir, const LoadOptions& o) {
  const Table labels = read_csv(dir / "labels.csv");
  const auto id_col = labels.column("subject_id"), label_col = labels.column("label");

  std::map<std::string, net::MetadataRow> meta;
  if (std::filesystem::exists(dir / "metadata.csv")) meta = read_metadata(dir / "metadata.csv");

  train::Dataset d;
  for (const auto& row : labels.rows) {
    train::Sample s;
    s.id = row[id_col];
    const long label = parse_long(row[label_col], "label");
    if (label != 0 && label != 1) fail(Errc::UnknownClass, "label must be 0 or 1 for " + s.id);
    s.label = static_cast<int>(label);
    s.image = to_image(volio::read_nifti_file(subject_image(dir, s.id)), o);
    if (auto it = meta.find(s.id); it != meta.end()) s.metadata = it->second;
    d.samples.push_back(std::move(s));
  }
  return d;
}

train::Dataset cohort_dataset(const Cohort& cohort, const LoadOptions& o) {
  train::Dataset d;
  for (const auto& s : cohort.subjects) {
    train::Sample smp;
    smp.id = s.truth.id;
    smp.label = s.truth.label;
    smp.metadata = s.truth.metadata;
    smp.image = to_image(s.volume, o);
    d.samples.push_back(std::move(smp));
  }
  return d;
}

TrainSeeds train_seeds(std::uint64_t seed) {
  return {mix_seed(seed, 0x73706c6974ULL), mix_seed(seed, 1), mix_seed(seed, 2)};
}

}  // namespace sahnet::cli
