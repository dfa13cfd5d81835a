#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sahnet/tensor/tensor.hpp"

namespace sahnet::net {

/// Admission variables, in the order they enter the fused head.
enum class MetadataField {
  Age,
  Sex,
  Hypertension,
  IntraparenchymalHematoma,
  AcuteHydrocephalus,
  Wfns,
  HuntHess,
  FisherGt2,
};

inline constexpr std::size_t kMetadataFields = 8;
using MetadataRow = std::array<double, kMetadataFields>;

std::string_view column_name(MetadataField field) noexcept;
/// Column names in field order (the metadata CSV header after subject_id).
std::vector<std::string> metadata_columns();

/// Which fields are standardized and the statistics used to do it. Binary
/// fields pass through unchanged.
class MetadataSpec {
 public:
  MetadataSpec();

  std::size_t width() const noexcept { return kMetadataFields; }
  bool standardized(MetadataField f) const noexcept;
  void set_standardized(MetadataField f, bool value);

  /// Fits means and population standard deviations on training rows. A
  /// column with zero spread keeps stddev 1.
  void fit(const std::vector<MetadataRow>& rows);
  bool fitted() const noexcept { return fitted_; }

  MetadataRow transform(const MetadataRow& row) const;
  /// [N, 8] tensor of transformed rows.
  tensor::Tensor to_tensor(const std::vector<MetadataRow>& rows) const;

  double mean(MetadataField f) const { return mean_[static_cast<std::size_t>(f)]; }
  double stddev(MetadataField f) const { return stddev_[static_cast<std::size_t>(f)]; }
  /// Restores frozen statistics (checkpoint load).
  void set_stats(const MetadataRow& mean, const MetadataRow& stddev);

 private:
  std::array<bool, kMetadataFields> standardize_{};
  MetadataRow mean_{};
  MetadataRow stddev_{};
  bool fitted_ = false;
};

}  // namespace sahnet::net
