#include "sahnet/net/metadata.hpp"

#include <cmath>

#include "sahnet/error.hpp"

namespace sahnet::net {

std::string_view column_name(MetadataField field) noexcept {
  switch (field) {
    case MetadataField::Age: return "age";
    case MetadataField::Sex: return "sex";
    case MetadataField::Hypertension: return "hypertension";
    case MetadataField::IntraparenchymalHematoma: return "intraparenchymal_hematoma";
    case MetadataField::AcuteHydrocephalus: return "acute_hydrocephalus";
    case MetadataField::Wfns: return "wfns";
    case MetadataField::HuntHess: return "hunt_hess";
    case MetadataField::FisherGt2: return "fisher_gt2";
  }
  return "?";
}

std::vector<std::string> metadata_columns() {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kMetadataFields; ++i)
    out.emplace_back(column_name(static_cast<MetadataField>(i)));
  return out;
}

MetadataSpec::MetadataSpec() {
  standardize_[static_cast<std::size_t>(MetadataField::Age)] = true;
  standardize_[static_cast<std::size_t>(MetadataField::Wfns)] = true;
  standardize_[static_cast<std::size_t>(MetadataField::HuntHess)] = true;
  mean_.fill(0.0);
  stddev_.fill(1.0);
}

bool MetadataSpec::standardized(MetadataField f) const noexcept {
  return standardize_[static_cast<std::size_t>(f)];
}

void MetadataSpec::set_standardized(MetadataField f, bool value) {
  if (fitted_) fail(Errc::ConfigInvalid, "metadata statistics are frozen after fit");
  standardize_[static_cast<std::size_t>(f)] = value;
}

void MetadataSpec::fit(const std::vector<MetadataRow>& rows) {
  if (rows.empty()) fail(Errc::ConfigInvalid, "metadata fit needs at least one row");
  const double n = static_cast<double>(rows.size());
  for (std::size_t j = 0; j < kMetadataFields; ++j) {
    if (!standardize_[j]) {
      mean_[j] = 0.0;
      stddev_[j] = 1.0;
      continue;
    }
    double acc = 0.0;
    for (const auto& r : rows) acc += r[j];
    const double mean = acc / n;
    double sq = 0.0;
    for (const auto& r : rows) sq += (r[j] - mean) * (r[j] - mean);
    const double sd = std::sqrt(sq / n);
    mean_[j] = mean;
    stddev_[j] = sd > 0.0 ? sd : 1.0;
  }
  fitted_ = true;
}

void MetadataSpec::set_stats(const MetadataRow& mean, const MetadataRow& stddev) {
  mean_ = mean;
  stddev_ = stddev;
  fitted_ = true;
}

MetadataRow MetadataSpec::transform(const MetadataRow& row) const {
  MetadataRow out{};
  for (std::size_t j = 0; j < kMetadataFields; ++j)
    out[j] = standardize_[j] ? (row[j] - mean_[j]) / stddev_[j] : row[j];
  return out;
}

tensor::Tensor MetadataSpec::to_tensor(const std::vector<MetadataRow>& rows) const {
  if (rows.empty()) fail(Errc::ShapeMismatch, "metadata batch is empty");
  tensor::Tensor t({rows.size(), kMetadataFields});
  auto d = t.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const MetadataRow r = transform(rows[i]);
    for (std::size_t j = 0; j < kMetadataFields; ++j) d[i * kMetadataFields + j] = r[j];
  }
  return t;
}

}  // namespace sahnet::net
