#include "sahnet/cli/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sahnet/cli/csv.hpp"
#include "sahnet/error.hpp"
#include "sahnet/prep/phantom.hpp"
#include "sahnet/random.hpp"
#include "sahnet/volio/nifti.hpp"

namespace sahnet::cli {

using nlohmann::json;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

std::string subject_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sub-%03zu", i + 1);
  return buf;
}

// Centre inside the brain ellipsoid, shrunk so the whole sphere stays in
// brain tissue.
std::array<double, 3> draw_centre(Rng& rng, const volio::Shape3& s, double radius) {
  const double n[3] = {double(s.nx), double(s.ny), double(s.nz)};
  const double frac[3] = {0.42, 0.46, 0.42};
  const double shell = 2.0;
  double semi[3], c[3];
  for (int a = 0; a < 3; ++a) {
    semi[a] = std::max(0.0, frac[a] * n[a] - shell - radius - 1.0);
    c[a] = (n[a] - 1.0) / 2.0;
  }
  const bool flat = s.nz == 1;
  for (;;) {
    double u[3];
    for (double& v : u) v = uniform(rng, -1.0, 1.0);
    if (flat) u[2] = 0.0;
    if (u[0] * u[0] + u[1] * u[1] + u[2] * u[2] > 1.0) continue;
    return {c[0] + u[0] * semi[0], c[1] + u[1] * semi[1], flat ? 0.0 : c[2] + u[2] * semi[2]};
  }
}

std::vector<std::uint8_t> lesion_mask(const volio::Shape3& s, const std::vector<Lesion>& lesions) {
  std::vector<std::uint8_t> mask(s.size(), 0);
  std::size_t idx = 0;
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x, ++idx)
        for (const auto& l : lesions) {
          const double dx = double(x) - l.centre[0], dy = double(y) - l.centre[1], dz = double(z) - l.centre[2];
          if (dx * dx + dy * dy + dz * dz <= l.radius * l.radius) {
            mask[idx] = 1;
            break;
          }
        }
  return mask;
}

net::MetadataRow draw_metadata(Rng& rng, const SynthConfig& c, double severity) {
  using F = net::MetadataField;
  net::MetadataRow m{};
  auto set = [&](F f, double v) { m[static_cast<std::size_t>(f)] = v; };
  const double age = std::clamp(55.0 + 12.0 * normal(rng) + c.age_coef * severity, 18.0, 90.0);
  set(F::Age, std::round(age));
  set(F::Sex, bernoulli(rng, 0.35) ? 1.0 : 0.0);
  set(F::Hypertension, bernoulli(rng, sigmoid(-0.5 + c.hypertension_coef * severity)) ? 1.0 : 0.0);
  set(F::IntraparenchymalHematoma, bernoulli(rng, sigmoid(-1.0 + 1.5 * severity)) ? 1.0 : 0.0);
  set(F::AcuteHydrocephalus, bernoulli(rng, sigmoid(-1.0 + 1.5 * severity)) ? 1.0 : 0.0);
  const double wfns = std::clamp(std::round(2.5 + c.wfns_coef * severity + normal(rng)), 1.0, 5.0);
  set(F::Wfns, wfns);
  set(F::HuntHess, std::clamp(wfns + double(uniform_index(rng, 3)) - 1.0, 1.0, 5.0));
  set(F::FisherGt2, bernoulli(rng, sigmoid(0.5 + 2.0 * severity)) ? 1.0 : 0.0);
  return m;
}

}  // namespace

bool SubjectTruth::in_bbox(std::size_t x, std::size_t y, std::size_t z) const {
  return x >= bbox_min[0] && x <= bbox_max[0] && y >= bbox_min[1] && y <= bbox_max[1] && z >= bbox_min[2] &&
         z <= bbox_max[2];
}

std::vector<int> Cohort::labels() const {
  std::vector<int> out;
  for (const auto& s : subjects) out.push_back(s.truth.label);
  return out;
}

Cohort generate_cohort(const SynthConfig& c, std::uint64_t seed) {
  c.validate();
  const volio::Shape3 shape{c.volume_shape[0], c.volume_shape[1], c.volume_shape[2]};
  Cohort cohort;
  for (std::size_t i = 0; i < c.n_subjects; ++i) {
    Rng rng(mix_seed(seed, i, 0x73796e7468ULL));
    SubjectTruth t;
    t.id = subject_id(i);

    std::vector<std::uint8_t> mask;
    for (;;) {
      t.lesions.clear();
      const std::size_t count =
          c.lesion_count_min + uniform_index(rng, c.lesion_count_max - c.lesion_count_min + 1);
      for (std::size_t k = 0; k < count; ++k) {
        Lesion l;
        l.radius = uniform(rng, c.radius_min, c.radius_max);
        l.centre = draw_centre(rng, shape, l.radius);
        const auto own = lesion_mask(shape, {l});
        l.voxels = static_cast<std::size_t>(std::count(own.begin(), own.end(), 1));
        t.lesions.push_back(l);
      }
      mask = lesion_mask(shape, t.lesions);
      t.burden = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
      const double gap = std::abs(double(t.burden) - c.burden_threshold);
      if (t.burden > 0 && gap >= c.burden_margin * c.burden_threshold) break;
    }

    t.rule_label = double(t.burden) >= c.burden_threshold ? 1 : 0;
    t.label = bernoulli(rng, c.flip_rate) ? 1 - t.rule_label : t.rule_label;
    const double severity = (double(t.burden) - c.burden_threshold) / c.burden_threshold;
    t.metadata = draw_metadata(rng, c, severity);

    t.bbox_min = {shape.nx, shape.ny, shape.nz};
    t.bbox_max = {0, 0, 0};
    std::size_t idx = 0;
    for (std::size_t z = 0; z < shape.nz; ++z)
      for (std::size_t y = 0; y < shape.ny; ++y)
        for (std::size_t x = 0; x < shape.nx; ++x, ++idx) {
          if (!mask[idx]) continue;
          const std::size_t p[3] = {x, y, z};
          for (int a = 0; a < 3; ++a) {
            t.bbox_min[a] = std::min(t.bbox_min[a], p[a]);
            t.bbox_max[a] = std::max(t.bbox_max[a], p[a]);
          }
        }

    prep::HeadPhantomParams hp;
    hp.shape = shape;
    hp.spacing_mm = c.spacing_mm;
    hp.noise_hu = c.noise_hu;
    hp.seed = mix_seed(seed, i, 0x6e6f697365ULL);
    const auto base = prep::head_phantom(hp);
    std::vector<float> data(base.data().begin(), base.data().end());
    for (std::size_t v = 0; v < data.size(); ++v)
      if (mask[v]) data[v] += static_cast<float>(c.intensity_delta_hu);
    cohort.subjects.push_back({std::move(t), base.with_data(std::move(data))});
  }
  return cohort;
}

json ground_truth_json(const Cohort& cohort) {
  json subjects = json::array();
  for (const auto& s : cohort.subjects) {
    const auto& t = s.truth;
    json lesions = json::array();
    for (const auto& l : t.lesions)
      lesions.push_back({{"centre", l.centre}, {"radius", l.radius}, {"voxels", l.voxels}});
    subjects.push_back({{"id", t.id},
                        {"label", t.label},
                        {"rule_label", t.rule_label},
                        {"burden_voxels", t.burden},
                        {"lesions", lesions},
                        {"bbox", {{"min", t.bbox_min}, {"max", t.bbox_max}}}});
  }
  return {{"subjects", subjects}};
}

void write_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  Table labels{{"subject_id", "label"}, {}};
  Table meta;
  meta.header.push_back("subject_id");
  for (const auto& name : net::metadata_columns()) meta.header.push_back(name);
  for (const auto& s : cohort.subjects) {
    volio::write_nifti_file(dir / "images" / (s.truth.id + ".nii"), s.volume);
    labels.rows.push_back({s.truth.id, std::to_string(s.truth.label)});
    std::vector<std::string> row{s.truth.id};
    for (double v : s.truth.metadata) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", v);
      row.push_back(buf);
    }
    meta.rows.push_back(std::move(row));
  }
  write_text(dir / "labels.csv", to_csv(labels));
  write_text(dir / "metadata.csv", to_csv(meta));
  write_text(dir / "ground_truth.json", dump(ground_truth_json(cohort)));
}

std::vector<SubjectTruth> read_ground_truth(const std::filesystem::path& path) {
  const auto bytes = volio::read_file(path);
  std::vector<SubjectTruth> out;
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    for (const auto& s : j.at("subjects")) {
      SubjectTruth t;
      t.id = s.at("id").get<std::string>();
      t.label = s.at("label").get<int>();
      t.rule_label = s.at("rule_label").get<int>();
      t.burden = s.at("burden_voxels").get<std::size_t>();
      for (const auto& l : s.at("lesions"))
        t.lesions.push_back({l.at("centre").get<std::array<double, 3>>(), l.at("radius").get<double>(),
                             l.at("voxels").get<std::size_t>()});
      t.bbox_min = s.at("bbox").at("min").get<std::array<std::size_t, 3>>();
      t.bbox_max = s.at("bbox").at("max").get<std::array<std::size_t, 3>>();
      out.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    fail(Errc::IoFailure, "ground truth " + path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace sahnet::cli
