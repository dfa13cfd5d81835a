#include "sahnet/cli/config.hpp"

#include <set>

#include "sahnet/cli/csv.hpp"
#include "sahnet/error.hpp"
#include "sahnet/volio/nifti.hpp"

namespace sahnet::cli {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  fail(Errc::ConfigInvalid, "config " + where + ": " + what);
}

// Reads keys out of one JSON object and rejects whatever is left over.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) bad(where_, "expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      bad(where_ + "." + key, e.what());
    }
  }

  static_assert(std::is_same_v<std::size_t, std::uint64_t>, "size_t and uint64_t must coincide");
  void get(const char* key, std::uint64_t& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
      bad(where_ + "." + key, "expected a non-negative integer");
    out = it->get<std::uint64_t>();
  }

  void get(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  template <class Fn>
  void sub(const char* key, Fn&& fn) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    Section s(*it, where_ + "." + key);
    fn(s);
    s.finish();
  }

  const json* raw(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) bad(where_, "unknown key '" + it.key() + "'");
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<prep::IntensityMode> kIntensityModes[] = {
    {prep::IntensityMode::ShiftClamp, "shift_clamp"}, {prep::IntensityMode::WindowStretch, "window_stretch"}};
constexpr EnumName<prep::TransformKind> kTransformKinds[] = {
    {prep::TransformKind::Identity, "identity"},
    {prep::TransformKind::Rigid, "rigid"},
    {prep::TransformKind::Affine, "affine"}};
constexpr EnumName<train::ClassWeightMode> kWeightModes[] = {{train::ClassWeightMode::Balanced, "balanced"},
                                                             {train::ClassWeightMode::None, "none"},
                                                             {train::ClassWeightMode::Explicit, "explicit"}};
constexpr EnumName<eval::UndefinedPolicy> kPolicies[] = {{eval::UndefinedPolicy::Propagate, "propagate"},
                                                         {eval::UndefinedPolicy::ZeroFill, "zero_fill"}};

template <class E, std::size_t N>
const char* enum_name(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

template <class E, std::size_t N>
void get_enum(Section& s, const char* key, const EnumName<E> (&table)[N], E& out) {
  std::string name = enum_name(table, out);
  s.get(key, name);
  for (const auto& e : table)
    if (name == e.name) {
      out = e.value;
      return;
    }
  bad(s.where() + "." + key, "unknown value '" + name + "'");
}

void read_prep(Section& s, PrepSection& p) {
  auto& po = p.pipeline;
  s.sub("intensity", [&](Section& t) {
    get_enum(t, "mode", kIntensityModes, po.intensity.mode);
    t.get("hu_min", po.intensity.hu_min);
    t.get("hu_max", po.intensity.hu_max);
    t.get("window_low", po.intensity.window_low);
    t.get("window_high", po.intensity.window_high);
    t.get("gain", po.intensity.gain);
  });
  s.sub("brain", [&](Section& t) {
    t.get("tissue_low_hu", po.brain.tissue_low_hu);
    t.get("tissue_high_hu", po.brain.tissue_high_hu);
    t.get("closing_radius_vox", po.brain.closing_radius_vox);
  });
  s.sub("registration", [&](Section& t) {
    t.get("levels", po.registration.levels);
    t.get("iters_per_level", po.registration.iters_per_level);
    t.get("step_mm", po.registration.step_mm);
    t.get("min_step_mm", po.registration.min_step_mm);
    get_enum(t, "kind", kTransformKinds, po.registration.kind);
  });
  s.get("percentile_low", po.percentile_low);
  s.get("percentile_high", po.percentile_high);
  s.get("template_shape", p.template_shape);
  s.get("template_spacing_mm", p.template_spacing_mm);
}

json write_prep(const PrepSection& p) {
  const auto& po = p.pipeline;
  return {{"intensity",
           {{"mode", enum_name(kIntensityModes, po.intensity.mode)},
            {"hu_min", po.intensity.hu_min},
            {"hu_max", po.intensity.hu_max},
            {"window_low", po.intensity.window_low},
            {"window_high", po.intensity.window_high},
            {"gain", po.intensity.gain}}},
          {"brain",
           {{"tissue_low_hu", po.brain.tissue_low_hu},
            {"tissue_high_hu", po.brain.tissue_high_hu},
            {"closing_radius_vox", po.brain.closing_radius_vox}}},
          {"registration",
           {{"levels", po.registration.levels},
            {"iters_per_level", po.registration.iters_per_level},
            {"step_mm", po.registration.step_mm},
            {"min_step_mm", po.registration.min_step_mm},
            {"kind", enum_name(kTransformKinds, po.registration.kind)}}},
          {"percentile_low", po.percentile_low},
          {"percentile_high", po.percentile_high},
          {"template_shape", p.template_shape},
          {"template_spacing_mm", p.template_spacing_mm}};
}

void read_model(Section& s, ModelSection& m) {
  // A preset replaces the whole network block before the other keys apply.
  if (const json* preset = s.raw("preset")) {
    if (!preset->is_string()) bad(s.where() + ".preset", "expected a string");
    const auto name = preset->get<std::string>();
    if (name == "tiny")
      m.net = net::DenseNetConfig::tiny();
    else if (name == "densenet121")
      m.net = net::DenseNetConfig::densenet121();
    else
      bad(s.where() + ".preset", "unknown preset '" + name + "'");
  }
  s.get("spatial_dims", m.net.spatial_dims);
  s.get("block_layers", m.net.block_layers);
  s.get("growth_rate", m.net.growth_rate);
  s.get("init_channels", m.net.init_channels);
  s.get("bn_size", m.net.bn_size);
  s.get("compression", m.net.compression);
  s.get("num_classes", m.net.num_classes);
  s.get("in_channels", m.net.in_channels);
  s.get("input_shape", m.net.input_shape);
  s.get("dropout_rate", m.net.dropout_rate);
  s.get("fuse_metadata", m.fuse_metadata);
}

json write_model(const ModelSection& m) {
  return {{"spatial_dims", m.net.spatial_dims},   {"block_layers", m.net.block_layers},
          {"growth_rate", m.net.growth_rate},     {"init_channels", m.net.init_channels},
          {"bn_size", m.net.bn_size},             {"compression", m.net.compression},
          {"num_classes", m.net.num_classes},     {"in_channels", m.net.in_channels},
          {"input_shape", m.net.input_shape},     {"dropout_rate", m.net.dropout_rate},
          {"fuse_metadata", m.fuse_metadata}};
}

void read_train(Section& s, TrainSection& t) {
  auto& f = t.fit;
  s.get("epochs", f.epochs);
  s.get("batch_size", f.batch_size);
  s.sub("adam", [&](Section& a) {
    a.get("beta1", f.adam.beta1);
    a.get("beta2", f.adam.beta2);
    a.get("eps", f.adam.eps);
  });
  s.get("lr_phase1", f.lr_phase1);
  s.get("lr_phase2", f.lr_phase2);
  s.get("freeze_epochs", f.freeze_epochs);
  s.get("gamma", f.gamma);
  get_enum(s, "class_weight_mode", kWeightModes, f.class_weight_mode);
  s.get("class_weights", f.class_weights);
  s.sub("augmentation", [&](Section& a) {
    auto& g = f.augmentation;
    a.get("mirror_axes", g.mirror_axes);
    a.get("mirror_probability", g.mirror_probability);
    a.get("rotation_deg", g.rotation_deg);
    a.get("scale_min", g.scale_min);
    a.get("scale_max", g.scale_max);
    a.sub("elastic", [&](Section& e) {
      e.get("enabled", g.elastic.enabled);
      e.get("alpha", g.elastic.alpha);
      e.get("sigma", g.elastic.sigma);
    });
  });
  s.sub("early_stop", [&](Section& e) {
    e.get("monitor", f.early_stop.monitor);
    e.get("patience", f.early_stop.patience);
    e.get("min_delta", f.early_stop.min_delta);
  });
  s.sub("plateau", [&](Section& p) {
    p.get("monitor", f.plateau.monitor);
    p.get("factor", f.plateau.factor);
    p.get("patience", f.plateau.patience);
    p.get("min_lr", f.plateau.min_lr);
    p.get("min_delta", f.plateau.min_delta);
  });
  s.sub("checkpoint", [&](Section& c) { c.get("monitor", f.checkpoint.monitor); });
  s.get("val_fraction", t.val_fraction);
  s.get("window_low_hu", t.window_low_hu);
  s.get("window_high_hu", t.window_high_hu);
}

json write_train(const TrainSection& t) {
  const auto& f = t.fit;
  const auto& g = f.augmentation;
  return {{"epochs", f.epochs},
          {"batch_size", f.batch_size},
          {"adam", {{"beta1", f.adam.beta1}, {"beta2", f.adam.beta2}, {"eps", f.adam.eps}}},
          {"lr_phase1", f.lr_phase1},
          {"lr_phase2", f.lr_phase2},
          {"freeze_epochs", f.freeze_epochs},
          {"gamma", f.gamma},
          {"class_weight_mode", enum_name(kWeightModes, f.class_weight_mode)},
          {"class_weights", f.class_weights},
          {"augmentation",
           {{"mirror_axes", g.mirror_axes},
            {"mirror_probability", g.mirror_probability},
            {"rotation_deg", g.rotation_deg},
            {"scale_min", g.scale_min},
            {"scale_max", g.scale_max},
            {"elastic", {{"enabled", g.elastic.enabled}, {"alpha", g.elastic.alpha}, {"sigma", g.elastic.sigma}}}}},
          {"early_stop",
           {{"monitor", f.early_stop.monitor},
            {"patience", f.early_stop.patience},
            {"min_delta", f.early_stop.min_delta}}},
          {"plateau",
           {{"monitor", f.plateau.monitor},
            {"factor", f.plateau.factor},
            {"patience", f.plateau.patience},
            {"min_lr", f.plateau.min_lr},
            {"min_delta", f.plateau.min_delta}}},
          {"checkpoint", {{"monitor", f.checkpoint.monitor}}},
          {"val_fraction", t.val_fraction},
          {"window_low_hu", t.window_low_hu},
          {"window_high_hu", t.window_high_hu}};
}

void read_synth(Section& s, SynthConfig& c) {
  s.get("n_subjects", c.n_subjects);
  s.get("volume_shape", c.volume_shape);
  s.get("spacing_mm", c.spacing_mm);
  s.get("noise_hu", c.noise_hu);
  s.sub("lesion", [&](Section& l) {
    l.get("radius_min", c.radius_min);
    l.get("radius_max", c.radius_max);
    l.get("intensity_delta_hu", c.intensity_delta_hu);
    l.get("count_min", c.lesion_count_min);
    l.get("count_max", c.lesion_count_max);
  });
  s.sub("label_rule", [&](Section& l) {
    l.get("burden_threshold", c.burden_threshold);
    l.get("burden_margin", c.burden_margin);
    l.get("flip_rate", c.flip_rate);
  });
  s.sub("metadata_model", [&](Section& m) {
    m.get("age_coef", c.age_coef);
    m.get("wfns_coef", c.wfns_coef);
    m.get("hypertension_coef", c.hypertension_coef);
  });
}

json write_synth(const SynthConfig& c) {
  return {{"n_subjects", c.n_subjects},
          {"volume_shape", c.volume_shape},
          {"spacing_mm", c.spacing_mm},
          {"noise_hu", c.noise_hu},
          {"lesion",
           {{"radius_min", c.radius_min},
            {"radius_max", c.radius_max},
            {"intensity_delta_hu", c.intensity_delta_hu},
            {"count_min", c.lesion_count_min},
            {"count_max", c.lesion_count_max}}},
          {"label_rule",
           {{"burden_threshold", c.burden_threshold},
            {"burden_margin", c.burden_margin},
            {"flip_rate", c.flip_rate}}},
          {"metadata_model",
           {{"age_coef", c.age_coef}, {"wfns_coef", c.wfns_coef}, {"hypertension_coef", c.hypertension_coef}}}};
}

}  // namespace

void SynthConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(Errc::ConfigInvalid, "synth: " + msg);
  };
  check(n_subjects >= 1, "n_subjects must be >= 1");
  check(volume_shape[0] >= 8 && volume_shape[1] >= 8 && volume_shape[2] >= 1, "volume_shape too small");
  check(spacing_mm > 0, "spacing_mm must be positive");
  check(noise_hu >= 0, "noise_hu must be >= 0");
  check(radius_min > 0 && radius_min <= radius_max, "need 0 < radius_min <= radius_max");
  check(lesion_count_min >= 1 && lesion_count_min <= lesion_count_max, "need 1 <= count_min <= count_max");
  check(flip_rate >= 0 && flip_rate < 0.5, "flip_rate must be in [0, 0.5)");
  check(burden_threshold > 0, "burden_threshold must be positive");
  check(burden_margin >= 0 && burden_margin < 1, "burden_margin must be in [0, 1)");
  // The lesion has to fit inside the brain ellipsoid with one voxel to spare.
  const double in_plane = 0.42 * static_cast<double>(std::min(volume_shape[0], volume_shape[1])) - 3.0;
  const double axial = volume_shape[2] == 1 ? in_plane : 0.42 * static_cast<double>(volume_shape[2]) - 3.0;
  check(radius_max + 1.0 <= std::min(in_plane, axial), "lesion does not fit inside the volume");
}

void validate(const RunConfig& c) {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) fail(Errc::ConfigInvalid, "config: " + what);
  };
  c.prep.pipeline.intensity.validate();
  const auto& pl = c.prep.pipeline;
  check(pl.percentile_low >= 0 && pl.percentile_low < pl.percentile_high && pl.percentile_high <= 100,
        "prep percentiles must satisfy 0 <= low < high <= 100");
  c.model.net.validate();
  c.train.fit.validate();
  check(c.train.val_fraction > 0 && c.train.val_fraction < 1, "train.val_fraction must be in (0, 1)");
  check(c.train.window_low_hu < c.train.window_high_hu, "train HU window must have low < high");
  check(c.eval.threshold >= 0 && c.eval.threshold <= 1, "eval.threshold must be in [0, 1]");
  check(c.explain.target_class == 0 || c.explain.target_class == 1, "explain.target_class must be 0 or 1");
  check(c.explain.top_threshold > 0 && c.explain.top_threshold <= 1, "explain.top_threshold must be in (0, 1]");
  check(c.stats.ci_z > 0, "stats.ci_z must be positive");
  check(c.threads >= 1, "threads must be >= 1");
  c.synth.validate();
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  Section root(j, "root");
  root.sub("prep", [&](Section& s) { read_prep(s, c.prep); });
  root.sub("model", [&](Section& s) { read_model(s, c.model); });
  root.sub("train", [&](Section& s) { read_train(s, c.train); });
  root.sub("eval", [&](Section& s) {
    s.get("threshold", c.eval.threshold);
    get_enum(s, "macro_policy", kPolicies, c.eval.macro_policy);
  });
  root.sub("explain", [&](Section& s) {
    s.get("layer", c.explain.layer);
    s.get("target_class", c.explain.target_class);
    s.get("top_threshold", c.explain.top_threshold);
  });
  root.sub("stats", [&](Section& s) { s.get("ci_z", c.stats.ci_z); });
  root.sub("paths", [&](Section& s) {
    s.get("data", c.paths.data);
    s.get("out", c.paths.out);
    s.get("checkpoint", c.paths.checkpoint);
    s.get("predictions", c.paths.predictions);
    s.get("cohort", c.paths.cohort);
    s.get("template", c.paths.template_volume);
  });
  root.sub("synth", [&](Section& s) { read_synth(s, c.synth); });
  root.get("seed", c.seed);
  root.get("threads", c.threads);
  root.finish();
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  const auto bytes = volio::read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    fail(Errc::ConfigInvalid, "config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  return {{"prep", write_prep(c.prep)},
          {"model", write_model(c.model)},
          {"train", write_train(c.train)},
          {"eval", {{"threshold", c.eval.threshold}, {"macro_policy", enum_name(kPolicies, c.eval.macro_policy)}}},
          {"explain",
           {{"layer", c.explain.layer},
            {"target_class", c.explain.target_class},
            {"top_threshold", c.explain.top_threshold}}},
          {"stats", {{"ci_z", c.stats.ci_z}}},
          {"paths",
           {{"data", c.paths.data.string()},
            {"out", c.paths.out.string()},
            {"checkpoint", c.paths.checkpoint.string()},
            {"predictions", c.paths.predictions.string()},
            {"cohort", c.paths.cohort.string()},
            {"template", c.paths.template_volume.string()}}},
          {"synth", write_synth(c.synth)},
          {"seed", c.seed},
          {"threads", c.threads}};
}

void write_resolved(const RunConfig& c, const std::filesystem::path& dir) {
  write_text(dir / "resolved_config.json", dump(to_json(c)));
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace sahnet::cli
