#include "sahnet/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <exception>
#include <ostream>
#include <thread>

#include "CLI11.hpp"
#include "sahnet/cli/csv.hpp"
#include "sahnet/cli/dataset.hpp"
#include "sahnet/cli/synth.hpp"
#include "sahnet/eval/metrics.hpp"
#include "sahnet/eval/roc.hpp"
#include "sahnet/eval/stats.hpp"
#include "sahnet/explain/gradcam.hpp"
#include "sahnet/net/densenet.hpp"
#include "sahnet/prep/phantom.hpp"
#include "sahnet/random.hpp"
#include "sahnet/train/checkpoint.hpp"
#include "sahnet/volio/nifti.hpp"

namespace sahnet::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void require(const fs::path& p, const char* what) {
  if (p.empty()) fail(Errc::Usage, std::string("missing ") + what);
}

json metric_json(const eval::Metric& m) { return m.defined ? json(eval::round2(m.value)) : json(nullptr); }

json metrics_json(const eval::ClassMetrics& m) {
  return {{"sensitivity", metric_json(m.sensitivity)},
          {"specificity", metric_json(m.specificity)},
          {"precision", metric_json(m.precision)},
          {"fpr", metric_json(m.fpr)},
          {"fnr", metric_json(m.fnr)},
          {"fdr", metric_json(m.fdr)},
          {"accuracy", metric_json(m.accuracy)},
          {"f1", metric_json(m.f1)}};
}

LoadOptions load_options(const RunConfig& c, std::size_t spatial_dims) {
  return {c.train.window_low_hu, c.train.window_high_hu, spatial_dims};
}

std::vector<fs::path> nifti_inputs(const fs::path& dir) {
  const fs::path root = fs::is_directory(dir / "images") ? dir / "images" : dir;
  if (!fs::is_directory(root)) fail(Errc::IoFailure, "not a directory: " + root.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(root)) {
    const auto name = e.path().filename().string();
    auto ends = [&](const std::string& s) {
      return name.size() > s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    if (e.is_regular_file() && (ends(".nii") || ends(".nii.gz"))) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string subject_of(const fs::path& p) {
  auto name = p.filename().string();
  for (const std::string ext : {".nii.gz", ".nii"})
    if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0)
      return name.substr(0, name.size() - ext.size());
  return name;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers; the first failure
// (lowest index) is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t w, std::size_t stride) {
    for (std::size_t i = w; i < n; i += stride) try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
  };
  const std::size_t t = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < t; ++w) pool.emplace_back(work, w, t);
  work(0, t);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<Prediction> read_predictions(const fs::path& path) {
  const Table t = read_csv(path);
  const auto id = t.column("subject_id"), score = t.column("score_dead"), label = t.column("label");
  std::vector<Prediction> out;
  for (const auto& r : t.rows) {
    Prediction p{r[id], parse_double(r[score], "score_dead"), static_cast<int>(parse_long(r[label], "label"))};
    if (p.label != 0 && p.label != 1) fail(Errc::UnknownClass, "label must be 0 or 1 for " + p.subject_id);
    out.push_back(std::move(p));
  }
  if (out.empty()) fail(Errc::LengthMismatch, "no predictions in " + path.string());
  return out;
}

std::string predictions_csv(const std::vector<Prediction>& p) {
  Table t{{"subject_id", "score_dead", "label"}, {}};
  for (const auto& x : p) t.rows.push_back({x.subject_id, num(x.score_dead), std::to_string(x.label)});
  return to_csv(t);
}

json evaluation_report(const std::vector<Prediction>& p, const EvalSection& o) {
  std::vector<int> pred, truth;
  std::vector<double> scores;
  for (const auto& x : p) {
    pred.push_back(x.score_dead >= o.threshold ? 1 : 0);
    truth.push_back(x.label);
    scores.push_back(x.score_dead);
  }
  const auto cm = eval::confusion(pred, truth, 2);
  std::vector<eval::ClassMetrics> per_class;
  json classes;
  const char* names[2] = {"alive", "dead"};
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& c = cm.classes[k];
    per_class.push_back(eval::class_metrics(c));
    classes[names[k]] = {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}, {"metrics", metrics_json(per_class.back())}};
  }
  const auto macro = eval::macro_average(per_class, cm.classes, o.macro_policy);
  json report = {{"n", p.size()},
                 {"threshold", o.threshold},
                 {"classes", classes},
                 {"macro",
                  {{"tp", macro.tp},
                   {"tn", macro.tn},
                   {"fp", macro.fp},
                   {"fn", macro.fn},
                   {"metrics", metrics_json(macro.metrics)}}}};
  const bool both = std::count(truth.begin(), truth.end(), 1) > 0 && std::count(truth.begin(), truth.end(), 0) > 0;
  if (both) {
    const double auc = eval::roc_auc(scores, truth);
    report["auc"] = eval::round2(auc);
    report["auc_exact"] = auc;
  } else {
    report["auc"] = nullptr;
    report["auc_exact"] = nullptr;
  }
  return report;
}

std::string roc_csv(const std::vector<Prediction>& p) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& x : p) {
    scores.push_back(x.score_dead);
    labels.push_back(x.label);
  }
  Table t{{"threshold", "fpr", "tpr"}, {}};
  for (const auto& pt : eval::roc_curve(scores, labels)) t.rows.push_back({num(pt.threshold), num(pt.fpr), num(pt.tpr)});
  return to_csv(t);
}

json cohort_statistics(const fs::path& cohort_csv, double ci_z) {
  const Table t = read_csv(cohort_csv);
  const auto outcome = t.column("dead");
  std::vector<int> dead;
  for (const auto& r : t.rows) {
    const long v = parse_long(r[outcome], "dead");
    if (v != 0 && v != 1) fail(Errc::UnknownClass, "dead must be 0 or 1");
    dead.push_back(static_cast<int>(v));
  }
  json binary = json::array(), continuous = json::array();
  for (std::size_t col = 0; col < t.header.size(); ++col) {
    const auto& name = t.header[col];
    if (col == outcome || name == "subject_id") continue;
    std::vector<double> x;
    for (const auto& r : t.rows) x.push_back(parse_double(r[col], name));
    const bool is_binary = std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0 || v == 1.0; });
    if (is_binary) {
      eval::Contingency2x2 c;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == 1.0)
          (dead[i] ? c.a : c.b) += 1;
        else
          (dead[i] ? c.c : c.d) += 1;
      }
      json rec = {{"variable", name}, {"a", c.a}, {"b", c.b}, {"c", c.c}, {"d", c.d}};
      const auto o = eval::odds_ratio(c, ci_z);
      rec["odds_ratio"] = {{"value", eval::round2(o.or_value)},
                           {"ci_low", eval::round2(o.ci_low)},
                           {"ci_high", eval::round2(o.ci_high)},
                           {"corrected", o.corrected},
                           {"exact", {o.or_value, o.ci_low, o.ci_high}}};
      try {
        const auto chi = eval::chi_square(c);
        rec["chi_square"] = {
            {"statistic", eval::round2(chi.statistic)}, {"dof", chi.dof}, {"p", chi.p}, {"exact", chi.statistic}};
      } catch (const Error& e) {
        rec["chi_square"] = {{"error", std::string(to_string(e.code()))}};
      }
      binary.push_back(rec);
    } else {
      std::vector<double> a, b;
      for (std::size_t i = 0; i < x.size(); ++i) (dead[i] ? a : b).push_back(x[i]);
      auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double e : v) s += e;
        return v.empty() ? 0.0 : s / double(v.size());
      };
      json rec = {{"variable", name}, {"mean_dead", mean(a)}, {"mean_alive", mean(b)}};
      for (auto [kind, key] : {std::pair{eval::TTestKind::Student, "student"}, {eval::TTestKind::Welch, "welch"}}) {
        try {
          const auto r = eval::t_test(a, b, kind);
          rec[key] = {{"t", r.t}, {"dof", r.dof}, {"p", r.p}};
        } catch (const Error& e) {
          rec[key] = {{"error", std::string(to_string(e.code()))}};
        }
      }
      continuous.push_back(rec);
    }
  }
  return {{"n", dead.size()},
          {"deaths", std::count(dead.begin(), dead.end(), 1)},
          {"binary", binary},
          {"continuous", continuous}};
}

void run_synth(const RunConfig& c) {
  require(c.paths.out, "output directory (--out)");
  const auto cohort = generate_cohort(c.synth, c.seed);
  write_cohort(cohort, c.paths.out);
  write_resolved(c, c.paths.out);
}

void run_prep(const RunConfig& c) {
  require(c.paths.data, "input directory (--data)");
  require(c.paths.out, "output directory (--out)");
  const auto inputs = nifti_inputs(c.paths.data);
  if (inputs.empty()) fail(Errc::IoFailure, "no NIfTI files in " + c.paths.data.string());
  const volio::Volume tmpl =
      c.paths.template_volume.empty()
          ? prep::brain_template({c.prep.template_shape[0], c.prep.template_shape[1], c.prep.template_shape[2]},
                                 c.prep.template_spacing_mm)
          : volio::read_nifti_file(c.paths.template_volume);
  fs::create_directories(c.paths.out);
  std::vector<json> qc(inputs.size());
  parallel_for(inputs.size(), c.threads, [&](std::size_t i) {
    const auto id = subject_of(inputs[i]);
    const auto r = prep::run_pipeline(volio::read_nifti_file(inputs[i]), tmpl, c.prep.pipeline);
    volio::write_nifti_file(c.paths.out / (id + ".nii"), r.output);
    const auto& q = r.qc;
    qc[i] = {{"subject_id", id},
             {"resampled_to_axis_aligned", q.resampled_to_axis_aligned},
             {"intensity_mode", q.intensity_mode},
             {"clamped_voxels", q.clamped_voxels},
             {"mask_volume_ml", q.mask_volume_ml},
             {"registration_initial_mse", q.registration_initial_mse},
             {"registration_mse", q.registration_mse},
             {"registration_iterations", q.registration_iterations},
             {"registration_converged", q.registration_converged},
             {"window_low", q.window_low},
             {"window_high", q.window_high}};
  });
  write_text(c.paths.out / "qc.json", dump(json(qc)));
  write_resolved(c, c.paths.out);
}

void run_train(const RunConfig& c) {
  require(c.paths.data, "dataset directory (--data)");
  require(c.paths.out, "output directory (--out)");
  const auto data = load_dataset(c.paths.data, load_options(c, c.model.net.spatial_dims));
  const auto seeds = train_seeds(c.seed);
  const auto [tr, va] = train::stratified_split(data.labels(), c.train.val_fraction, seeds.split);
  const auto train_set = train::subset(data, tr), val_set = train::subset(data, va);

  auto model = net::build(c.model.net, seeds.model);
  if (c.model.fuse_metadata) model = net::fuse_metadata(model, net::MetadataSpec{}, seeds.fuse);
  auto cfg = c.train.fit;
  cfg.seed = c.seed;
  cfg.checkpoint_dir = c.paths.out / "checkpoints";
  const auto result = train::fit(model, train_set, val_set, cfg);

  write_text(c.paths.out / "history.csv", result.history.to_csv());
  write_text(c.paths.out / "history.json", result.history.to_json());
  json split = {{"train", json::array()}, {"val", json::array()}};
  for (const auto& s : train_set.samples) split["train"].push_back(s.id);
  for (const auto& s : val_set.samples) split["val"].push_back(s.id);
  split["stopped_early"] = result.stopped_early;
  write_text(c.paths.out / "split.json", dump(split));
  write_resolved(c, c.paths.out);
}

void run_eval(const RunConfig& c) {
  require(c.paths.out, "output directory (--out)");
  std::vector<Prediction> preds;
  if (!c.paths.predictions.empty()) {
    preds = read_predictions(c.paths.predictions);
  } else {
    require(c.paths.checkpoint, "predictions CSV (--input) or checkpoint (--checkpoint)");
    require(c.paths.data, "dataset directory (--data)");
    const auto ck = train::load_checkpoint(c.paths.checkpoint);
    const auto data = load_dataset(c.paths.data, load_options(c, ck.model.config().spatial_dims));
    const auto scores = train::predict_dead(ck.model, data, c.train.fit.batch_size);
    for (std::size_t i = 0; i < data.samples.size(); ++i)
      preds.push_back({data.samples[i].id, scores[i], data.samples[i].label});
  }
  write_text(c.paths.out / "predictions.csv", predictions_csv(preds));
  write_text(c.paths.out / "metrics.json", dump(evaluation_report(preds, c.eval)));
  std::vector<int> labels;
  for (const auto& p : preds) labels.push_back(p.label);
  if (std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0)
    write_text(c.paths.out / "roc.csv", roc_csv(preds));
  write_resolved(c, c.paths.out);
}

void run_explain(const RunConfig& c, const std::string& subject) {
  require(c.paths.out, "output directory (--out)");
  require(c.paths.checkpoint, "checkpoint (--checkpoint)");
  require(c.paths.data, "dataset directory (--data)");
  if (subject.empty()) fail(Errc::Usage, "missing subject (--subject)");
  const auto ck = train::load_checkpoint(c.paths.checkpoint);
  const auto volume = volio::read_nifti_file(subject_image(c.paths.data, subject));
  const auto image = to_image(volume, load_options(c, ck.model.config().spatial_dims));

  tensor::Tensor meta;
  if (const auto* spec = ck.model.metadata_spec()) {
    const auto rows = read_metadata(c.paths.data / "metadata.csv");
    auto it = rows.find(subject);
    if (it == rows.end()) fail(Errc::MetadataMissing, "no metadata for " + subject);
    meta = spec->to_tensor({it->second});
  }
  const auto s = explain::grad_cam(ck.model, image, c.explain.target_class, c.explain.layer, meta);
  fs::create_directories(c.paths.out);
  explain::export_overlay(s, volume, c.paths.out / (subject + "_saliency.nii"));

  const auto top = explain::top_decile(s, c.explain.top_threshold);
  json report = {{"subject_id", subject},
                 {"target_class", s.target_class},
                 {"source_layer", s.source_layer},
                 {"all_zero", s.all_zero},
                 {"raw_max", s.raw_max},
                 {"top_threshold", c.explain.top_threshold},
                 {"top_voxels", top.size()}};
  if (!top.empty()) {
    const auto cen = explain::top_decile_centroid(s, c.explain.top_threshold);
    const auto mm = volio::apply(volume.affine(), {cen[0], cen[1], cen[2]});
    report["centroid_voxel"] = cen;
    report["centroid_mm"] = {mm[0], mm[1], mm[2]};
  }
  if (fs::exists(c.paths.data / "ground_truth.json")) {
    for (const auto& t : read_ground_truth(c.paths.data / "ground_truth.json")) {
      if (t.id != subject || top.empty()) continue;
      std::size_t inside = 0;
      const std::size_t w = s.shape.w, h = s.shape.h;
      for (std::size_t i : top)
        if (t.in_bbox(i % w, (i / w) % h, i / (w * h))) ++inside;
      report["top_in_lesion_bbox"] = double(inside) / double(top.size());
    }
  }
  write_text(c.paths.out / (subject + "_saliency.json"), dump(report));
  write_resolved(c, c.paths.out);
}

void run_stats(const RunConfig& c) {
  require(c.paths.cohort, "cohort CSV (--input)");
  require(c.paths.out, "output directory (--out)");
  write_text(c.paths.out / "stats.json", dump(cohort_statistics(c.paths.cohort, c.stats.ci_z)));
  write_resolved(c, c.paths.out);
}

int exit_code(ErrorClass c) {
  switch (c) {
    case ErrorClass::Usage:
      return 1;
    case ErrorClass::Data:
      return 2;
    case ErrorClass::Numeric:
      return 3;
  }
  return 2;
}

std::string error_json(const Error& e) {
  const char* cls = "data";
  switch (error_class(e.code())) {
    case ErrorClass::Usage:
      cls = "usage";
      break;
    case ErrorClass::Numeric:
      cls = "numeric";
      break;
    case ErrorClass::Data:
      break;
  }
  json j = {{"error", std::string(to_string(e.code()))}, {"class", cls}, {"message", e.what()}};
  if (!e.stage().empty()) j["stage"] = e.stage();
  return j.dump();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"sahnet: CT mortality classifier toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir, checkpoint, subject, data, input;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  app.add_option("--config", config_path, "RunConfig JSON");
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--checkpoint", checkpoint, "checkpoint stem, .manifest or .blob");
  app.add_option("--subject", subject, "subject id (explain)");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--data", data, "dataset or input directory");
  app.add_option("--input", input, "predictions CSV (eval) or cohort CSV (stats)");
  const char* names[] = {"prep", "synth", "train", "eval", "explain", "stats"};
  const char* help[] = {"preprocess a directory of NIfTI volumes",
                        "write a synthetic cohort",
                        "train a classifier",
                        "evaluate predictions or a checkpoint",
                        "Grad-CAM saliency for one subject",
                        "univariate clinical statistics"};
  for (std::size_t i = 0; i < 6; ++i) app.add_subcommand(names[i], help[i]);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::ParseError& e) {
      throw Error(Errc::Usage, e.what());
    }
    RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) c.seed = *seed;
    if (threads) c.threads = std::max<std::size_t>(1, *threads);
    if (!out_dir.empty()) c.paths.out = out_dir;
    if (!checkpoint.empty()) c.paths.checkpoint = checkpoint;
    if (!data.empty()) c.paths.data = data;
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (!input.empty()) (cmd == "stats" ? c.paths.cohort : c.paths.predictions) = input;

    if (cmd == "prep")
      run_prep(c);
    else if (cmd == "synth")
      run_synth(c);
    else if (cmd == "train")
      run_train(c);
    else if (cmd == "eval")
      run_eval(c);
    else if (cmd == "explain")
      run_explain(c, subject);
    else
      run_stats(c);
    out << json{{"command", cmd}, {"out", c.paths.out.string()}}.dump() << "\n";
    return 0;
  } catch (const Error& e) {
    err << error_json(e) << "\n";
    return exit_code(error_class(e.code()));
  } catch (const fs::filesystem_error& e) {
    err << error_json(Error(Errc::IoFailure, e.what())) << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << error_json(Error(Errc::IoFailure, e.what())) << "\n";
    return 2;
  }
}

}  // namespace sahnet::cli
