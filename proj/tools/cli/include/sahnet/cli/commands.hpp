#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "sahnet/cli/config.hpp"
#include "sahnet/error.hpp"

namespace sahnet::cli {

struct Prediction {
  std::string subject_id;
  double score_dead = 0.0;
  int label = 0;  // 1 dead
};

std::vector<Prediction> read_predictions(const std::filesystem::path& path);
std::string predictions_csv(const std::vector<Prediction>& p);

/// Supplementary-table style report: per-class counts and metrics (2-dp,
/// null when undefined), macro rows and the AUC.
nlohmann::json evaluation_report(const std::vector<Prediction>& p, const EvalSection& options);
std::string roc_csv(const std::vector<Prediction>& p);

/// Odds ratio and chi-square for every 0/1 column, t-tests for the rest.
/// The outcome column is `dead`.
nlohmann::json cohort_statistics(const std::filesystem::path& cohort_csv, double ci_z = 1.96);

// Each command writes into c.paths.out, including resolved_config.json.
void run_synth(const RunConfig& c);
void run_prep(const RunConfig& c);
void run_train(const RunConfig& c);
void run_eval(const RunConfig& c);
void run_explain(const RunConfig& c, const std::string& subject);
void run_stats(const RunConfig& c);

/// Exit code for an error class: usage 1, data 2, numeric 3.
int exit_code(ErrorClass c);
/// Machine-readable error line for stderr.
std::string error_json(const Error& e);

/// Parses arguments and dispatches; never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sahnet::cli
