#pragma once

// Monte Carlo studies over simulated cohorts, and the report formats the
// command-line tool writes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncvax/estimators.hpp"
#include "ncvax/simulator.hpp"

namespace ncvax::harness {

/// Strata (site x age in half-year bins) and regression terms
/// (age + age^2 + site) used for simulated cohorts unless overridden.
MethodOptions default_study_method_options();

struct StudyOptions {
  std::vector<Method> methods;
  int reps = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  MethodOptions method_options = default_study_method_options();
};

struct RepRecord {
  std::string scenario;
  std::size_t n = 0;
  int rep = 0;
  Method method = Method::unaug;
  std::uint64_t seed = 0;
  bool ok = false;
  double beta1_hat = 0.0;
  double std_err = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int covered = 0;
  double corr_y1_y2 = 0.0;  // NaN when undefined for this cohort
  double true_beta1c = 0.0;
  std::string error;  // error code name when !ok
};

struct MethodSummary {
  Method method = Method::unaug;
  int successes = 0;
  int failures = 0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double empirical_variance = 0.0;
  double variance_ratio = 0.0;  // Var(unaug) / Var(method); NaN without unaug
  double coverage = 0.0;
  double mean_se = 0.0;
};

struct StudySummary {
  std::string scenario;
  std::string design;
  std::size_t n = 0;
  int reps = 0;
  std::uint64_t seed = 0;
  double true_beta1c = 0.0;
  double mean_corr_y1_y2 = 0.0;
  std::vector<MethodSummary> methods;
  std::vector<std::string> warnings;

  const MethodSummary& at(Method m) const;
};

struct StudyResult {
  std::vector<RepRecord> records;  // rep-major, methods in request order
  StudySummary summary;
};

/// Seed of replicate `rep`; the replicate's cohort and bootstrap streams
/// derive from it alone.
std::uint64_t rep_seed(std::uint64_t study_seed, int rep);

/// Throws InvalidOptions for reps < 2 or an empty method list. Failing
/// replicates are recorded, not fatal; output is independent of workers.
StudyResult run_study(const sim::GeneratorConfig& config, const StudyOptions& options);

StudySummary summarize(const std::vector<RepRecord>& records, const std::vector<Method>& methods,
                       const std::string& design, std::uint64_t seed);

/// Methods whose every replicate failed.
std::vector<Method> all_failed(const StudySummary& summary);

// --- files -------------------------------------------------------------------

void write_rep_csv(const std::vector<RepRecord>& records, const std::filesystem::path& path);

/// Throws MalformedInput on a missing column or unparseable field.
std::vector<RepRecord> read_rep_csv(const std::filesystem::path& path);

nlohmann::json to_json(const StudySummary& summary);
std::string format_table(const StudySummary& summary);

struct AnalysisContext {
  std::string input;
  std::size_t n = 0;
  std::string strata;      // empty when unused
  std::string regression;  // empty when unused
  std::string augmentation;
};

nlohmann::json to_json(const EstimateResult& result, const AnalysisContext& context);
std::string format_table(const EstimateResult& result, const AnalysisContext& context);

/// Long-format rows (scenario, n, method, beta1_hat) for every successful
/// replicate of the selected methods, plus one `reference` row per
/// scenario carrying the true beta1c. nullopt selects every method
/// present; an empty selection, or one matching no rows, throws
/// MalformedInput. Returns the number of rows written.
std::size_t emit_plot_data(const std::vector<RepRecord>& records,
                           const std::optional<std::vector<Method>>& methods,
                           const std::filesystem::path& out);

}  // namespace ncvax::harness
