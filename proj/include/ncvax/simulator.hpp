#pragma once

// Cohort generator with an unmeasured multiplicative risk factor A, plus
// exact enumeration of the finite (site, age, A, T) space for calibration
// and for the true / limiting values estimators are judged against.
//
// Per targeted type j and negative-control type k:
//   P(Y1j = 1 | T, A, W) = A exp(mu_j + beta_j T + alpha_j age + lambda_j[site])
//   P(Y2k = 1 | T, A, W) = A exp(mu_k + beta_k T + alpha_k age + site_k[site])
// y1 is the "either targeted type" composite, y2 the count over controls.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ncvax/core.hpp"

namespace ncvax::sim {

enum class Design { randomized, observational };

std::string_view to_string(Design d);

inline constexpr int kSites = 3;

struct TreatmentModel {
  // logit kernel gamma + delta age + eta site + theta A, rescaled so the
  // marginal treatment probability is 1/2
  double gamma = 0.0, delta = 0.0, eta = 0.0, theta = 0.0;
};

struct TypeEffects {
  double mu = 0.0;
  double beta = 0.0;
  double alpha = 0.0;
  std::array<double, kSites> site{};
};

struct GeneratorConfig {
  std::string name = "custom";
  std::size_t n = 5000;
  Design design = Design::randomized;
  std::vector<double> age_levels;  // equiprobable; default 15, 15.5, ..., 21
  std::array<double, 3> a_values{0.0, 1.0, 2.0};
  /// P(A = a_values[i] | site, age), row site * age_levels.size() + age index.
  std::vector<std::array<double, 3>> a_probs;
  TreatmentModel treatment;
  std::array<TypeEffects, 2> primary{};  // targeted types (16, 18)
  bool second_primary_enabled = true;
  std::vector<TypeEffects> negative_controls;  // N_NT non-targeted types

  /// Applied by finalize(): intercepts are calibrated to these.
  std::optional<std::pair<double, double>> target_incidence;
  std::optional<double> target_y2_mean;
};

std::vector<double> default_age_levels();

/// Throws InvalidConfig unless probabilities are proper and every Bernoulli
/// parameter (treatment and outcomes) stays within [0, 1].
void validate(const GeneratorConfig& config);

/// Calibrates intercepts when targets are set, then validates.
GeneratorConfig finalize(GeneratorConfig config);

// --- config files ------------------------------------------------------------

/// Flat `key = value` text; `#` starts a comment, `include = other.cfg`
/// loads a base file first (relative paths resolve against the including
/// file). Lists are comma separated; a number may be written log(x).
/// The result is not finalized.
GeneratorConfig parse_config_file(const std::filesystem::path& path);

/// Preset directory: $NCVAX_PRESET_DIR if set, else the build-time default.
std::filesystem::path preset_dir();

/// Presets are the *.cfg files in preset_dir() that set `preset = true`.
std::vector<std::string> list_presets();

/// Existing file path, or a preset name. Returns the finalized config.
/// Throws InvalidScenario if neither resolves.
GeneratorConfig load_scenario(const std::string& name_or_path);

// --- generation ----------------------------------------------------------------

struct SimulatedCohort {
  Dataset data;
  std::vector<double> a;  // hidden multiplier per subject
};

/// Pure function of (config, seed). Covariates: site (categorical "0".."2"),
/// age (numeric).
SimulatedCohort generate(const GeneratorConfig& config, std::uint64_t seed);

// --- enumeration -----------------------------------------------------------------

struct Cell {
  int site = 0;
  std::size_t age_index = 0;
  int a_index = 0;
  double age = 0.0;
  double a = 0.0;
  double weight = 0.0;   // P(site, age, A)
  double p_treat = 0.5;  // P(T = 1 | site, age, A)
};

std::vector<Cell> enumerate_cells(const GeneratorConfig& config);

/// P(Y = 1 | cell, T = t) for a type with the given effects.
double outcome_probability(const TypeEffects& type, const Cell& cell, int t);

/// Composite P(y1 = 1 | cell, t).
double composite_probability(const GeneratorConfig& config, const Cell& cell, int t);

/// E(y2 | cell, t).
double negative_control_mean(const GeneratorConfig& config, const Cell& cell, int t);

double treatment_marginal(const GeneratorConfig& config);
double marginal_incidence(const GeneratorConfig& config, int primary_index);
double marginal_y2_mean(const GeneratorConfig& config);

/// Exact intercept calibration. The marginal incidence of a type is
/// exp(mu) times a constant, so mu is solved in closed form. Throws
/// TargetUnreachable if the calibrated config breaks the validity bound.
GeneratorConfig calibrate_intercepts(GeneratorConfig config, std::pair<double, double> incidence,
                                     std::optional<double> y2_mean);

/// log E[y1 | do(T=1)] - log E[y1 | do(T=0)].
double true_beta1_composite(const GeneratorConfig& config);

/// Probability limit of the unaug or joint_nc estimate under this config.
double plim_oracle(const GeneratorConfig& config, Method method);

/// Population correlation of y1 and y2.
double population_correlation(const GeneratorConfig& config);

}  // namespace ncvax::sim
