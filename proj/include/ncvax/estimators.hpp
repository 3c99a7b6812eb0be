#pragma once

// Treatment-effect estimators that use a negative-control count y2:
// augmentation for precision in randomized data, and joint estimation
// (primary minus negative-control log relative risk) for confounding.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ncvax/core.hpp"
#include "ncvax/mestimation.hpp"
#include "ncvax/regression.hpp"

namespace ncvax {

struct EstimatorOptions {
  double ci_level = 0.95;
  int bootstrap_reps = 500;
  std::uint64_t bootstrap_seed = 20240917;
  int workers = 1;
  mest::SolveOptions solve;
};

// --- randomized-trial estimators -------------------------------------------

EstimateResult estimate_unaug(const Dataset& data, const EstimatorOptions& options = {});

enum class Augmentation { y2, w, y2_and_w };

std::string_view to_string(Augmentation a);
Augmentation parse_augmentation(std::string_view text);  // y2 | w | y2w

/// Fitted E(y1 | auxiliaries, T = arm).
struct ArmConditionalMeanModel {
  enum class Kind { saturated, logistic, constant };
  int arm = 0;
  Kind kind = Kind::constant;
  double arm_mean = 0.0;
  std::vector<std::pair<double, double>> cell_means;  // saturated: (y2 value, mean)
  std::vector<std::string> terms;                       // logistic: column names
  Eigen::VectorXd coef;                                 // logistic
};

struct ArmMeans {
  ArmConditionalMeanModel treated;
  ArmConditionalMeanModel control;
  std::vector<double> e1;  // treated-model prediction for every subject
  std::vector<double> e0;  // control-model prediction for every subject
  std::vector<std::string> warnings;
};

/// Saturated cell means when augmenting by y2 alone and y2 takes at most two
/// values; otherwise per-arm logistic regression on the requested
/// regressors (y2 linear, covariate terms from regression->primary_terms).
/// Arms with no outcome variation, or separated fits, fall back to the
/// constant arm mean with a warning.
ArmMeans fit_arm_means(const Dataset& data, Augmentation augmentation,
                       const RegressionSpec* regression);

EstimateResult estimate_aug(const Dataset& data, Augmentation augmentation,
                            const RegressionSpec* regression, const EstimatorOptions& options = {});

// --- negative-control joint estimators -------------------------------------

EstimateResult estimate_joint_nc(const Dataset& data, const EstimatorOptions& options = {});

EstimateResult estimate_mh(const Dataset& data, const StratumSpec& spec,
                           const EstimatorOptions& options = {});

EstimateResult estimate_ss_joint(const Dataset& data, const StratumSpec& spec,
                                 const EstimatorOptions& options = {});

EstimateResult estimate_joint_mh(const Dataset& data, const StratumSpec& spec,
                                 const EstimatorOptions& options = {});

EstimateResult estimate_joint_reg(const Dataset& data, const RegressionSpec& regression,
                                  const EstimatorOptions& options = {});

struct Correlation {
  double overall = 0.0;
  double control = 0.0;  // NaN when y1 or y2 is constant among controls
};

/// Pearson correlation of the y1 indicator and the y2 count.
Correlation report_correlation(const Dataset& data);

// --- building blocks --------------------------------------------------------

/// log of the Mantel-Haenszel-type ratio for the primary outcome:
/// sum n0 x1 / n over sum n1 z1 / n. nullopt when either sum is zero.
std::optional<double> mh_log_ratio(std::span<const StratumCounts> strata);

/// Same weights applied to the negative-control sums.
std::optional<double> mh_log_ratio_negative_control(std::span<const StratumCounts> strata);

struct PooledEstimate {
  double estimate = 0.0;
  double variance = 0.0;
};

/// Inverse-variance weighted mean and its variance 1 / sum(1/v).
PooledEstimate pool_inverse_variance(std::span<const double> estimates, std::span<const double> variances);

/// SD of `statistic` over subject-level resamples of `data` tallied into the
/// strata of `assignment`. Resample b uses RNG stream (seed, b), so the
/// result does not depend on `workers`. Failed resamples (nullopt) are
/// counted, not retried.
struct BootstrapSummary {
  double std_err = 0.0;
  int reps = 0;
  int failures = 0;
};

using StratifiedStatistic = std::optional<double> (*)(std::span<const StratumCounts>);

BootstrapSummary bootstrap_stratified(const Dataset& data, const StratumAssignment& assignment,
                                      StratifiedStatistic statistic, int reps, std::uint64_t seed,
                                      int workers);

// --- dispatch ----------------------------------------------------------------

struct MethodOptions {
  EstimatorOptions estimator;
  Augmentation augmentation = Augmentation::y2;
  std::optional<RegressionSpec> regression;
  std::optional<StratumSpec> strata;
};

/// Runs `method`; aug/aug_w/aug_y2w pick their augmentation from the tag.
/// Stratified methods require options.strata, joint_reg and the W
/// augmentations require options.regression.
EstimateResult estimate(Method method, const Dataset& data, const MethodOptions& options);

}  // namespace ncvax
