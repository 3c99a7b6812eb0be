#include <cmath>

#include "ncvax/estimators.hpp"

namespace ncvax {
namespace {

std::vector<std::string> unbalanced_strata(std::span<const StratumCounts> strata) {
  std::vector<std::string> out;
  for (const auto& s : strata)
    if (s.n1 == 0 || s.n0 == 0) out.push_back(s.label);
  return out;
}

std::optional<double> log_ratio(std::span<const StratumCounts> strata, bool negative_control) {
  double num = 0.0, den = 0.0;
  for (const auto& s : strata) {
    if (s.n == 0) continue;
    const double n = static_cast<double>(s.n);
    const double x = static_cast<double>(negative_control ? s.x2 : s.x1);
    const double z = static_cast<double>(negative_control ? s.z2 : s.z1);
    num += static_cast<double>(s.n0) * x / n;
    den += static_cast<double>(s.n1) * z / n;
  }
  if (!(num > 0.0) || !(den > 0.0)) return std::nullopt;
  return std::log(num / den);
}

std::optional<double> joint_mh_statistic(std::span<const StratumCounts> strata) {
  const auto b1 = mh_log_ratio(strata);
  const auto b2 = mh_log_ratio_negative_control(strata);
  if (!b1 || !b2) return std::nullopt;
  return *b1 - *b2;
}

void attach_bootstrap(EstimateResult& result, const BootstrapSummary& boot) {
  result.diagnostics.bootstrap_reps = boot.reps;
  result.diagnostics.bootstrap_failures = boot.failures;
  if (boot.failures > 0)
    result.diagnostics.warnings.push_back(std::to_string(boot.failures) +
                                          " bootstrap resamples had an undefined estimate");
}

}  // namespace

std::optional<double> mh_log_ratio(std::span<const StratumCounts> strata) { return log_ratio(strata, false); }

std::optional<double> mh_log_ratio_negative_control(std::span<const StratumCounts> strata) {
  return log_ratio(strata, true);
}

PooledEstimate pool_inverse_variance(std::span<const double> estimates, std::span<const double> variances) {
  if (estimates.size() != variances.size() || estimates.empty())
    throw Error(ErrorCode::DimensionMismatch, "estimates and variances must be nonempty and equal in length");
  double wsum = 0.0, wbeta = 0.0;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    if (!(variances[k] > 0.0) || !std::isfinite(variances[k]))
      throw Error(ErrorCode::ZeroVariance, "pooling needs positive finite variances");
    const double w = 1.0 / variances[k];
    wsum += w;
    wbeta += w * estimates[k];
  }
  return {wbeta / wsum, 1.0 / wsum};
}

EstimateResult estimate_mh(const Dataset& data, const StratumSpec& spec, const EstimatorOptions& options) {
  const auto assignment = assign_strata(data, spec);
  const auto beta = mh_log_ratio(assignment.strata);
  if (!beta) throw Error(ErrorCode::AllStrataDegenerate, "Mantel-Haenszel sums are zero");
  const auto boot = bootstrap_stratified(data, assignment, &mh_log_ratio, options.bootstrap_reps,
                                         options.bootstrap_seed, options.workers);
  auto result = make_estimate(Method::mh, *beta, boot.std_err, options.ci_level);
  result.diagnostics.excluded_strata = unbalanced_strata(assignment.strata);
  attach_bootstrap(result, boot);
  return result;
}

EstimateResult estimate_joint_mh(const Dataset& data, const StratumSpec& spec, const EstimatorOptions& options) {
  const auto assignment = assign_strata(data, spec);
  const auto b1 = mh_log_ratio(assignment.strata);
  const auto b2 = mh_log_ratio_negative_control(assignment.strata);
  if (!b1 || !b2) throw Error(ErrorCode::AllStrataDegenerate, "Mantel-Haenszel sums are zero");
  const auto boot = bootstrap_stratified(data, assignment, &joint_mh_statistic, options.bootstrap_reps,
                                         options.bootstrap_seed, options.workers);
  auto result = make_estimate(Method::joint_mh, *b1 - *b2, boot.std_err, options.ci_level);
  result.components = std::pair{*b1, *b2};
  result.diagnostics.excluded_strata = unbalanced_strata(assignment.strata);
  attach_bootstrap(result, boot);
  return result;
}

EstimateResult estimate_ss_joint(const Dataset& data, const StratumSpec& spec, const EstimatorOptions& options) {
  const auto assignment = assign_strata(data, spec);
  std::vector<std::vector<std::size_t>> rows(assignment.strata.size());
  for (std::size_t i = 0; i < assignment.index.size(); ++i) rows[assignment.index[i]].push_back(i);

  std::vector<double> b1, b2, variances;
  std::vector<std::string> excluded, warnings;
  int iterations = 0;
  for (std::size_t k = 0; k < assignment.strata.size(); ++k) {
    const auto& s = assignment.strata[k];
    if (s.x1 == 0 || s.z1 == 0 || s.x2 == 0 || s.z2 == 0) {
      excluded.push_back(s.label);
      continue;
    }
    try {
      const auto r = estimate_joint_nc(data.subset(rows[k]), options);
      const double v = r.std_err * r.std_err;
      if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::ZeroVariance, "zero stratum variance");
      b1.push_back(r.components->first);
      b2.push_back(r.components->second);
      variances.push_back(v);
      iterations += r.diagnostics.iterations;
    } catch (const Error& e) {
      excluded.push_back(s.label);
      warnings.push_back("stratum " + s.label + " excluded: " + e.what());
    }
  }
  if (variances.empty()) throw Error(ErrorCode::AllStrataDegenerate, "no stratum supports a joint estimate");

  const auto p1 = pool_inverse_variance(b1, variances);
  const auto p2 = pool_inverse_variance(b2, variances);
  auto result = make_estimate(Method::ss_joint, p1.estimate - p2.estimate, std::sqrt(p1.variance), options.ci_level);
  result.components = std::pair{p1.estimate, p2.estimate};
  result.diagnostics.iterations = iterations;
  result.diagnostics.excluded_strata = std::move(excluded);
  result.diagnostics.warnings = std::move(warnings);
  return result;
}

EstimateResult estimate(Method method, const Dataset& data, const MethodOptions& options) {
  const auto& eo = options.estimator;
  auto strata = [&]() -> const StratumSpec& {
    if (!options.strata) throw Error(ErrorCode::InvalidOptions, std::string(to_string(method)) + " needs strata");
    return *options.strata;
  };
  auto regression = [&]() -> const RegressionSpec& {
    if (!options.regression)
      throw Error(ErrorCode::InvalidOptions, std::string(to_string(method)) + " needs a regression spec");
    return *options.regression;
  };
  const RegressionSpec* reg = options.regression ? &*options.regression : nullptr;
  switch (method) {
    case Method::unaug: return estimate_unaug(data, eo);
    case Method::aug: return estimate_aug(data, Augmentation::y2, reg, eo);
    case Method::aug_w: return estimate_aug(data, Augmentation::w, &regression(), eo);
    case Method::aug_y2w: return estimate_aug(data, Augmentation::y2_and_w, &regression(), eo);
    case Method::mh: return estimate_mh(data, strata(), eo);
    case Method::joint_nc: return estimate_joint_nc(data, eo);
    case Method::ss_joint: return estimate_ss_joint(data, strata(), eo);
    case Method::joint_mh: return estimate_joint_mh(data, strata(), eo);
    case Method::joint_reg: return estimate_joint_reg(data, regression(), eo);
  }
  throw Error(ErrorCode::InvalidOptions, "unknown method");
}

}  // namespace ncvax
