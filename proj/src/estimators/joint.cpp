#include <cmath>
#include <memory>

#include "ncvax/estimators.hpp"
#include "ncvax/kernels.hpp"
#include "ncvax/systems.hpp"

namespace ncvax {
namespace {

std::shared_ptr<GlmBlock> make_block(const Design& design, Family family, std::span<const double> y) {
  auto block = std::make_shared<GlmBlock>();
  block->family = family;
  block->x = design.x;
  block->y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  return block;
}

EstimateResult joint_result(Method method, const GlmStack& system, const mest::Vector& theta,
                            int iterations, const EstimatorOptions& options) {
  const std::size_t j1 = system.offset(0) + 1, j2 = system.offset(1) + 1;
  mest::Vector c = mest::Vector::Zero(static_cast<Eigen::Index>(system.dim()));
  c[static_cast<Eigen::Index>(j1)] = 1.0;
  c[static_cast<Eigen::Index>(j2)] = -1.0;
  const mest::Matrix cov = mest::sandwich_covariance(system, theta, options.workers);
  const double b1 = theta[static_cast<Eigen::Index>(j1)];
  const double b2 = theta[static_cast<Eigen::Index>(j2)];
  auto result = make_estimate(method, b1 - b2, std::sqrt(mest::contrast_variance(cov, c)), options.ci_level);
  result.components = std::pair{b1, b2};
  result.diagnostics.iterations = iterations;
  return result;
}

}  // namespace

EstimateResult estimate_joint_nc(const Dataset& data, const EstimatorOptions& options) {
  data.require_both_arms();
  const auto tot = kernels::arm_totals(data.t(), data.y1(), data.y2());
  if (tot.t_y1 <= 0.0) throw Error(ErrorCode::DegenerateArm, "no primary events in the treated arm");
  if (tot.c_y1() <= 0.0) throw Error(ErrorCode::DegenerateArm, "no primary events in the control arm");
  if (tot.t_y1 >= tot.t || tot.c_y1() >= tot.control_n())
    throw Error(ErrorCode::DegenerateArm, "every subject in an arm had a primary event");
  if (tot.t_y2 <= 0.0 || tot.c_y2() <= 0.0)
    throw Error(ErrorCode::DegenerateNegativeControl, "no negative-control events in an arm");

  const Design two_arm = build_design(data, {.intercept = true, .treatment = true, .y2 = false}, {});
  const GlmStack system({make_block(two_arm, Family::log_binomial, data.y1()),
                         make_block(two_arm, Family::log_linear, data.y2())});
  const double n1 = tot.t, n0 = tot.control_n();
  mest::Vector theta(4);
  theta << std::log(tot.c_y1() / n0), std::log((tot.t_y1 / n1) / (tot.c_y1() / n0)),
      std::log(tot.c_y2() / n0), std::log((tot.t_y2 / n1) / (tot.c_y2() / n0));
  const auto report = mest::solve(system, theta, options.solve);
  return joint_result(Method::joint_nc, system, theta, report.iterations, options);
}

EstimateResult estimate_joint_reg(const Dataset& data, const RegressionSpec& regression,
                                  const EstimatorOptions& options) {
  data.require_both_arms();
  const Design primary =
      build_design(data, {.intercept = true, .treatment = true, .y2 = false}, regression.primary_terms);
  const Design secondary =
      build_design(data, {.intercept = true, .treatment = true, .y2 = false}, regression.secondary_terms);
  require_full_rank(primary, "primary model");
  require_full_rank(secondary, "negative-control model");

  const GlmStack system({make_block(primary, Family::log_binomial, data.y1()),
                         make_block(secondary, Family::log_linear, data.y2())});
  const auto report = system.solve_blocks(system.default_init(), options.solve);
  return joint_result(Method::joint_reg, system, report.theta_hat, report.iterations, options);
}

}  // namespace ncvax
