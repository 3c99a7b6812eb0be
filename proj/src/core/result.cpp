#include <boost/math/distributions/normal.hpp>

#include <array>
#include <cmath>

#include "ncvax/core.hpp"

namespace ncvax {
namespace {

constexpr std::array<std::pair<Method, std::string_view>, 9> kMethodTags{{
    {Method::unaug, "unaug"},
    {Method::aug, "aug"},
    {Method::aug_w, "aug_w"},
    {Method::aug_y2w, "aug_y2w"},
    {Method::mh, "mh"},
    {Method::joint_nc, "joint_nc"},
    {Method::ss_joint, "ss_joint"},
    {Method::joint_mh, "joint_mh"},
    {Method::joint_reg, "joint_reg"},
}};

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& [method, tag] : kMethodTags)
    if (method == m) return tag;
  return "unknown";
}

Method parse_method(std::string_view tag) {
  for (const auto& [method, name] : kMethodTags)
    if (name == tag) return method;
  throw Error(ErrorCode::InvalidOptions, "unknown method '" + std::string(tag) + "'");
}

bool is_joint(Method m) {
  return m == Method::joint_nc || m == Method::ss_joint || m == Method::joint_mh ||
         m == Method::joint_reg;
}

double normal_two_sided_quantile(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorCode::InvalidOptions, "confidence level must lie in (0, 1)");
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 0.5 * (1.0 + level));
}

EstimateResult make_estimate(Method method, double beta1_hat, double std_err, double ci_level) {
  EstimateResult r;
  r.method = method;
  r.beta1_hat = beta1_hat;
  r.std_err = std_err;
  r.ci_level = ci_level;
  const double half = normal_two_sided_quantile(ci_level) * std_err;
  r.ci_lo = beta1_hat - half;
  r.ci_hi = beta1_hat + half;
  r.ve = 1.0 - std::exp(beta1_hat);
  return r;
}

}  // namespace ncvax
