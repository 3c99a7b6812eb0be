#include <cmath>

#include "ncvax/simulator.hpp"

namespace ncvax::sim {
namespace {

struct ArmMoments {
  double mass = 0.0, y1 = 0.0, y2 = 0.0;
};

std::array<ArmMoments, 2> conditional_moments(const GeneratorConfig& config) {
  std::array<ArmMoments, 2> out{};
  for (const auto& c : enumerate_cells(config))
    for (int t : {0, 1}) {
      const double w = c.weight * (t == 1 ? c.p_treat : 1.0 - c.p_treat);
      out[t].mass += w;
      out[t].y1 += w * composite_probability(config, c, t);
      out[t].y2 += w * negative_control_mean(config, c, t);
    }
  return out;
}

}  // namespace

std::vector<Cell> enumerate_cells(const GeneratorConfig& config) {
  const std::size_t ages = config.age_levels.size();
  if (ages == 0 || config.a_probs.size() != kSites * ages)
    throw Error(ErrorCode::InvalidConfig, "a_probs must have one row per (site, age) pair");
  std::vector<Cell> cells;
  cells.reserve(kSites * ages * 3);
  const double wa = 1.0 / (kSites * static_cast<double>(ages));
  for (int s = 0; s < kSites; ++s)
    for (std::size_t k = 0; k < ages; ++k)
      for (int a = 0; a < 3; ++a) {
        Cell c;
        c.site = s;
        c.age_index = k;
        c.a_index = a;
        c.age = config.age_levels[k];
        c.a = config.a_values[static_cast<std::size_t>(a)];
        c.weight = wa * config.a_probs[static_cast<std::size_t>(s) * ages + k][static_cast<std::size_t>(a)];
        cells.push_back(c);
      }
  if (config.design == Design::observational) {
    const auto& tm = config.treatment;
    double norm = 0.0;
    for (auto& c : cells) {
      c.p_treat = 1.0 / (1.0 + std::exp(-(tm.gamma + tm.delta * c.age + tm.eta * c.site + tm.theta * c.a)));
      norm += c.weight * c.p_treat;
    }
    for (auto& c : cells) c.p_treat = 0.5 * c.p_treat / norm;
  }
  return cells;
}

double outcome_probability(const TypeEffects& type, const Cell& cell, int t) {
  return cell.a * std::exp(type.mu + type.beta * t + type.alpha * cell.age +
                           type.site[static_cast<std::size_t>(cell.site)]);
}

double composite_probability(const GeneratorConfig& config, const Cell& cell, int t) {
  const double p = outcome_probability(config.primary[0], cell, t);
  if (!config.second_primary_enabled) return p;
  const double q = outcome_probability(config.primary[1], cell, t);
  return p + q - p * q;
}

double negative_control_mean(const GeneratorConfig& config, const Cell& cell, int t) {
  double sum = 0.0;
  for (const auto& k : config.negative_controls) sum += outcome_probability(k, cell, t);
  return sum;
}

double treatment_marginal(const GeneratorConfig& config) {
  double sum = 0.0;
  for (const auto& c : enumerate_cells(config)) sum += c.weight * c.p_treat;
  return sum;
}

double marginal_incidence(const GeneratorConfig& config, int primary_index) {
  const auto& type = config.primary.at(static_cast<std::size_t>(primary_index));
  double sum = 0.0;
  for (const auto& c : enumerate_cells(config))
    sum += c.weight * (c.p_treat * outcome_probability(type, c, 1) +
                       (1.0 - c.p_treat) * outcome_probability(type, c, 0));
  return sum;
}

double marginal_y2_mean(const GeneratorConfig& config) {
  double sum = 0.0;
  for (const auto& c : enumerate_cells(config))
    sum += c.weight * (c.p_treat * negative_control_mean(config, c, 1) +
                       (1.0 - c.p_treat) * negative_control_mean(config, c, 0));
  return sum;
}

GeneratorConfig calibrate_intercepts(GeneratorConfig config, std::pair<double, double> incidence,
                                     std::optional<double> y2_mean) {
  auto check_target = [](double target, const char* what) {
    if (!(target > 0.0 && target < 1.0))
      throw Error(ErrorCode::InvalidConfig, std::string(what) + " target must lie in (0, 1)");
  };
  const int types = config.second_primary_enabled ? 2 : 1;
  for (int j = 0; j < types; ++j) {
    const double target = j == 0 ? incidence.first : incidence.second;
    check_target(target, "incidence");
    const double current = marginal_incidence(config, j);
    if (!(current > 0.0))
      throw Error(ErrorCode::TargetUnreachable, "incidence is zero for every intercept");
    config.primary[static_cast<std::size_t>(j)].mu += std::log(target / current);
  }
  if (y2_mean) {
    if (!(*y2_mean > 0.0)) throw Error(ErrorCode::InvalidConfig, "y2 mean target must be positive");
    const double current = marginal_y2_mean(config);
    if (!(current > 0.0)) throw Error(ErrorCode::TargetUnreachable, "y2 mean is zero for every shift");
    const double shift = std::log(*y2_mean / current);
    for (auto& k : config.negative_controls) k.mu += shift;
  }
  try {
    validate(config);
  } catch (const Error& e) {
    throw Error(ErrorCode::TargetUnreachable, std::string("calibrated config is invalid: ") + e.what());
  }
  return config;
}

double true_beta1_composite(const GeneratorConfig& config) {
  double treated = 0.0, control = 0.0;
  for (const auto& c : enumerate_cells(config)) {
    treated += c.weight * composite_probability(config, c, 1);
    control += c.weight * composite_probability(config, c, 0);
  }
  if (!(treated > 0.0) || !(control > 0.0))
    throw Error(ErrorCode::InvalidConfig, "composite incidence is zero under an intervention");
  return std::log(treated / control);
}

double plim_oracle(const GeneratorConfig& config, Method method) {
  const auto m = conditional_moments(config);
  const double unaug = std::log((m[1].y1 / m[1].mass) / (m[0].y1 / m[0].mass));
  switch (method) {
    case Method::unaug: return unaug;
    case Method::joint_nc: return unaug - std::log((m[1].y2 / m[1].mass) / (m[0].y2 / m[0].mass));
    default: throw Error(ErrorCode::InvalidOptions, "plim oracle covers unaug and joint_nc only");
  }
}

double population_correlation(const GeneratorConfig& config) {
  double e1 = 0.0, e2 = 0.0, e22 = 0.0, e12 = 0.0;
  for (const auto& c : enumerate_cells(config))
    for (int t : {0, 1}) {
      const double w = c.weight * (t == 1 ? c.p_treat : 1.0 - c.p_treat);
      const double p = composite_probability(config, c, t);
      double mean = 0.0, var = 0.0;
      for (const auto& k : config.negative_controls) {
        const double q = outcome_probability(k, c, t);
        mean += q;
        var += q * (1.0 - q);
      }
      e1 += w * p;
      e2 += w * mean;
      e22 += w * (var + mean * mean);
      e12 += w * p * mean;
    }
  return (e12 - e1 * e2) / std::sqrt(e1 * (1.0 - e1) * (e22 - e2 * e2));
}

}  // namespace ncvax::sim
