#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>

#include "ncvax/estimators.hpp"
#include "ncvax/kernels.hpp"
#include "ncvax/systems.hpp"

namespace ncvax {
namespace {

std::shared_ptr<GlmBlock> two_arm_block(const Dataset& data, Family family, std::span<const double> y) {
  auto block = std::make_shared<GlmBlock>();
  const auto n = static_cast<Eigen::Index>(data.size());
  block->family = family;
  block->x.resize(n, 2);
  block->x.col(0).setOnes();
  block->x.col(1) = Eigen::Map<const Eigen::VectorXd>(data.t().data(), n);
  block->y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  return block;
}

void require_primary_events(const kernels::ArmTotals& tot) {
  if (tot.t_y1 <= 0.0) throw Error(ErrorCode::DegenerateArm, "no primary events in the treated arm");
  if (tot.c_y1() <= 0.0) throw Error(ErrorCode::DegenerateArm, "no primary events in the control arm");
  if (tot.t_y1 >= tot.t || tot.c_y1() >= tot.control_n())
    throw Error(ErrorCode::DegenerateArm, "every subject in an arm had a primary event");
}

ArmConditionalMeanModel constant_model(int arm, double mean) {
  ArmConditionalMeanModel m;
  m.arm = arm;
  m.kind = ArmConditionalMeanModel::Kind::constant;
  m.arm_mean = mean;
  return m;
}

}  // namespace

std::string_view to_string(Augmentation a) {
  switch (a) {
    case Augmentation::y2: return "y2";
    case Augmentation::w: return "w";
    case Augmentation::y2_and_w: return "y2w";
  }
  return "y2";
}

Augmentation parse_augmentation(std::string_view text) {
  if (text == "y2") return Augmentation::y2;
  if (text == "w") return Augmentation::w;
  if (text == "y2w" || text == "y2_and_w") return Augmentation::y2_and_w;
  throw Error(ErrorCode::InvalidOptions, "augmentation must be y2, w or y2w");
}

EstimateResult estimate_unaug(const Dataset& data, const EstimatorOptions& options) {
  data.require_both_arms();
  const auto tot = kernels::arm_totals(data.t(), data.y1(), data.y2());
  require_primary_events(tot);
  const double p1 = tot.t_y1 / tot.t;
  const double p0 = tot.c_y1() / tot.control_n();
  mest::Vector theta(2);
  theta << std::log(p0), std::log(p1 / p0);

  const GlmStack system({two_arm_block(data, Family::log_binomial, data.y1())});
  const auto report = mest::solve(system, theta, options.solve);
  const mest::Matrix cov = mest::sandwich_covariance(system, theta, options.workers);

  auto result = make_estimate(Method::unaug, theta[1], std::sqrt(cov(1, 1)), options.ci_level);
  result.diagnostics.iterations = report.iterations;
  return result;
}

ArmMeans fit_arm_means(const Dataset& data, Augmentation augmentation, const RegressionSpec* regression) {
  data.require_both_arms();
  const bool use_w = augmentation != Augmentation::y2;
  const bool use_y2 = augmentation != Augmentation::w;
  if (use_w && (regression == nullptr || regression->primary_terms.empty()))
    throw Error(ErrorCode::InvalidOptions, "covariate augmentation needs regression terms");

  const auto t = data.t(), y1 = data.y1(), y2 = data.y2();
  const std::size_t n = data.size();
  std::vector<double> levels(y2.begin(), y2.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  const bool saturated = augmentation == Augmentation::y2 && levels.size() <= 2;

  ArmMeans out;
  out.e1.resize(n);
  out.e0.resize(n);

  std::optional<Design> design;
  if (!saturated) {
    static const std::vector<Term> none;
    design = build_design(data, {.intercept = true, .treatment = false, .y2 = use_y2},
                          use_w ? std::span<const Term>(regression->primary_terms) : std::span<const Term>(none));
  }

  for (int arm : {1, 0}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (static_cast<int>(t[i]) == arm) rows.push_back(i);
    double events = 0.0;
    for (auto i : rows) events += y1[i];
    const double arm_mean = events / static_cast<double>(rows.size());
    auto& pred = arm == 1 ? out.e1 : out.e0;
    ArmConditionalMeanModel model;

    if (saturated) {
      model.arm = arm;
      model.kind = ArmConditionalMeanModel::Kind::saturated;
      model.arm_mean = arm_mean;
      for (double v : levels) {
        double sum = 0.0, count = 0.0;
        for (auto i : rows)
          if (y2[i] == v) {
            sum += y1[i];
            count += 1.0;
          }
        double mean = arm_mean;
        if (count > 0.0)
          mean = sum / count;
        else
          out.warnings.push_back("no subjects with y2=" + std::to_string(static_cast<long long>(v)) +
                                 " in arm " + std::to_string(arm) + "; using the arm mean");
        model.cell_means.emplace_back(v, mean);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto it = std::find_if(model.cell_means.begin(), model.cell_means.end(),
                                     [&](const auto& c) { return c.first == y2[i]; });
        pred[i] = it->second;
      }
    } else {
      std::optional<LogisticFit> fit;
      std::vector<Eigen::Index> keep{0};
      Eigen::MatrixXd xa;
      if (arm_mean > 0.0 && arm_mean < 1.0) {
        const auto ra = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd full(ra, design->x.cols());
        for (Eigen::Index r = 0; r < ra; ++r) full.row(r) = design->x.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]));
        for (Eigen::Index j = 1; j < full.cols(); ++j) {
          const auto col = full.col(j);
          if (col.maxCoeff() - col.minCoeff() > 0.0) keep.push_back(j);
        }
        xa.resize(ra, static_cast<Eigen::Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) xa.col(static_cast<Eigen::Index>(k)) = full.col(keep[k]);
        std::vector<double> ya(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) ya[r] = y1[rows[r]];
        fit = fit_logistic(xa, ya);
      }
      if (!fit) {
        out.warnings.push_back("SeparationFallback: arm " + std::to_string(arm) +
                               " uses its constant event rate");
        model = constant_model(arm, arm_mean);
        std::fill(pred.begin(), pred.end(), arm_mean);
      } else {
        model.arm = arm;
        model.kind = ArmConditionalMeanModel::Kind::logistic;
        model.arm_mean = arm_mean;
        model.coef = fit->coef;
        for (auto j : keep) model.terms.push_back(design->names[static_cast<std::size_t>(j)]);
        for (std::size_t i = 0; i < n; ++i) {
          double eta = 0.0;
          for (std::size_t k = 0; k < keep.size(); ++k)
            eta += fit->coef[static_cast<Eigen::Index>(k)] * design->x(static_cast<Eigen::Index>(i), keep[k]);
          pred[i] = 1.0 / (1.0 + std::exp(-eta));
        }
      }
    }
    (arm == 1 ? out.treated : out.control) = std::move(model);
  }
  return out;
}

EstimateResult estimate_aug(const Dataset& data, Augmentation augmentation, const RegressionSpec* regression,
                            const EstimatorOptions& options) {
  data.require_both_arms();
  const auto tot = kernels::arm_totals(data.t(), data.y1(), data.y2());
  require_primary_events(tot);
  const ArmMeans means = fit_arm_means(data, augmentation, regression);

  const std::size_t n = data.size();
  const auto t = data.t();
  const double pi1 = tot.t / tot.n;
  std::vector<double> centred(n);
  for (std::size_t i = 0; i < n; ++i) centred[i] = t[i] - pi1;
  const double treated_sum = tot.t_y1 - kernels::dot(centred, means.e1);
  const double control_sum = tot.c_y1() + kernels::dot(centred, means.e0);
  if (!(treated_sum > 0.0) || !(control_sum > 0.0))
    throw Error(ErrorCode::NonpositiveAdjustedMean, "augmented arm total is not positive");
  const double p1 = treated_sum / tot.t;
  const double p0 = control_sum / tot.control_n();
  if (p1 >= kMaxBinomialMean || p0 >= kMaxBinomialMean)
    throw Error(ErrorCode::NonpositiveAdjustedMean, "augmented arm mean is not below 1");

  mest::Vector theta(2);
  theta << std::log(p0), std::log(p1 / p0);
  const AugmentedSystem system(std::vector<double>(t.begin(), t.end()),
                               std::vector<double>(data.y1().begin(), data.y1().end()), means.e1, means.e0,
                               pi1);
  const auto report = mest::solve(system, theta, options.solve);
  const mest::Matrix cov = mest::sandwich_covariance(system, theta, options.workers);

  const Method tag = augmentation == Augmentation::y2  ? Method::aug
                     : augmentation == Augmentation::w ? Method::aug_w
                                                       : Method::aug_y2w;
  auto result = make_estimate(tag, theta[1], std::sqrt(cov(1, 1)), options.ci_level);
  result.diagnostics.iterations = report.iterations;
  result.diagnostics.warnings = means.warnings;
  return result;
}

Correlation report_correlation(const Dataset& data) {
  const auto s = kernels::arm_totals(data.t(), data.y1(), data.y2());
  auto pearson = [](double n, double a, double b, double aa, double bb, double ab) {
    if (n < 2.0) return std::numeric_limits<double>::quiet_NaN();
    const double va = aa / n - (a / n) * (a / n);
    const double vb = bb / n - (b / n) * (b / n);
    if (!(va > 0.0) || !(vb > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return (ab / n - (a / n) * (b / n)) / std::sqrt(va * vb);
  };
  Correlation c;
  c.overall = pearson(s.n, s.y1, s.y2, s.y1y1, s.y2y2, s.y1y2);
  if (std::isnan(c.overall)) throw Error(ErrorCode::ZeroVariance, "y1 or y2 is constant");
  c.control = pearson(s.control_n(), s.c_y1(), s.c_y2(), s.y1y1 - s.t_y1y1, s.y2y2 - s.t_y2y2,
                      s.y1y2 - s.t_y1y2);
  return c;
}

}  // namespace ncvax
