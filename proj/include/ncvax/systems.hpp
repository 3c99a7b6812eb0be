#pragma once

// Estimating systems shipped with the estimators.

#include <memory>
#include <vector>

#include "ncvax/mestimation.hpp"

namespace ncvax {

enum class Family {
  /// score (y - p)/(1 - p) x with p = exp(x'theta) < 1: binary outcomes
  log_binomial,
  /// score (y - p) x with p = exp(x'theta): counts
  log_linear,
};

struct GlmBlock {
  Family family = Family::log_binomial;
  Eigen::MatrixXd x;  // n x p, first column is the intercept
  Eigen::VectorXd y;
};

/// Upper bound on exp(linear predictor) for log-binomial blocks.
inline constexpr double kMaxBinomialMean = 1.0 - 1e-10;

/// Independent log-link models over the same subjects, stacked into one
/// system so the sandwich captures cross-block covariance. Parameters are
/// laid out block after block.
class GlmStack final : public mest::EstimatingSystem {
 public:
  explicit GlmStack(std::vector<std::shared_ptr<const GlmBlock>> blocks);

  std::size_t dim() const override { return dim_; }
  std::size_t size() const override { return n_; }
  void score(std::size_t i, const mest::Vector& theta, Eigen::Ref<mest::Vector> out) const override;
  void jacobian(std::size_t i, const mest::Vector& theta, Eigen::Ref<mest::Matrix> out) const override;
  bool admissible(const mest::Vector& theta) const override;
  void accumulate(const mest::Vector& theta, std::size_t begin, std::size_t end,
                  mest::Vector* score_sum, mest::Matrix* jacobian_sum,
                  mest::Matrix* meat_sum) const override;

  std::size_t block_count() const { return blocks_.size(); }
  std::size_t offset(std::size_t block) const { return offsets_[block]; }
  const GlmBlock& block(std::size_t b) const { return *blocks_[b]; }

  /// Intercepts at log(mean outcome), other coefficients zero.
  mest::Vector default_init() const;

  /// Solves each block separately (they share no parameters) and stacks
  /// the solutions; iterations are summed.
  mest::SolveReport solve_blocks(const mest::Vector& init, const mest::SolveOptions& options) const;

  /// Reference per-record loop, bypassing the vectorized accumulate().
  void accumulate_generic(const mest::Vector& theta, std::size_t begin, std::size_t end,
                          mest::Vector* score_sum, mest::Matrix* jacobian_sum,
                          mest::Matrix* meat_sum) const {
    EstimatingSystem::accumulate(theta, begin, end, score_sum, jacobian_sum, meat_sum);
  }

 private:
  std::vector<std::shared_ptr<const GlmBlock>> blocks_;
  std::vector<std::size_t> offsets_;
  std::size_t dim_ = 0;
  std::size_t n_ = 0;
};

/// Two-arm log-binomial score augmented by (T - pi) times the difference of
/// its arm-conditional expectations given the auxiliary variables, with
/// those expectations plugged in as fitted means e1 (treated model) and e0
/// (control model). theta = (intercept, log relative risk).
class AugmentedSystem final : public mest::EstimatingSystem {
 public:
  AugmentedSystem(std::vector<double> t, std::vector<double> y1, std::vector<double> e1,
                  std::vector<double> e0, double pi1);

  std::size_t dim() const override { return 2; }
  std::size_t size() const override { return t_.size(); }
  void score(std::size_t i, const mest::Vector& theta, Eigen::Ref<mest::Vector> out) const override;
  void jacobian(std::size_t i, const mest::Vector& theta, Eigen::Ref<mest::Matrix> out) const override;
  bool admissible(const mest::Vector& theta) const override;

 private:
  std::vector<double> t_, y1_, e1_, e0_;
  double pi1_;
};

}  // namespace ncvax
