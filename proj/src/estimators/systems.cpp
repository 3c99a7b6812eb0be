#include <cmath>

#include "ncvax/kernels.hpp"
#include "ncvax/systems.hpp"

namespace ncvax {
namespace {

struct Terms {
  double r;  // score multiplier
  double d;  // d r / d eta
};

inline Terms glm_terms(Family family, double y, double eta) {
  const double p = std::exp(eta);
  if (family == Family::log_linear) return {y - p, -p};
  const double q = 1.0 - p;
  return {(y - p) / q, p * (y - 1.0) / (q * q)};
}

// (Y - p)/(1 - p) and its eta-derivative for a plugged-in conditional mean.
inline Terms binomial_terms(double y, double p) {
  const double q = 1.0 - p;
  return {(y - p) / q, p * (y - 1.0) / (q * q)};
}

std::span<const double> column(const Eigen::MatrixXd& x, Eigen::Index j, std::size_t begin,
                               std::size_t end) {
  return {x.data() + j * x.rows() + static_cast<Eigen::Index>(begin), end - begin};
}

}  // namespace

GlmStack::GlmStack(std::vector<std::shared_ptr<const GlmBlock>> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw Error(ErrorCode::InvalidOptions, "GlmStack needs at least one block");
  n_ = static_cast<std::size_t>(blocks_.front()->x.rows());
  for (const auto& b : blocks_) {
    if (static_cast<std::size_t>(b->x.rows()) != n_ || b->y.size() != b->x.rows())
      throw Error(ErrorCode::DimensionMismatch, "GlmStack blocks must share the same subjects");
    offsets_.push_back(dim_);
    dim_ += static_cast<std::size_t>(b->x.cols());
  }
}

void GlmStack::score(std::size_t i, const mest::Vector& theta, Eigen::Ref<mest::Vector> out) const {
  const auto row = static_cast<Eigen::Index>(i);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = *blocks_[b];
    const auto off = static_cast<Eigen::Index>(offsets_[b]);
    const auto p = blk.x.cols();
    const double eta = blk.x.row(row).dot(theta.segment(off, p));
    out.segment(off, p) = glm_terms(blk.family, blk.y[row], eta).r * blk.x.row(row).transpose();
  }
}

void GlmStack::jacobian(std::size_t i, const mest::Vector& theta, Eigen::Ref<mest::Matrix> out) const {
  out.setZero();
  const auto row = static_cast<Eigen::Index>(i);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = *blocks_[b];
    const auto off = static_cast<Eigen::Index>(offsets_[b]);
    const auto p = blk.x.cols();
    const double eta = blk.x.row(row).dot(theta.segment(off, p));
    const double d = glm_terms(blk.family, blk.y[row], eta).d;
    out.block(off, off, p, p) = d * blk.x.row(row).transpose() * blk.x.row(row);
  }
}

bool GlmStack::admissible(const mest::Vector& theta) const {
  if (theta.size() != static_cast<Eigen::Index>(dim_) || !theta.allFinite()) return false;
  const double log_max = std::log(kMaxBinomialMean);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = *blocks_[b];
    const Eigen::VectorXd eta =
        blk.x * theta.segment(static_cast<Eigen::Index>(offsets_[b]), blk.x.cols());
    if (!eta.allFinite()) return false;
    if (blk.family == Family::log_binomial && eta.maxCoeff() >= log_max) return false;
    if (blk.family == Family::log_linear && eta.maxCoeff() > 700.0) return false;
  }
  return true;
}

void GlmStack::accumulate(const mest::Vector& theta, std::size_t begin, std::size_t end,
                          mest::Vector* score_sum, mest::Matrix* jacobian_sum,
                          mest::Matrix* meat_sum) const {
  if (end <= begin) return;
  const std::size_t m = end - begin;
  const std::size_t nb = blocks_.size();
  std::vector<std::vector<double>> r(nb, std::vector<double>(m)), d(nb, std::vector<double>(m));
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& blk = *blocks_[b];
    const auto p = blk.x.cols();
    const Eigen::VectorXd eta = blk.x.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(m)) *
                                theta.segment(static_cast<Eigen::Index>(offsets_[b]), p);
    for (std::size_t i = 0; i < m; ++i) {
      const auto t = glm_terms(blk.family, blk.y[static_cast<Eigen::Index>(begin + i)], eta[static_cast<Eigen::Index>(i)]);
      r[b][i] = t.r;
      d[b][i] = t.d;
    }
  }

  for (std::size_t b = 0; b < nb; ++b) {
    const auto& blk = *blocks_[b];
    const auto off = static_cast<Eigen::Index>(offsets_[b]);
    const auto p = blk.x.cols();
    if (score_sum != nullptr)
      for (Eigen::Index j = 0; j < p; ++j)
        (*score_sum)[off + j] += kernels::dot(column(blk.x, j, begin, end), r[b]);
    if (jacobian_sum != nullptr)
      for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index k = j; k < p; ++k) {
          const double v = kernels::dot3(column(blk.x, j, begin, end), d[b], column(blk.x, k, begin, end));
          (*jacobian_sum)(off + j, off + k) += v;
          if (k != j) (*jacobian_sum)(off + k, off + j) += v;
        }
  }

  if (meat_sum != nullptr) {
    std::vector<double> w(m);
    for (std::size_t a = 0; a < nb; ++a)
      for (std::size_t b = a; b < nb; ++b) {
        for (std::size_t i = 0; i < m; ++i) w[i] = r[a][i] * r[b][i];
        const auto& xa = blocks_[a]->x;
        const auto& xb = blocks_[b]->x;
        const auto oa = static_cast<Eigen::Index>(offsets_[a]);
        const auto ob = static_cast<Eigen::Index>(offsets_[b]);
        for (Eigen::Index j = 0; j < xa.cols(); ++j)
          for (Eigen::Index k = (a == b ? j : 0); k < xb.cols(); ++k) {
            const double v = kernels::dot3(column(xa, j, begin, end), w, column(xb, k, begin, end));
            (*meat_sum)(oa + j, ob + k) += v;
            if (a != b || k != j) (*meat_sum)(ob + k, oa + j) += v;
          }
      }
  }
}

mest::Vector GlmStack::default_init() const {
  mest::Vector init = mest::Vector::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const double mean = blocks_[b]->y.mean();
    init[static_cast<Eigen::Index>(offsets_[b])] = std::log(mean);
  }
  return init;
}

mest::SolveReport GlmStack::solve_blocks(const mest::Vector& init, const mest::SolveOptions& options) const {
  mest::SolveReport out;
  out.theta_hat = init;
  out.converged = true;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const GlmStack single({blocks_[b]});
    const auto off = static_cast<Eigen::Index>(offsets_[b]);
    const auto p = blocks_[b]->x.cols();
    mest::SolveReport part;
    try {
      part = mest::solve(single, init.segment(off, p), options);
    } catch (const mest::SolveError& e) {
      out.iterations += e.report().iterations;
      out.theta_hat.segment(off, p) = e.report().theta_hat;
      out.converged = false;
      throw mest::SolveError(e.code(), std::string("block ") + std::to_string(b) + ": " + e.what(), out);
    }
    out.theta_hat.segment(off, p) = part.theta_hat;
    out.iterations += part.iterations;
    out.final_score_norm = std::max(out.final_score_norm, part.final_score_norm);
  }
  return out;
}

AugmentedSystem::AugmentedSystem(std::vector<double> t, std::vector<double> y1, std::vector<double> e1,
                                 std::vector<double> e0, double pi1)
    : t_(std::move(t)), y1_(std::move(y1)), e1_(std::move(e1)), e0_(std::move(e0)), pi1_(pi1) {
  const std::size_t n = t_.size();
  if (y1_.size() != n || e1_.size() != n || e0_.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "AugmentedSystem columns differ in length");
}

void AugmentedSystem::score(std::size_t i, const mest::Vector& theta, Eigen::Ref<mest::Vector> out) const {
  const double t = t_[i];
  const double p_t = std::exp(theta[0] + theta[1] * t);
  const double p_treated = std::exp(theta[0] + theta[1]);
  const double p_control = std::exp(theta[0]);
  const double u = binomial_terms(y1_[i], p_t).r;
  const double a1 = binomial_terms(e1_[i], p_treated).r;
  const double a0 = binomial_terms(e0_[i], p_control).r;
  const double c = t - pi1_;
  out[0] = u - c * (a1 - a0);
  out[1] = t * u - c * a1;
}

void AugmentedSystem::jacobian(std::size_t i, const mest::Vector& theta, Eigen::Ref<mest::Matrix> out) const {
  const double t = t_[i];
  const double p_t = std::exp(theta[0] + theta[1] * t);
  const double p_treated = std::exp(theta[0] + theta[1]);
  const double p_control = std::exp(theta[0]);
  const double du = binomial_terms(y1_[i], p_t).d;
  const double da1 = binomial_terms(e1_[i], p_treated).d;
  const double da0 = binomial_terms(e0_[i], p_control).d;
  const double c = t - pi1_;
  // d/d(mu, beta): U1 moves with (1, t), the treated expectation with (1, 1),
  // the control expectation with (1, 0).
  out(0, 0) = du - c * (da1 - da0);
  out(0, 1) = du * t - c * da1;
  out(1, 0) = t * du - c * da1;
  out(1, 1) = t * du * t - c * da1;
}

bool AugmentedSystem::admissible(const mest::Vector& theta) const {
  if (theta.size() != 2 || !theta.allFinite()) return false;
  const double log_max = std::log(kMaxBinomialMean);
  return theta[0] < log_max && theta[0] + theta[1] < log_max;
}

}  // namespace ncvax
