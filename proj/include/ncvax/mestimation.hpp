#pragma once

// Estimating-equation machinery: Newton solver with step-halving and the
// sandwich covariance A^{-1} B A^{-T} / n.

#include <Eigen/Dense>

#include <cstddef>

#include "ncvax/error.hpp"

namespace ncvax::mest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A per-subject vector estimating function over a fixed set of records.
/// Records are bound at construction; implementations are immutable.
class EstimatingSystem {
 public:
  virtual ~EstimatingSystem() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t size() const = 0;

  /// Contribution of record i at theta (length dim()).
  virtual void score(std::size_t i, const Vector& theta, Eigen::Ref<Vector> out) const = 0;

  /// d score(i, theta) / d theta, analytic (dim() x dim()).
  virtual void jacobian(std::size_t i, const Vector& theta, Eigen::Ref<Matrix> out) const = 0;

  /// Whether theta lies in the region where every record's score is defined.
  virtual bool admissible(const Vector& theta) const { return theta.allFinite(); }

  /// Sums over records [begin, end) of score, jacobian and score outer
  /// products (meat). Null outputs are skipped. The default loops over
  /// score()/jacobian(); systems with vectorizable structure override it.
  virtual void accumulate(const Vector& theta, std::size_t begin, std::size_t end,
                          Vector* score_sum, Matrix* jacobian_sum, Matrix* meat_sum) const;
};

struct Totals {
  Vector score;
  Matrix jacobian;
  Matrix meat;
};

/// Record totals; with workers > 1 the records are split into contiguous
/// chunks summed on separate threads and combined in chunk order.
Totals totals(const EstimatingSystem& system, const Vector& theta, bool want_jacobian,
              bool want_meat, int workers = 1);

struct SolveOptions {
  double relative_tolerance = 1e-10;  // times n
  double absolute_tolerance = 1e-8;
  int max_iterations = 100;
  int max_halvings = 30;
  int workers = 1;
};

struct SolveReport {
  Vector theta_hat;
  int iterations = 0;
  double final_score_norm = 0.0;  // max-norm of the summed score
  bool converged = false;
};

class SolveError : public Error {
 public:
  SolveError(ErrorCode code, const std::string& message, SolveReport report)
      : Error(code, message), report_(std::move(report)) {}
  const SolveReport& report() const noexcept { return report_; }

 private:
  SolveReport report_;
};

/// Score tolerance actually applied for n records.
double score_tolerance(const SolveOptions& options, std::size_t n);

/// Newton iterations from `init`. A step is halved (up to max_halvings
/// times) while it leaves the admissible region or fails to decrease the
/// score norm. Throws SolveError with code InadmissibleInit,
/// SingularJacobian or NonConvergence.
SolveReport solve(const EstimatingSystem& system, const Vector& init, const SolveOptions& options = {});

/// A^{-1} B A^{-T} / n with A = -sum jacobian / n, B = sum score score^T / n.
/// Throws Error(SingularBread) when A is not invertible.
Matrix sandwich_covariance(const EstimatingSystem& system, const Vector& theta_hat, int workers = 1);

/// c^T cov c. Throws Error(DimensionMismatch).
double contrast_variance(const Matrix& cov, const Vector& c);

}  // namespace ncvax::mest
