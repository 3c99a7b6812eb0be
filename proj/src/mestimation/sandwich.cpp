#include "ncvax/mestimation.hpp"

namespace ncvax::mest {

Matrix sandwich_covariance(const EstimatingSystem& system, const Vector& theta_hat, int workers) {
  const double n = static_cast<double>(system.size());
  const Totals tot = totals(system, theta_hat, true, true, workers);
  const Matrix bread = -tot.jacobian / n;
  const Matrix meat = tot.meat / n;
  Eigen::FullPivLU<Matrix> lu(bread);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularBread, "bread matrix is not invertible");
  const Matrix inv = lu.inverse();
  Matrix cov = inv * meat * inv.transpose() / n;
  return 0.5 * (cov + cov.transpose());
}

double contrast_variance(const Matrix& cov, const Vector& c) {
  if (cov.rows() != cov.cols() || cov.rows() != c.size())
    throw Error(ErrorCode::DimensionMismatch, "contrast length does not match covariance");
  return c.dot(cov * c);
}

}  // namespace ncvax::mest
