#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "ncvax/mestimation.hpp"

namespace ncvax::mest {

void EstimatingSystem::accumulate(const Vector& theta, std::size_t begin, std::size_t end,
                                  Vector* score_sum, Matrix* jacobian_sum, Matrix* meat_sum) const {
  const auto p = static_cast<Eigen::Index>(dim());
  Vector u(p);
  Matrix j(p, p);
  for (std::size_t i = begin; i < end; ++i) {
    if (score_sum != nullptr || meat_sum != nullptr) {
      score(i, theta, u);
      if (score_sum != nullptr) *score_sum += u;
      if (meat_sum != nullptr) meat_sum->noalias() += u * u.transpose();
    }
    if (jacobian_sum != nullptr) {
      jacobian(i, theta, j);
      *jacobian_sum += j;
    }
  }
}

Totals totals(const EstimatingSystem& system, const Vector& theta, bool want_jacobian,
              bool want_meat, int workers) {
  const auto p = static_cast<Eigen::Index>(system.dim());
  const std::size_t n = system.size();
  const std::size_t chunks =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(n, 1));

  std::vector<Totals> parts(chunks);
  for (auto& part : parts) {
    part.score = Vector::Zero(p);
    if (want_jacobian) part.jacobian = Matrix::Zero(p, p);
    if (want_meat) part.meat = Matrix::Zero(p, p);
  }
  auto run = [&](std::size_t c) {
    const std::size_t begin = n * c / chunks, end = n * (c + 1) / chunks;
    auto& part = parts[c];
    system.accumulate(theta, begin, end, &part.score, want_jacobian ? &part.jacobian : nullptr,
                      want_meat ? &part.meat : nullptr);
  };
  if (chunks == 1) {
    run(0);
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(chunks - 1);
    for (std::size_t c = 1; c < chunks; ++c) threads.emplace_back(run, c);
    run(0);
  }

  Totals out = std::move(parts[0]);
  for (std::size_t c = 1; c < chunks; ++c) {
    out.score += parts[c].score;
    if (want_jacobian) out.jacobian += parts[c].jacobian;
    if (want_meat) out.meat += parts[c].meat;
  }
  return out;
}

double score_tolerance(const SolveOptions& options, std::size_t n) {
  return std::max(options.relative_tolerance * static_cast<double>(n), options.absolute_tolerance);
}

SolveReport solve(const EstimatingSystem& system, const Vector& init, const SolveOptions& options) {
  SolveReport report;
  report.theta_hat = init;
  if (init.size() != static_cast<Eigen::Index>(system.dim()))
    throw SolveError(ErrorCode::DimensionMismatch, "initial value has the wrong length", report);
  if (!system.admissible(init))
    throw SolveError(ErrorCode::InadmissibleInit, "initial value is outside the admissible region",
                     report);

  const double tol = score_tolerance(options, system.size());
  Vector theta = init;
  Totals tot = totals(system, theta, true, false, options.workers);
  double norm = tot.score.lpNorm<Eigen::Infinity>();
  report.final_score_norm = norm;
  if (!std::isfinite(norm))
    throw SolveError(ErrorCode::InadmissibleInit, "score is not finite at the initial value", report);

  while (norm > tol) {
    if (report.iterations >= options.max_iterations)
      throw SolveError(ErrorCode::NonConvergence,
                       "no convergence after " + std::to_string(report.iterations) + " iterations",
                       report);
    Eigen::FullPivLU<Matrix> lu(tot.jacobian);
    if (!lu.isInvertible())
      throw SolveError(ErrorCode::SingularJacobian, "jacobian is singular", report);
    const Vector step = -lu.solve(tot.score);
    if (!step.allFinite()) throw SolveError(ErrorCode::SingularJacobian, "Newton step is not finite", report);

    const double current = tot.score.squaredNorm();
    double scale = 1.0;
    bool accepted = false;
    Vector candidate;
    for (int h = 0; h <= options.max_halvings; ++h, scale *= 0.5) {
      candidate = theta + scale * step;
      if (!system.admissible(candidate)) continue;
      const Totals trial = totals(system, candidate, false, false, options.workers);
      const double trial_norm = trial.score.squaredNorm();
      if (std::isfinite(trial_norm) && trial_norm < current) {
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw SolveError(ErrorCode::NonConvergence,
                       "step-halving failed to reduce the score norm", report);

    theta = candidate;
    ++report.iterations;
    tot = totals(system, theta, true, false, options.workers);
    norm = tot.score.lpNorm<Eigen::Infinity>();
    report.theta_hat = theta;
    report.final_score_norm = norm;
  }
  report.theta_hat = theta;
  report.converged = true;
  return report;
}

}  // namespace ncvax::mest
