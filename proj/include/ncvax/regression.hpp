#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ncvax/core.hpp"

namespace ncvax {

enum class Transform { linear, square, categorical };

/// One regressor built from a covariate. `linear` on a categorical
/// covariate expands to level indicators, same as `categorical`.
struct Term {
  std::string covariate;
  Transform transform = Transform::linear;

  friend bool operator==(const Term&, const Term&) = default;
};

/// Covariate parts of the primary (q*) and negative-control (s*) log-linear
/// models. Intercept and treatment columns are always added.
struct RegressionSpec {
  std::vector<Term> primary_terms;
  std::vector<Term> secondary_terms;
};

/// "age+age^2+C(site)": bare name is linear, name^2 squares, C(name)
/// forces level indicators.
std::vector<Term> parse_terms(std::string_view text);

/// "primary=age+age^2+site,secondary=age+site". A missing side copies the
/// other one.
RegressionSpec parse_regression_spec(std::string_view text);

std::string to_string(const std::vector<Term>& terms);

/// Column-major design with named columns. Numeric term columns are
/// centred and scaled to unit SD; this reparametrizes the covariate
/// coefficients only, never the intercept-free treatment contrast.
struct Design {
  Eigen::MatrixXd x;
  std::vector<std::string> names;
};

struct DesignColumns {
  bool intercept = true;
  bool treatment = false;
  bool y2 = false;
};

Design build_design(const Dataset& data, DesignColumns fixed, std::span<const Term> terms);

/// Throws RankDeficientDesign naming `what` if x does not have full column rank.
void require_full_rank(const Design& design, std::string_view what);

struct LogisticFit {
  Eigen::VectorXd coef;
  int iterations = 0;
};

/// Maximum-likelihood logistic regression by Newton-Raphson. Returns
/// nullopt on (quasi-)separation or non-convergence.
std::optional<LogisticFit> fit_logistic(const Eigen::MatrixXd& x, std::span<const double> y,
                                        int max_iterations = 50);

}  // namespace ncvax
