#include <algorithm>
#include <cmath>
#include <numeric>

#include "ncvax/kernels.hpp"
#include "ncvax/regression.hpp"

namespace ncvax {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

void standardize(Eigen::Ref<Eigen::VectorXd> col) {
  const double n = static_cast<double>(col.size());
  const double mean = col.sum() / n;
  col.array() -= mean;
  const double sd = std::sqrt(col.squaredNorm() / n);
  if (sd > 0.0) col /= sd;
}

}  // namespace

std::vector<Term> parse_terms(std::string_view text) {
  std::vector<Term> out;
  text = trim(text);
  if (text.empty() || text == "1") return out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t plus = text.find('+', pos);
    const std::string_view raw = trim(text.substr(pos, plus == std::string_view::npos ? std::string_view::npos : plus - pos));
    if (raw.empty()) throw Error(ErrorCode::InvalidOptions, "empty term in '" + std::string(text) + "'");
    Term term;
    if (raw.size() > 3 && raw.substr(0, 2) == "C(" && raw.back() == ')') {
      term.covariate = std::string(trim(raw.substr(2, raw.size() - 3)));
      term.transform = Transform::categorical;
    } else if (raw.size() > 2 && raw.substr(raw.size() - 2) == "^2") {
      term.covariate = std::string(trim(raw.substr(0, raw.size() - 2)));
      term.transform = Transform::square;
    } else {
      term.covariate = std::string(raw);
    }
    if (term.covariate.empty()) throw Error(ErrorCode::InvalidOptions, "bad term '" + std::string(raw) + "'");
    out.push_back(std::move(term));
    if (plus == std::string_view::npos) break;
    pos = plus + 1;
  }
  return out;
}

RegressionSpec parse_regression_spec(std::string_view text) {
  RegressionSpec spec;
  bool have_primary = false, have_secondary = false;
  std::size_t pos = 0;
  text = trim(text);
  while (pos < text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string_view part =
        trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    const std::size_t eq = part.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::InvalidOptions, "expected primary=... or secondary=..., got '" + std::string(part) + "'");
    const std::string_view side = trim(part.substr(0, eq));
    auto terms = parse_terms(part.substr(eq + 1));
    if (side == "primary") {
      spec.primary_terms = std::move(terms);
      have_primary = true;
    } else if (side == "secondary") {
      spec.secondary_terms = std::move(terms);
      have_secondary = true;
    } else {
      throw Error(ErrorCode::InvalidOptions, "unknown regression side '" + std::string(side) + "'");
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (have_primary && !have_secondary) spec.secondary_terms = spec.primary_terms;
  if (have_secondary && !have_primary) spec.primary_terms = spec.secondary_terms;
  return spec;
}

std::string to_string(const std::vector<Term>& terms) {
  if (terms.empty()) return "1";
  std::string out;
  for (const auto& t : terms) {
    if (!out.empty()) out += "+";
    switch (t.transform) {
      case Transform::linear: out += t.covariate; break;
      case Transform::square: out += t.covariate + "^2"; break;
      case Transform::categorical: out += "C(" + t.covariate + ")"; break;
    }
  }
  return out;
}

Design build_design(const Dataset& data, DesignColumns fixed, std::span<const Term> terms) {
  const auto n = static_cast<Eigen::Index>(data.size());
  std::vector<Eigen::VectorXd> cols;
  Design d;
  auto add = [&](std::string name, Eigen::VectorXd col) {
    d.names.push_back(std::move(name));
    cols.push_back(std::move(col));
  };
  if (fixed.intercept) add("(Intercept)", Eigen::VectorXd::Ones(n));
  if (fixed.treatment) add("t", Eigen::Map<const Eigen::VectorXd>(data.t().data(), n));
  if (fixed.y2) {
    Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(data.y2().data(), n);
    standardize(c);
    add("y2", std::move(c));
  }
  for (const auto& term : terms) {
    const auto& cov = data.covariate(term.covariate);
    const bool indicators = cov.kind == CovariateKind::categorical;
    if (term.transform == Transform::categorical && !indicators)
      throw Error(ErrorCode::InvalidOptions, "C(" + term.covariate + ") needs a categorical covariate");
    if (term.transform == Transform::square && indicators)
      throw Error(ErrorCode::InvalidOptions, term.covariate + "^2 needs a numeric covariate");
    if (indicators) {
      for (std::size_t level = 1; level < cov.levels.size(); ++level) {
        Eigen::VectorXd c(n);
        for (Eigen::Index i = 0; i < n; ++i)
          c[i] = cov.codes[static_cast<std::size_t>(i)] == static_cast<int>(level) ? 1.0 : 0.0;
        add(cov.name + "[" + cov.levels[level] + "]", std::move(c));
      }
    } else {
      Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(cov.values.data(), n);
      if (term.transform == Transform::square) c = c.array().square();
      standardize(c);
      add(term.transform == Transform::square ? cov.name + "^2" : cov.name, std::move(c));
    }
  }
  d.x.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) d.x.col(static_cast<Eigen::Index>(j)) = cols[j];
  return d;
}

void require_full_rank(const Design& design, std::string_view what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.x);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.x.cols())
    throw Error(ErrorCode::RankDeficientDesign,
                std::string(what) + " design has rank " + std::to_string(qr.rank()) + " < " +
                    std::to_string(design.x.cols()) + " columns");
}

std::optional<LogisticFit> fit_logistic(const Eigen::MatrixXd& x, std::span<const double> y,
                                        int max_iterations) {
  const auto n = x.rows(), p = x.cols();
  if (static_cast<Eigen::Index>(y.size()) != n) throw Error(ErrorCode::DimensionMismatch, "logistic: y length");
  const auto un = static_cast<std::size_t>(n), up = static_cast<std::size_t>(p);
  LogisticFit fit;
  fit.coef = Eigen::VectorXd::Zero(p);
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  if (ybar <= 0.0 || ybar >= 1.0) return std::nullopt;
  fit.coef[0] = std::log(ybar / (1.0 - ybar));

  std::vector<double> resid(un), weight(un), gram(up * up);
  const std::span<const double> xs(x.data(), un * up);
  for (int it = 1; it <= max_iterations; ++it) {
    const Eigen::VectorXd eta = x * fit.coef;
    if (eta.cwiseAbs().maxCoeff() > 30.0) return std::nullopt;
    for (std::size_t i = 0; i < un; ++i) {
      const double prob = 1.0 / (1.0 + std::exp(-eta[static_cast<Eigen::Index>(i)]));
      resid[i] = y[i] - prob;
      weight[i] = prob * (1.0 - prob);
    }
    Eigen::VectorXd grad(p);
    for (std::size_t j = 0; j < up; ++j) grad[static_cast<Eigen::Index>(j)] = kernels::dot(xs.subspan(j * un, un), resid);
    kernels::weighted_gram(xs, un, up, weight, gram);
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> h(gram.data(), p, p);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
    const Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite()) return std::nullopt;
    fit.coef += step;
    fit.iterations = it;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10 * (1.0 + fit.coef.lpNorm<Eigen::Infinity>())) {
      if ((x * fit.coef).cwiseAbs().maxCoeff() > 30.0) return std::nullopt;
      return fit;
    }
  }
  return std::nullopt;
}

}  // namespace ncvax
