#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "ncvax/core.hpp"

namespace ncvax {
namespace {

[[noreturn]] void violation(std::size_t row, const std::string& reason) {
  throw Error(ErrorCode::InvariantViolation, "row " + std::to_string(row + 1) + ": " + reason);
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::UnbinnedNumericKey: return "UnbinnedNumericKey";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::InvalidOptions: return "InvalidOptions";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::InadmissibleInit: return "InadmissibleInit";
    case ErrorCode::SingularBread: return "SingularBread";
    case ErrorCode::DegenerateArm: return "DegenerateArm";
    case ErrorCode::DegenerateNegativeControl: return "DegenerateNegativeControl";
    case ErrorCode::NonpositiveAdjustedMean: return "NonpositiveAdjustedMean";
    case ErrorCode::AllStrataDegenerate: return "AllStrataDegenerate";
    case ErrorCode::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    case ErrorCode::AllRepsFailed: return "AllRepsFailed";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn:
    case ErrorCode::ParseError:
    case ErrorCode::InvariantViolation:
    case ErrorCode::UnbinnedNumericKey:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidScenario:
    case ErrorCode::InvalidOptions:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::MalformedInput:
      return true;
    default:
      return false;
  }
}

Dataset::Dataset(DatasetColumns columns) : cols_(std::move(columns)) {
  const std::size_t n = cols_.t.size();
  if (n == 0) throw Error(ErrorCode::InvariantViolation, "dataset has no subjects");
  if (cols_.y1.size() != n || cols_.y2.size() != n)
    throw Error(ErrorCode::InvariantViolation, "t, y1 and y2 columns differ in length");
  if (!cols_.ids.empty() && cols_.ids.size() != n)
    throw Error(ErrorCode::InvariantViolation, "id column length differs from subject count");

  for (std::size_t i = 0; i < n; ++i) {
    const double t = cols_.t[i], y1 = cols_.y1[i], y2 = cols_.y2[i];
    if (t != 0.0 && t != 1.0) violation(i, "t must be 0 or 1");
    if (y1 != 0.0 && y1 != 1.0) violation(i, "y1 must be 0 or 1");
    if (!std::isfinite(y2) || y2 < 0.0) violation(i, "y2 must be a nonnegative integer");
    if (y2 != std::floor(y2)) violation(i, "y2 must be an integer count");
    if (t == 1.0) ++treated_;
  }

  std::set<std::string> seen;
  for (const auto& col : cols_.covariates) {
    if (col.name.empty()) throw Error(ErrorCode::InvariantViolation, "covariate with empty name");
    if (!seen.insert(col.name).second)
      throw Error(ErrorCode::InvariantViolation, "duplicate covariate '" + col.name + "'");
    if (col.size() != n)
      throw Error(ErrorCode::InvariantViolation,
                  "covariate '" + col.name + "' length differs from subject count");
    if (col.kind == CovariateKind::numeric) {
      for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(col.values[i]))
          violation(i, "covariate '" + col.name + "' is missing or not finite");
    } else {
      const int levels = static_cast<int>(col.levels.size());
      for (std::size_t i = 0; i < n; ++i)
        if (col.codes[i] < 0 || col.codes[i] >= levels)
          violation(i, "covariate '" + col.name + "' has no level");
    }
    schema_.emplace_back(col.name, col.kind);
  }
}

Dataset Dataset::from_records(const CovariateSchema& schema,
                              const std::vector<SubjectRecord>& records) {
  DatasetColumns cols;
  const std::size_t n = records.size();
  cols.ids.reserve(n);
  cols.t.reserve(n);
  cols.y1.reserve(n);
  cols.y2.reserve(n);
  for (const auto& [name, kind] : schema) {
    CovariateColumn c;
    c.name = name;
    c.kind = kind;
    cols.covariates.push_back(std::move(c));
  }
  std::vector<std::map<std::string, int>> level_index(schema.size());

  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    if (r.t != 0 && r.t != 1) violation(i, "t must be 0 or 1");
    if (r.y1 != 0 && r.y1 != 1) violation(i, "y1 must be 0 or 1");
    if (r.y2 < 0) violation(i, "y2 must be a nonnegative integer");
    cols.ids.push_back(r.id);
    cols.t.push_back(r.t);
    cols.y1.push_back(r.y1);
    cols.y2.push_back(static_cast<double>(r.y2));
    if (r.covariates.size() != schema.size())
      violation(i, "covariates do not match the schema");
    for (std::size_t k = 0; k < schema.size(); ++k) {
      auto& col = cols.covariates[k];
      auto it = r.covariates.find(col.name);
      if (it == r.covariates.end()) violation(i, "missing covariate '" + col.name + "'");
      if (col.kind == CovariateKind::numeric) {
        const double* v = std::get_if<double>(&it->second);
        if (v == nullptr) violation(i, "covariate '" + col.name + "' must be numeric");
        col.values.push_back(*v);
      } else {
        const std::string* v = std::get_if<std::string>(&it->second);
        if (v == nullptr) violation(i, "covariate '" + col.name + "' must be categorical");
        auto [pos, inserted] =
            level_index[k].try_emplace(*v, static_cast<int>(col.levels.size()));
        if (inserted) col.levels.push_back(*v);
        col.codes.push_back(pos->second);
      }
    }
  }
  return Dataset(std::move(cols));
}

bool Dataset::has_covariate(const std::string& name) const {
  return std::any_of(cols_.covariates.begin(), cols_.covariates.end(),
                     [&](const CovariateColumn& c) { return c.name == name; });
}

const CovariateColumn& Dataset::covariate(const std::string& name) const {
  for (const auto& c : cols_.covariates)
    if (c.name == name) return c;
  throw Error(ErrorCode::InvalidOptions, "unknown covariate '" + name + "'");
}

std::string Dataset::id(std::size_t i) const {
  return cols_.ids.empty() ? std::to_string(i + 1) : cols_.ids[i];
}

SubjectRecord Dataset::record(std::size_t i) const {
  SubjectRecord r;
  r.id = id(i);
  r.t = static_cast<int>(cols_.t[i]);
  r.y1 = static_cast<int>(cols_.y1[i]);
  r.y2 = static_cast<std::int64_t>(cols_.y2[i]);
  for (const auto& c : cols_.covariates) {
    if (c.kind == CovariateKind::numeric)
      r.covariates.emplace(c.name, c.values[i]);
    else
      r.covariates.emplace(c.name, c.levels[static_cast<std::size_t>(c.codes[i])]);
  }
  return r;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  DatasetColumns out;
  const std::size_t m = rows.size();
  if (!cols_.ids.empty()) out.ids.reserve(m);
  out.t.reserve(m);
  out.y1.reserve(m);
  out.y2.reserve(m);
  for (std::size_t r : rows) {
    if (r >= size()) throw Error(ErrorCode::DimensionMismatch, "subset row out of range");
    if (!cols_.ids.empty()) out.ids.push_back(cols_.ids[r]);
    out.t.push_back(cols_.t[r]);
    out.y1.push_back(cols_.y1[r]);
    out.y2.push_back(cols_.y2[r]);
  }
  for (const auto& c : cols_.covariates) {
    CovariateColumn nc;
    nc.name = c.name;
    nc.kind = c.kind;
    nc.levels = c.levels;
    if (c.kind == CovariateKind::numeric) {
      nc.values.reserve(m);
      for (std::size_t r : rows) nc.values.push_back(c.values[r]);
    } else {
      nc.codes.reserve(m);
      for (std::size_t r : rows) nc.codes.push_back(c.codes[r]);
    }
    out.covariates.push_back(std::move(nc));
  }
  return Dataset(std::move(out));
}

void Dataset::require_both_arms() const {
  if (treated_ == 0 || treated_ == size())
    throw Error(ErrorCode::DegenerateArm, "both treatment arms must contain subjects");
}

}  // namespace ncvax
