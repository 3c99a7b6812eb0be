#pragma once

// Domain types shared by every module: subject data, stratification,
// estimate results, and CSV ingestion.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ncvax/error.hpp"

namespace ncvax {

enum class CovariateKind { categorical, numeric };

using CovariateValue = std::variant<std::string, double>;

/// Ordered covariate name -> kind. Order is the column order used when a
/// dataset is written back out.
using CovariateSchema = std::vector<std::pair<std::string, CovariateKind>>;

struct SubjectRecord {
  std::string id;
  int t = 0;
  int y1 = 0;
  std::int64_t y2 = 0;
  std::map<std::string, CovariateValue> covariates;

  friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

/// One covariate stored column-wise. Categorical columns keep integer codes
/// into `levels`; levels are kept in first-observed order unless the
/// producer registered them up front.
struct CovariateColumn {
  std::string name;
  CovariateKind kind = CovariateKind::numeric;
  std::vector<double> values;       // numeric only
  std::vector<int> codes;           // categorical only
  std::vector<std::string> levels;  // categorical only

  std::size_t size() const {
    return kind == CovariateKind::numeric ? values.size() : codes.size();
  }
};

/// Column storage handed to Dataset. t and y1 hold 0/1, y2 holds
/// nonnegative integers; all as doubles so arithmetic kernels can read
/// them directly.
struct DatasetColumns {
  std::vector<std::string> ids;  // may be empty: ids default to 1-based row numbers
  std::vector<double> t;
  std::vector<double> y1;
  std::vector<double> y2;
  std::vector<CovariateColumn> covariates;
};

/// Immutable, validated cohort.
class Dataset {
 public:
  /// Validates every invariant; throws Error(InvariantViolation) naming the
  /// first offending row.
  explicit Dataset(DatasetColumns columns);

  static Dataset from_records(const CovariateSchema& schema,
                              const std::vector<SubjectRecord>& records);

  std::size_t size() const { return cols_.t.size(); }
  std::span<const double> t() const { return cols_.t; }
  std::span<const double> y1() const { return cols_.y1; }
  std::span<const double> y2() const { return cols_.y2; }

  const CovariateSchema& schema() const { return schema_; }
  bool has_covariate(const std::string& name) const;
  const CovariateColumn& covariate(const std::string& name) const;
  const std::vector<CovariateColumn>& covariates() const { return cols_.covariates; }

  std::string id(std::size_t i) const;
  SubjectRecord record(std::size_t i) const;

  std::size_t treated_count() const { return treated_; }
  std::size_t control_count() const { return size() - treated_; }

  /// Rows picked by `rows`, in that order (duplicates allowed). Categorical
  /// level tables are carried over unchanged.
  Dataset subset(std::span<const std::size_t> rows) const;

  /// Throws DegenerateArm unless both arms are nonempty.
  void require_both_arms() const;

 private:
  DatasetColumns cols_;
  CovariateSchema schema_;
  std::size_t treated_ = 0;
};

// ---------------------------------------------------------------------------
// Stratification

struct StratumSpec {
  std::vector<std::string> keys;
  std::map<std::string, std::vector<double>> numeric_cuts;
};

struct StratumCounts {
  std::string label;
  std::int64_t x1 = 0;  // treated primary events
  std::int64_t z1 = 0;  // control primary events
  std::int64_t x2 = 0;  // treated negative-control count sum
  std::int64_t z2 = 0;  // control negative-control count sum
  std::int64_t n1 = 0;  // treated subjects
  std::int64_t n0 = 0;  // control subjects
  std::int64_t n = 0;

  friend bool operator==(const StratumCounts&, const StratumCounts&) = default;
};

struct StratumAssignment {
  std::vector<StratumCounts> strata;
  std::vector<std::uint32_t> index;  // per subject, into strata
};

/// Half-open bins: value v falls in bin #{cuts <= v}.
std::size_t bin_index(double value, std::span<const double> cuts);
std::string bin_label(std::size_t bin, std::span<const double> cuts);

void validate(const StratumSpec& spec, const Dataset& data);
StratumAssignment assign_strata(const Dataset& data, const StratumSpec& spec);
std::vector<StratumCounts> stratify(const Dataset& data, const StratumSpec& spec);

/// Tally of the rows in `rows` (a resample, or everything) into the strata
/// of an existing assignment. Labels are copied from `assignment`.
std::vector<StratumCounts> tally_strata(const Dataset& data, const StratumAssignment& assignment,
                                        std::span<const std::size_t> rows);

// ---------------------------------------------------------------------------
// Estimates

enum class Method { unaug, aug, aug_w, aug_y2w, mh, joint_nc, ss_joint, joint_mh, joint_reg };

std::string_view to_string(Method m);
Method parse_method(std::string_view tag);
bool is_joint(Method m);

struct Diagnostics {
  int iterations = 0;
  std::vector<std::string> excluded_strata;
  std::vector<std::string> warnings;
  int bootstrap_reps = 0;
  int bootstrap_failures = 0;
};

struct EstimateResult {
  Method method = Method::unaug;
  double beta1_hat = 0.0;
  double std_err = 0.0;
  double ci_level = 0.95;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double ve = 0.0;
  std::optional<std::pair<double, double>> components;  // (beta1_star, beta2_star)
  Diagnostics diagnostics;
};

/// Fills ci and ve from (beta1_hat, std_err, level) with a Wald interval on
/// the log scale.
EstimateResult make_estimate(Method method, double beta1_hat, double std_err, double ci_level);

/// z such that P(|Z| <= z) = level.
double normal_two_sided_quantile(double level);

// ---------------------------------------------------------------------------
// CSV ingestion

struct ColumnMap {
  std::string id = "id";  // optional column
  std::string t = "t";
  std::string y1 = "y1";
  std::string y2 = "y2";
  /// When nonempty, y2 is the sum of every column whose name starts with
  /// this prefix (per-type negative-control indicators) and `y2` is unused.
  std::string y2_type_prefix;
  /// Covariate name -> CSV column name, for covariates stored under a
  /// different header. Unlisted covariates use their own name.
  std::map<std::string, std::string> covariates;
};

Dataset load_csv(const std::filesystem::path& path, const CovariateSchema& schema,
                 const ColumnMap& column_map = {});

/// Every column not claimed by the column map becomes a covariate: numeric
/// when all its cells parse as numbers, categorical otherwise.
CovariateSchema infer_schema(const std::filesystem::path& path, const ColumnMap& column_map = {});

void write_csv(const Dataset& data, const std::filesystem::path& path);

}  // namespace ncvax
