#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "ncvax/harness.hpp"
#include "ncvax/rng.hpp"

namespace ncvax::harness {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool randomized_only(Method m) { return m == Method::aug || m == Method::aug_w || m == Method::aug_y2w; }

}  // namespace

MethodOptions default_study_method_options() {
  MethodOptions o;
  StratumSpec strata;
  strata.keys = {"site", "age"};
  std::vector<double> cuts;
  for (int i = 1; i <= 12; ++i) cuts.push_back(15.0 + 0.5 * i);
  strata.numeric_cuts["age"] = cuts;
  o.strata = strata;
  o.regression = parse_regression_spec("primary=age+age^2+C(site),secondary=age+age^2+C(site)");
  return o;
}

const MethodSummary& StudySummary::at(Method m) const {
  for (const auto& s : methods)
    if (s.method == m) return s;
  throw Error(ErrorCode::InvalidOptions, "method " + std::string(to_string(m)) + " is not in the study");
}

std::uint64_t rep_seed(std::uint64_t study_seed, int rep) {
  return rng::stream_seed(study_seed, static_cast<std::uint64_t>(rep));
}

StudyResult run_study(const sim::GeneratorConfig& config, const StudyOptions& options) {
  if (options.reps < 2) throw Error(ErrorCode::InvalidOptions, "a study needs at least 2 replicates");
  if (options.methods.empty()) throw Error(ErrorCode::InvalidOptions, "a study needs at least one method");
  sim::validate(config);
  const double truth = sim::true_beta1_composite(config);
  const std::size_t m = options.methods.size();
  std::vector<RepRecord> records(static_cast<std::size_t>(options.reps) * m);

  auto run_rep = [&](int rep) {
    const std::uint64_t seed = rep_seed(options.seed, rep);
    RepRecord base;
    base.scenario = config.name;
    base.n = config.n;
    base.rep = rep;
    base.seed = seed;
    base.true_beta1c = truth;
    base.corr_y1_y2 = kNaN;
    std::optional<sim::SimulatedCohort> cohort;
    std::string gen_error;
    try {
      cohort.emplace(sim::generate(config, seed));
      try {
        base.corr_y1_y2 = report_correlation(cohort->data).overall;
      } catch (const Error&) {
      }
    } catch (const Error& e) {
      gen_error = std::string(to_string(e.code()));
    }
    MethodOptions mo = options.method_options;
    mo.estimator.workers = 1;
    mo.estimator.bootstrap_seed = rng::stream_seed(seed, 1);
    for (std::size_t j = 0; j < m; ++j) {
      RepRecord r = base;
      r.method = options.methods[j];
      if (!cohort) {
        r.error = gen_error;
      } else {
        try {
          const auto est = estimate(r.method, cohort->data, mo);
          r.ok = std::isfinite(est.beta1_hat) && std::isfinite(est.std_err);
          r.beta1_hat = est.beta1_hat;
          r.std_err = est.std_err;
          r.ci_lo = est.ci_lo;
          r.ci_hi = est.ci_hi;
          r.covered = (est.ci_lo <= truth && truth <= est.ci_hi) ? 1 : 0;
          if (!r.ok) r.error = "NonFinite";
        } catch (const Error& e) {
          r.error = std::string(to_string(e.code()));
        }
      }
      records[static_cast<std::size_t>(rep) * m + j] = std::move(r);
    }
  };

  const int workers = std::max(1, std::min(options.workers, options.reps));
  if (workers == 1) {
    for (int rep = 0; rep < options.reps; ++rep) run_rep(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int rep = next++; rep < options.reps; rep = next++) run_rep(rep);
      });
  }

  StudyResult out;
  out.summary = summarize(records, options.methods, std::string(sim::to_string(config.design)), options.seed);
  out.summary.true_beta1c = truth;
  if (config.design == sim::Design::observational)
    for (Method meth : options.methods)
      if (randomized_only(meth))
        out.summary.warnings.push_back(std::string(to_string(meth)) +
                                       " assumes randomized treatment but the design is observational");
  out.records = std::move(records);
  return out;
}

StudySummary summarize(const std::vector<RepRecord>& records, const std::vector<Method>& methods,
                       const std::string& design, std::uint64_t seed) {
  StudySummary s;
  s.design = design;
  s.seed = seed;
  if (!records.empty()) {
    s.scenario = records.front().scenario;
    s.n = records.front().n;
    s.true_beta1c = records.front().true_beta1c;
  }
  // correlation is per replicate; count it once per rep
  double corr_sum = 0.0;
  int corr_count = 0, last_rep = -1, reps = 0;
  for (const auto& r : records) {
    if (r.rep == last_rep) continue;
    last_rep = r.rep;
    ++reps;
    if (std::isfinite(r.corr_y1_y2)) {
      corr_sum += r.corr_y1_y2;
      ++corr_count;
    }
  }
  s.reps = reps;
  s.mean_corr_y1_y2 = corr_count > 0 ? corr_sum / corr_count : kNaN;

  for (Method m : methods) {
    MethodSummary ms;
    ms.method = m;
    double sum = 0.0, se_sum = 0.0, covered = 0.0;
    for (const auto& r : records) {
      if (r.method != m) continue;
      if (!r.ok) {
        ++ms.failures;
        continue;
      }
      ++ms.successes;
      sum += r.beta1_hat;
      se_sum += r.std_err;
      covered += r.covered;
    }
    if (ms.successes > 0) {
      ms.mean_estimate = sum / ms.successes;
      ms.bias = ms.mean_estimate - s.true_beta1c;
      ms.mean_se = se_sum / ms.successes;
      ms.coverage = covered / ms.successes;
      double ss = 0.0;
      for (const auto& r : records)
        if (r.method == m && r.ok) ss += (r.beta1_hat - ms.mean_estimate) * (r.beta1_hat - ms.mean_estimate);
      ms.empirical_variance = ms.successes > 1 ? ss / (ms.successes - 1) : kNaN;
    } else {
      ms.mean_estimate = ms.bias = ms.mean_se = ms.coverage = ms.empirical_variance = kNaN;
    }
    s.methods.push_back(ms);
  }
  const MethodSummary* unaug = nullptr;
  for (const auto& ms : s.methods)
    if (ms.method == Method::unaug) unaug = &ms;
  for (auto& ms : s.methods) {
    if (ms.method == Method::unaug)
      ms.variance_ratio = 1.0;
    else
      ms.variance_ratio = unaug != nullptr ? unaug->empirical_variance / ms.empirical_variance : kNaN;
  }
  return s;
}

std::vector<Method> all_failed(const StudySummary& summary) {
  std::vector<Method> out;
  for (const auto& ms : summary.methods)
    if (ms.successes == 0) out.push_back(ms.method);
  return out;
}

}  // namespace ncvax::harness
