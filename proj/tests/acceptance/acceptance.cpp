// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ncvax/estimators.hpp"
#include "ncvax/harness.hpp"
#include "ncvax/kernels.hpp"
#include "ncvax/regression.hpp"
#include "ncvax/simulator.hpp"
#include "ncvax/systems.hpp"
#include "oracles.hpp"

using namespace ncvax;
using harness::StudyOptions;
using oracle::add;

namespace {

constexpr std::uint64_t kSeed = 20241015;

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

struct Criterion {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int number, const std::string& title, const std::function<void(Criterion&)>& body) {
  Criterion c;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!c.ok) ++failures;
  std::printf("%s  %d. %s (%.1fs):%s\n", c.ok ? "PASS" : "FAIL", number, title.c_str(), secs, c.detail.str().c_str());
  std::fflush(stdout);
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

Dataset from_rows(const std::vector<oracle::Subject>& v) { return oracle::cohort(v); }

StudyOptions study(std::vector<Method> methods, int reps, int bootstrap_reps = 100) {
  StudyOptions o;
  o.methods = std::move(methods);
  o.reps = reps;
  o.seed = kSeed;
  o.workers = workers();
  o.method_options.estimator.bootstrap_reps = bootstrap_reps;
  return o;
}

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

// ---------------------------------------------------------------------------

void closed_form(Criterion& c) {
  std::vector<oracle::Subject> u;
  add(u, 1, 1, 1, 0);
  add(u, 3, 1, 0, 0);
  add(u, 2, 0, 1, 0);
  add(u, 2, 0, 0, 0);
  const auto unaug = estimate_unaug(from_rows(u));
  c.require(close(unaug.beta1_hat, -0.69314718055994531, 1e-10), "unaug estimate");
  c.require(close(unaug.std_err, 1.0, 1e-10), "unaug SE");

  std::vector<oracle::Subject> a;
  for (auto [t, y1, y2] : {std::tuple{1, 1, 1}, {1, 0, 1}, {1, 0, 1}, {1, 0, 0}, {0, 1, 1}, {0, 1, 0}, {0, 0, 0}, {0, 0, 0}})
    a.push_back({t, y1, y2});
  const auto aug = estimate_aug(from_rows(a), Augmentation::y2, nullptr);
  c.require(close(aug.beta1_hat, -1.3862943611198906, 1e-10), "aug estimate");

  std::vector<oracle::Subject> j;
  for (auto [y1, y2] : {std::pair{1, 1}, {1, 1}, {1, 1}, {0, 1}, {0, 0}}) j.push_back({1, y1, y2});
  for (auto [y1, y2] : {std::pair{1, 2}, {1, 2}, {0, 1}, {0, 1}, {0, 0}}) j.push_back({0, y1, y2});
  const auto jnc = estimate_joint_nc(from_rows(j));
  c.require(close(jnc.beta1_hat, 0.81093021621632877, 1e-10), "joint_nc estimate");

  std::vector<oracle::Subject> m;
  add(m, 1, 1, 1, 1, "north");
  add(m, 1, 1, 0, 1, "north");
  add(m, 2, 0, 1, 1, "north");
  add(m, 1, 1, 1, 1, "south");
  add(m, 3, 1, 0, 1, "south");
  add(m, 1, 0, 1, 1, "south");
  add(m, 3, 0, 0, 1, "south");
  EstimatorOptions quick;
  quick.bootstrap_reps = 20;
  const auto mh = estimate_mh(from_rows(m), {{"stratum"}, {}}, quick);
  c.require(close(mh.beta1_hat, -0.40546510810816438, 1e-10), "mh estimate");

  const double b[] = {0.2, 0.6}, v[] = {0.01, 0.04};
  const auto pooled = pool_inverse_variance(b, v);
  c.require(close(pooled.estimate, 0.28, 1e-10) && close(pooled.variance, 0.008, 1e-10), "pooling");

  c.detail << " unaug " << fmt(unaug.beta1_hat, 5) << " (SE " << fmt(unaug.std_err, 5) << "), aug "
           << fmt(aug.beta1_hat, 5) << ", joint_nc " << fmt(jnc.beta1_hat, 5) << ", mh " << fmt(mh.beta1_hat, 5)
           << ", pooled (" << pooled.estimate << ", " << pooled.variance << ")";
}

void reductions(Criterion& c) {
  auto cfg = sim::load_scenario("obs_high_medium");
  cfg.n = 5000;
  const auto d = sim::generate(cfg, kSeed).data;
  EstimatorOptions o;
  o.bootstrap_reps = 20;
  const StratumSpec one{{}, {}};
  const auto unaug = estimate_unaug(d, o);
  const auto jnc = estimate_joint_nc(d, o);
  double worst = 0;
  auto exact = [&](double x, double y, const std::string& what) {
    worst = std::max(worst, std::abs(x - y));
    c.require(close(x, y, 1e-12), what);
  };
  exact(estimate_mh(d, one, o).beta1_hat, unaug.beta1_hat, "one-stratum mh = unaug");
  exact(estimate_joint_mh(d, one, o).beta1_hat, jnc.beta1_hat, "one-stratum joint_mh = joint_nc");
  exact(estimate_ss_joint(d, one, o).beta1_hat, jnc.beta1_hat, "one-stratum ss_joint = joint_nc");
  const auto reg = estimate_joint_reg(d, RegressionSpec{}, o);
  c.require(close(reg.beta1_hat, jnc.beta1_hat, 1e-8), "intercept-only joint_reg = joint_nc");

  // y2 identical in distribution across arms within each y1 level: fitted
  // conditional means do not vary with y2
  std::vector<oracle::Subject> flat;
  for (int t : {0, 1})
    for (int y2 : {0, 2}) {
      add(flat, 6, t, 0, y2);
      add(flat, t == 1 ? 1 : 2, t, 1, y2);
    }
  const auto fd = from_rows(flat);
  exact(estimate_aug(fd, Augmentation::y2, nullptr).beta1_hat, estimate_unaug(fd).beta1_hat,
        "constant-mean aug = unaug");

  DatasetColumns cols;
  cols.t.assign(d.t().begin(), d.t().end());
  cols.y1.assign(d.y1().begin(), d.y1().end());
  for (double y : d.y2()) cols.y2.push_back(3 * y);
  const auto scaled = estimate_joint_nc(Dataset(std::move(cols)), o);
  exact(scaled.beta1_hat, jnc.beta1_hat, "y2 scaling");

  c.detail << " max closed-form gap " << worst << ", joint_reg gap " << std::abs(reg.beta1_hat - jnc.beta1_hat);
}

void oracle_consistency(Criterion& c) {
  auto cfg = sim::load_scenario("obs_medium_medium");
  cfg.name = "single_type_no_w";
  cfg.n = 500000;
  cfg.second_primary_enabled = false;
  cfg.primary[0].alpha = 0;
  cfg.primary[0].site = {0, 0, 0};
  for (auto& k : cfg.negative_controls) {
    k.alpha = 0;
    k.site = {0, 0, 0};
  }
  cfg = sim::calibrate_intercepts(cfg, {0.05, 0.05}, 1.75);
  const double beta1 = sim::true_beta1_composite(cfg);
  const double plim_jnc = sim::plim_oracle(cfg, Method::joint_nc);
  const double plim_unaug = sim::plim_oracle(cfg, Method::unaug);
  const auto d = sim::generate(cfg, kSeed).data;
  const auto jnc = estimate_joint_nc(d);
  const auto unaug = estimate_unaug(d);
  c.require(close(plim_jnc, beta1, 1e-12), "enumerated joint_nc limit equals beta1");
  c.require(std::abs(jnc.beta1_hat - beta1) <= 3 * jnc.std_err, "joint_nc within 3 SE of beta1");
  c.require(std::abs(unaug.beta1_hat - plim_unaug) <= 3 * unaug.std_err, "unaug within 3 SE of its limit");
  c.require(std::abs(plim_unaug - beta1) > 3 * unaug.std_err, "confounding detectable at this n");
  c.detail << " beta1 " << fmt(beta1) << ", joint_nc " << fmt(jnc.beta1_hat) << " (SE " << fmt(jnc.std_err)
           << "); unaug limit " << fmt(plim_unaug) << ", unaug " << fmt(unaug.beta1_hat) << " (SE "
           << fmt(unaug.std_err) << ")";
}

void randomized_study(Criterion& c) {
  const std::vector<Method> methods{Method::unaug, Method::aug, Method::joint_nc, Method::joint_reg};
  std::vector<double> ratios;
  for (const char* name : {"rand_low_medium", "rand_medium_medium", "rand_high_medium"}) {
    const bool medium = std::string(name) == "rand_medium_medium";
    const auto cfg = sim::load_scenario(name);
    const auto s = harness::run_study(cfg, study(medium ? methods : std::vector<Method>{Method::unaug, Method::aug}, 1000))
                       .summary;
    const auto& u = s.at(Method::unaug);
    const auto& a = s.at(Method::aug);
    ratios.push_back(a.variance_ratio);
    c.detail << " " << name << ": ratio " << fmt(a.variance_ratio, 3) << ", corr " << fmt(s.mean_corr_y1_y2, 3)
             << ", coverage " << fmt(u.coverage, 3) << "/" << fmt(a.coverage, 3) << ";";
    if (medium) {
      c.require(u.coverage >= 0.93 && u.coverage <= 0.97, "unaug coverage");
      c.require(a.coverage >= 0.93 && a.coverage <= 0.97, "aug coverage");
      c.require(a.variance_ratio >= 1.0, "medium ratio >= 1");
      c.detail << " mean SE / MC SD:";
      for (Method m : methods) {
        const auto& ms = s.at(m);
        c.detail << " " << to_string(m) << " " << fmt(ms.mean_se / std::sqrt(ms.empirical_variance), 3);
      }
      c.detail << ";";
    }
    if (std::string(name) == "rand_high_medium") {
      c.require(a.variance_ratio >= 1.05, "high ratio >= 1.05");
    }
  }
  c.require(ratios[0] <= ratios[1] && ratios[1] <= ratios[2], "ratio monotone low -> high");
}

void observational_study(Criterion& c) {
  const auto cfg = sim::load_scenario("obs_medium_medium");
  const auto s = harness::run_study(
                     cfg, study({Method::mh, Method::joint_nc, Method::ss_joint, Method::joint_mh, Method::joint_reg}, 1000))
                     .summary;
  const double mh = s.at(Method::mh).bias, jnc = s.at(Method::joint_nc).bias;
  const double jmh = s.at(Method::joint_mh).bias, reg = s.at(Method::joint_reg).bias;
  c.require(mh > 0.3, "bias(mh) > 0.3");
  c.require(jnc > 0.1 && jnc < mh, "bias(joint_nc) in (0.1, bias(mh))");
  c.require(std::abs(jmh) < 0.1, "|bias(joint_mh)| < 0.1");
  c.require(std::abs(reg) < 0.1, "|bias(joint_reg)| < 0.1");
  c.require(std::abs(jmh) <= std::abs(reg) + 0.02, "|bias(joint_mh)| <= |bias(joint_reg)| + 0.02");
  c.detail << " bias mh " << fmt(mh) << ", joint_nc " << fmt(jnc) << ", ss_joint "
           << fmt(s.at(Method::ss_joint).bias) << ", joint_mh " << fmt(jmh) << ", joint_reg " << fmt(reg);
  for (const auto& ms : s.methods)
    if (ms.failures > 0) c.detail << "; " << to_string(ms.method) << " failures " << ms.failures;
}

void sensitivity(Criterion& c) {
  for (const char* name : {"obs_medium_medium_nu1", "obs_medium_medium_nu2", "obs_medium_medium_nu3"}) {
    const auto cfg = sim::load_scenario(name);
    const auto s = harness::run_study(cfg, study({Method::mh, Method::joint_mh, Method::joint_reg}, 1000)).summary;
    const double mh = s.at(Method::mh).bias, jmh = s.at(Method::joint_mh).bias, reg = s.at(Method::joint_reg).bias;
    c.require(mh > 0.3, std::string(name) + " bias(mh) > 0.3");
    c.require(std::abs(jmh) < 0.15, std::string(name) + " |bias(joint_mh)| < 0.15");
    c.require(std::abs(reg) < 0.15, std::string(name) + " |bias(joint_reg)| < 0.15");
    c.detail << " " << name << ": mh " << fmt(mh) << ", joint_mh " << fmt(jmh) << ", joint_reg " << fmt(reg) << ";";
  }
}

double max_jacobian_gap(const mest::EstimatingSystem& sys, const mest::Vector& theta) {
  double worst = 0;
  const auto p = static_cast<Eigen::Index>(sys.dim());
  mest::Matrix j(p, p);
  for (std::size_t i = 0; i < sys.size(); i += 7) {
    sys.jacobian(i, theta, j);
    const mest::Matrix fd = oracle::finite_difference_jacobian(sys, i, theta);
    worst = std::max(worst, (j - fd).cwiseAbs().maxCoeff() / (1 + j.cwiseAbs().maxCoeff()));
  }
  return worst;
}

std::shared_ptr<GlmBlock> glm_block(Family f, Eigen::MatrixXd x, std::span<const double> y) {
  auto b = std::make_shared<GlmBlock>();
  b->family = f;
  b->x = std::move(x);
  b->y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  return b;
}

void machinery(Criterion& c) {
  auto cfg = sim::load_scenario("obs_medium_medium");
  cfg.n = 2000;
  const auto d = sim::generate(cfg, kSeed).data;

  // jacobians of every shipped system at perturbed admissible points
  const auto reg = harness::default_study_method_options().regression.value();
  const auto x1 = build_design(d, {.intercept = true, .treatment = true, .y2 = false}, reg.primary_terms).x;
  const auto x2 = build_design(d, {.intercept = true, .treatment = true, .y2 = false}, reg.secondary_terms).x;
  const GlmStack stack({glm_block(Family::log_binomial, x1, d.y1()), glm_block(Family::log_linear, x2, d.y2())});
  mest::Vector theta = stack.solve_blocks(stack.default_init(), {}).theta_hat;
  for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] += 0.01 * static_cast<double>(k % 3) - 0.01;
  double worst = max_jacobian_gap(stack, theta);
  const auto means = fit_arm_means(d, Augmentation::y2, nullptr);
  const double pi = static_cast<double>(d.treated_count()) / static_cast<double>(d.size());
  const AugmentedSystem aug({d.t().begin(), d.t().end()}, {d.y1().begin(), d.y1().end()}, means.e1, means.e0, pi);
  mest::Vector th(2);
  th << std::log(0.04), -0.5;
  worst = std::max(worst, max_jacobian_gap(aug, th));
  c.require(worst <= 1e-5, "jacobian vs finite differences");

  // Joint-NC sandwich vs nonparametric bootstrap
  const auto jnc = estimate_joint_nc(d);
  const int reps = 2000;
  std::vector<double> boot;
  for (int b = 0; b < reps; ++b) {
    rng::Stream s(kSeed, static_cast<std::uint64_t>(b));
    std::vector<std::size_t> rows(d.size());
    for (auto& r : rows) r = s.index(d.size());
    try {
      boot.push_back(estimate_joint_nc(d.subset(rows)).beta1_hat);
    } catch (const Error&) {
    }
  }
  double m = 0, ss = 0;
  for (double x : boot) m += x;
  m /= static_cast<double>(boot.size());
  for (double x : boot) ss += (x - m) * (x - m);
  const double boot_se = std::sqrt(ss / static_cast<double>(boot.size() - 1));
  c.require(std::abs(jnc.std_err / boot_se - 1) <= 0.15, "sandwich vs bootstrap SE within 15%");

  // serial vs parallel study summaries
  auto small = sim::load_scenario("obs_low_medium");
  small.n = 2000;
  auto o = study({Method::unaug, Method::aug, Method::mh, Method::joint_nc, Method::ss_joint, Method::joint_mh,
                  Method::joint_reg},
                 40, 30);
  o.workers = 1;
  const auto serial = harness::run_study(small, o).summary;
  o.workers = 4;
  const auto parallel = harness::run_study(small, o).summary;
  double gap = 0;
  auto diff = [&](double a, double b) {
    if (std::isnan(a) && std::isnan(b)) return;
    gap = std::max(gap, std::isfinite(a - b) ? std::abs(a - b) : INFINITY);
  };
  diff(serial.mean_corr_y1_y2, parallel.mean_corr_y1_y2);
  for (std::size_t i = 0; i < serial.methods.size(); ++i) {
    const auto &a = serial.methods[i], &b = parallel.methods[i];
    diff(a.mean_estimate, b.mean_estimate);
    diff(a.empirical_variance, b.empirical_variance);
    diff(a.coverage, b.coverage);
    diff(a.mean_se, b.mean_se);
    diff(a.variance_ratio, b.variance_ratio);
    diff(a.successes, b.successes);
  }
  c.require(gap <= 1e-12, "serial vs parallel summaries");

  c.detail << " max jacobian gap " << worst << "; joint_nc SE sandwich " << fmt(jnc.std_err) << " vs bootstrap "
           << fmt(boot_se) << " (" << boot.size() << " reps); serial/parallel gap " << gap;
}

}  // namespace

int main() {
  std::printf("active kernels: %s, workers: %d\n", std::string(kernels::to_string(kernels::active_isa())).c_str(),
              workers());
  report(1, "closed-form fixtures", closed_form);
  report(2, "reduction identities", reductions);
  report(3, "oracle consistency at n = 500000", oracle_consistency);
  report(4, "randomized-trial study, 1000 reps", randomized_study);
  report(5, "observational bias ordering, 1000 reps", observational_study);
  report(6, "sensitivity to negative-control effects, 1000 reps", sensitivity);
  report(7, "numerical machinery", machinery);
  std::printf("%d of 7 criteria failed\n", failures);
  return failures;
}
