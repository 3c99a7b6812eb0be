#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "ncvax/estimators.hpp"
#include "ncvax/simulator.hpp"
#include "oracles.hpp"

using namespace ncvax;
using oracle::add;

namespace {

const std::filesystem::path kData = NCVAX_TEST_DATA_DIR;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ncvax::Error");
  return ErrorCode::InvalidOptions;
}

Dataset aug_fixture() {
  std::vector<oracle::Subject> v;
  for (auto [t, y1, y2] : {std::tuple{1, 1, 1}, {1, 0, 1}, {1, 0, 1}, {1, 0, 0}, {0, 1, 1}, {0, 1, 0}, {0, 0, 0}, {0, 0, 0}})
    v.push_back({t, y1, y2});
  return oracle::cohort(v);
}

Dataset mh_fixture(int y2 = 1) {
  std::vector<oracle::Subject> v;
  add(v, 1, 1, 1, y2, "north");
  add(v, 1, 1, 0, y2, "north");
  add(v, 2, 0, 1, y2, "north");
  add(v, 1, 1, 1, y2, "south");
  add(v, 3, 1, 0, y2, "south");
  add(v, 1, 0, 1, y2, "south");
  add(v, 3, 0, 0, y2, "south");
  return oracle::cohort(v);
}

/// A moderately sized simulated cohort with confounding.
const Dataset& simulated() {
  static const Dataset d = [] {
    auto cfg = sim::load_scenario("obs_high_medium");
    cfg.n = 3000;
    return sim::generate(cfg, 99).data;
  }();
  return d;
}

const StratumSpec kSiteAge{{"site", "age"}, {{"age", {16, 17, 18, 19, 20}}}};
const StratumSpec kOne{{}, {}};

EstimatorOptions quick() {
  EstimatorOptions o;
  o.bootstrap_reps = 40;
  return o;
}

Dataset permuted(const Dataset& d, std::uint64_t seed) {
  std::vector<std::size_t> rows(d.size());
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), std::mt19937_64(seed));
  return d.subset(rows);
}

Dataset doubled(const Dataset& d) {
  std::vector<std::size_t> rows(2 * d.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i % d.size();
  return d.subset(rows);
}

}  // namespace

TEST_CASE("closed-form fixtures") {
  SUBCASE("unaug") {
    std::vector<oracle::Subject> v;
    add(v, 1, 1, 1, 0);
    add(v, 3, 1, 0, 0);
    add(v, 2, 0, 1, 0);
    add(v, 2, 0, 0, 0);
    const auto r = estimate_unaug(oracle::cohort(v));
    CHECK(r.beta1_hat == doctest::Approx(std::log(0.5)).epsilon(1e-12));
    CHECK(r.std_err == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.ve == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("aug with saturated y2 means") {
    const auto d = aug_fixture();
    const auto m = fit_arm_means(d, Augmentation::y2, nullptr);
    CHECK(m.treated.kind == ArmConditionalMeanModel::Kind::saturated);
    CHECK(m.e1[0] == doctest::Approx(1.0 / 3).epsilon(1e-15));  // y2 = 1
    CHECK(m.e1[3] == 0.0);                                      // y2 = 0
    CHECK(m.e0[0] == 1.0);
    CHECK(m.e0[3] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    const auto r = estimate_aug(d, Augmentation::y2, nullptr);
    CHECK(r.beta1_hat == doctest::Approx(std::log(0.25)).epsilon(1e-12));
    CHECK(r.method == Method::aug);
  }
  SUBCASE("joint_nc") {
    const auto d = load_csv(kData / "jnc_fixture.csv", {});
    const auto r = estimate_joint_nc(d);
    CHECK(r.beta1_hat == doctest::Approx(std::log(2.25)).epsilon(1e-12));
    REQUIRE(r.components);
    CHECK(r.components->first == doctest::Approx(std::log(1.5)).epsilon(1e-12));
    CHECK(r.components->second == doctest::Approx(std::log(4.0 / 6)).epsilon(1e-12));
  }
  SUBCASE("mh two strata") {
    const auto r = estimate_mh(mh_fixture(), {{"stratum"}, {}}, quick());
    CHECK(r.beta1_hat == doctest::Approx(std::log(1.0 / 1.5)).epsilon(1e-12));
  }
  SUBCASE("inverse-variance pooling") {
    const double b[] = {0.2, 0.6}, v[] = {0.01, 0.04};
    const auto p = pool_inverse_variance(b, v);
    CHECK(p.estimate == doctest::Approx(0.28).epsilon(1e-12));
    CHECK(p.variance == doctest::Approx(0.008).epsilon(1e-12));
    const double same_v[] = {0.02, 0.02};
    CHECK(pool_inverse_variance(b, same_v).estimate == doctest::Approx(0.4).epsilon(1e-12));
  }
}

TEST_CASE("one-stratum and no-covariate reductions") {
  const auto& d = simulated();
  const auto o = quick();
  const auto unaug = estimate_unaug(d, o);
  const auto jnc = estimate_joint_nc(d, o);
  CHECK(std::abs(estimate_mh(d, kOne, o).beta1_hat - unaug.beta1_hat) <= 1e-12);
  CHECK(std::abs(estimate_joint_mh(d, kOne, o).beta1_hat - jnc.beta1_hat) <= 1e-12);
  const auto ss = estimate_ss_joint(d, kOne, o);
  CHECK(std::abs(ss.beta1_hat - jnc.beta1_hat) <= 1e-12);
  CHECK(std::abs(ss.std_err - jnc.std_err) <= 1e-12);
  const auto reg = estimate_joint_reg(d, RegressionSpec{}, o);
  CHECK(std::abs(reg.beta1_hat - jnc.beta1_hat) <= 1e-8);
  CHECK(std::abs(reg.std_err - jnc.std_err) <= 1e-8);
}

TEST_CASE("aug equals unaug when the fitted means do not vary with y2") {
  SUBCASE("constant y2") {
    std::vector<oracle::Subject> v;
    add(v, 3, 1, 1, 2);
    add(v, 9, 1, 0, 2);
    add(v, 5, 0, 1, 2);
    add(v, 6, 0, 0, 2);
    const auto d = oracle::cohort(v);
    CHECK(std::abs(estimate_aug(d, Augmentation::y2, nullptr).beta1_hat - estimate_unaug(d).beta1_hat) <= 1e-12);
  }
  SUBCASE("equal y2 distributions in both arms") {
    std::vector<oracle::Subject> v;
    add(v, 1, 1, 1, 1);
    add(v, 2, 1, 0, 1);
    add(v, 1, 1, 1, 0);
    add(v, 2, 1, 0, 0);
    add(v, 2, 0, 1, 1);
    add(v, 1, 0, 0, 1);
    add(v, 1, 0, 1, 0);
    add(v, 2, 0, 0, 0);
    const auto d = oracle::cohort(v);
    CHECK(std::abs(estimate_aug(d, Augmentation::y2, nullptr).beta1_hat - estimate_unaug(d).beta1_hat) <= 1e-12);
  }
  SUBCASE("arm without events falls back to the constant mean") {
    std::vector<oracle::Subject> v;
    add(v, 2, 1, 1, 3);
    add(v, 4, 1, 0, 1);
    add(v, 4, 0, 0, 2);
    add(v, 2, 0, 0, 0);
    const auto m = fit_arm_means(oracle::cohort(v), Augmentation::y2, nullptr);
    CHECK(m.control.kind == ArmConditionalMeanModel::Kind::constant);
    CHECK(std::all_of(m.e0.begin(), m.e0.end(), [](double e) { return e == 0.0; }));
    CHECK_FALSE(m.warnings.empty());
  }
}

TEST_CASE("y2 with more than two levels uses per-arm logistic fits") {
  const auto& d = simulated();
  const auto m = fit_arm_means(d, Augmentation::y2, nullptr);
  CHECK(m.treated.kind == ArmConditionalMeanModel::Kind::logistic);
  CHECK(m.treated.terms == std::vector<std::string>{"(Intercept)", "y2"});
  CHECK(m.treated.coef[1] > 0.0);  // shared frailty makes y1 rise with y2
  // fitted logistic means reproduce the arm totals (intercept score)
  double fitted = 0, observed = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.t()[i] == 1.0) {
      fitted += m.e1[i];
      observed += d.y1()[i];
    }
  CHECK(fitted == doctest::Approx(observed).epsilon(1e-8));

  const auto reg = parse_regression_spec("primary=age+C(site)");
  const auto w = estimate_aug(d, Augmentation::w, &reg);
  const auto yw = estimate_aug(d, Augmentation::y2_and_w, &reg);
  CHECK(w.method == Method::aug_w);
  CHECK(yw.method == Method::aug_y2w);
  CHECK(std::isfinite(yw.std_err));
  CHECK(code_of([&] { estimate_aug(d, Augmentation::w, nullptr); }) == ErrorCode::InvalidOptions);
}

TEST_CASE("components identity and y2 scaling") {
  const auto& d = simulated();
  const auto o = quick();
  for (const auto& r : {estimate_joint_nc(d, o), estimate_ss_joint(d, kSiteAge, o), estimate_joint_mh(d, kSiteAge, o),
                        estimate_joint_reg(d, parse_regression_spec("primary=age+age^2+C(site)"), o)}) {
    CAPTURE(to_string(r.method));
    REQUIRE(r.components);
    CHECK(r.beta1_hat == r.components->first - r.components->second);
  }
  DatasetColumns c;
  c.t.assign(d.t().begin(), d.t().end());
  c.y1.assign(d.y1().begin(), d.y1().end());
  for (double y : d.y2()) c.y2.push_back(3 * y);
  const Dataset scaled(std::move(c));
  CHECK(std::abs(estimate_joint_nc(scaled).beta1_hat - estimate_joint_nc(d).beta1_hat) <= 1e-12);
}

TEST_CASE("permutation, duplication and relabeling invariance") {
  const auto& d = simulated();
  const auto o = quick();
  const auto p = permuted(d, 4);
  const auto dd = doubled(d);
  MethodOptions mo;
  mo.estimator = o;
  mo.strata = kSiteAge;
  mo.regression = parse_regression_spec("primary=age+C(site)");
  for (Method m : {Method::unaug, Method::aug, Method::aug_w, Method::mh, Method::joint_nc, Method::ss_joint,
                   Method::joint_mh, Method::joint_reg}) {
    CAPTURE(to_string(m));
    const auto base = estimate(m, d, mo);
    CHECK(std::abs(estimate(m, p, mo).beta1_hat - base.beta1_hat) <= 1e-9);
    const auto two = estimate(m, dd, mo);
    CHECK(std::abs(two.beta1_hat - base.beta1_hat) <= 1e-9);
    if (m != Method::mh && m != Method::joint_mh && m != Method::ss_joint)
      CHECK(two.std_err == doctest::Approx(base.std_err / std::sqrt(2.0)).epsilon(1e-8));
  }
  // relabeling strata leaves MH unchanged
  const auto mh = mh_fixture();
  std::vector<oracle::Subject> renamed;
  for (std::size_t i = 0; i < mh.size(); ++i) {
    const auto& s = mh.covariate("stratum");
    renamed.push_back({static_cast<int>(mh.t()[i]), static_cast<int>(mh.y1()[i]), 1,
                       s.levels[static_cast<std::size_t>(s.codes[i])] == "north" ? "zeta" : "alpha"});
  }
  CHECK(estimate_mh(oracle::cohort(renamed), {{"stratum"}, {}}, o).beta1_hat ==
        doctest::Approx(estimate_mh(mh, {{"stratum"}, {}}, o).beta1_hat).epsilon(1e-14));
}

TEST_CASE("Mantel-Haenszel special cases") {
  SUBCASE("joint_mh with y2 identically 1 equals mh") {
    const auto d = mh_fixture(1);
    const auto o = quick();
    CHECK(std::abs(estimate_joint_mh(d, {{"stratum"}, {}}, o).beta1_hat -
                   estimate_mh(d, {{"stratum"}, {}}, o).beta1_hat) <= 1e-12);
  }
  SUBCASE("homogeneous rates and identical arm proportions reproduce unaug") {
    std::vector<oracle::Subject> v;
    for (auto [s, k] : {std::pair{"a", 1}, {"b", 2}}) {
      add(v, k, 1, 1, 0, s);
      add(v, 3 * k, 1, 0, 0, s);
      add(v, 2 * k, 0, 1, 0, s);
      add(v, 2 * k, 0, 0, 0, s);
    }
    const auto d = oracle::cohort(v);
    CHECK(estimate_mh(d, {{"stratum"}, {}}, quick()).beta1_hat ==
          doctest::Approx(estimate_unaug(d).beta1_hat).epsilon(1e-12));
  }
  SUBCASE("strata with one arm get zero weight and are listed") {
    std::vector<oracle::Subject> v;
    add(v, 2, 1, 1, 1, "x");
    add(v, 2, 1, 0, 1, "x");
    add(v, 1, 0, 1, 1, "x");
    add(v, 3, 0, 0, 1, "x");
    add(v, 3, 1, 1, 1, "lonely");
    const auto r = estimate_mh(oracle::cohort(v), {{"stratum"}, {}}, quick());
    CHECK(r.diagnostics.excluded_strata == std::vector<std::string>{"stratum=lonely"});
  }
}

TEST_CASE("ss_joint excludes unusable strata") {
  std::vector<oracle::Subject> v;
  // usable stratum
  add(v, 3, 1, 1, 2, "ok");
  add(v, 7, 1, 0, 1, "ok");
  add(v, 5, 0, 1, 3, "ok");
  add(v, 5, 0, 0, 1, "ok");
  // no negative-control events among the treated
  add(v, 2, 1, 1, 0, "thin");
  add(v, 2, 0, 1, 1, "thin");
  add(v, 2, 0, 0, 0, "thin");
  const auto d = oracle::cohort(v);
  const auto r = estimate_ss_joint(d, {{"stratum"}, {}});
  CHECK(r.diagnostics.excluded_strata == std::vector<std::string>{"stratum=thin"});
  std::vector<std::size_t> ok_rows(20);
  std::iota(ok_rows.begin(), ok_rows.end(), 0);
  CHECK(r.beta1_hat == doctest::Approx(estimate_joint_nc(d.subset(ok_rows)).beta1_hat).epsilon(1e-12));

  std::vector<oracle::Subject> none;
  add(none, 2, 1, 1, 0, "a");
  add(none, 2, 0, 1, 1, "a");
  add(none, 2, 0, 0, 0, "a");
  CHECK(code_of([&] { estimate_ss_joint(oracle::cohort(none), {{"stratum"}, {}}); }) == ErrorCode::AllStrataDegenerate);
}

TEST_CASE("estimator preconditions") {
  std::vector<oracle::Subject> no_treated_events;
  add(no_treated_events, 4, 1, 0, 1);
  add(no_treated_events, 2, 0, 1, 1);
  add(no_treated_events, 2, 0, 0, 1);
  const auto d = oracle::cohort(no_treated_events);
  CHECK(code_of([&] { estimate_unaug(d); }) == ErrorCode::DegenerateArm);
  CHECK(code_of([&] { estimate_aug(d, Augmentation::y2, nullptr); }) == ErrorCode::DegenerateArm);
  CHECK(code_of([&] { estimate_joint_nc(d); }) == ErrorCode::DegenerateArm);
  CHECK(code_of([&] { estimate_mh(d, kOne, quick()); }) == ErrorCode::AllStrataDegenerate);

  std::vector<oracle::Subject> control_only;
  add(control_only, 4, 0, 1, 1);
  add(control_only, 4, 0, 0, 1);
  CHECK(code_of([&] { estimate_unaug(oracle::cohort(control_only)); }) == ErrorCode::DegenerateArm);

  std::vector<oracle::Subject> no_nc;
  add(no_nc, 2, 1, 1, 0);
  add(no_nc, 2, 1, 0, 0);
  add(no_nc, 2, 0, 1, 1);
  add(no_nc, 2, 0, 0, 0);
  CHECK(code_of([&] { estimate_joint_nc(oracle::cohort(no_nc)); }) == ErrorCode::DegenerateNegativeControl);

  DatasetColumns c;
  c.t = {1, 1, 1, 0, 0, 0};
  c.y1 = {1, 0, 0, 1, 1, 0};
  c.y2 = {1, 2, 0, 1, 0, 3};
  c.covariates.push_back({.name = "dose", .kind = CovariateKind::numeric, .values = std::vector<double>(6, 2.0),
                          .codes = {}, .levels = {}});
  const Dataset flat(std::move(c));
  CHECK(code_of([&] { estimate_joint_reg(flat, parse_regression_spec("primary=dose")); }) ==
        ErrorCode::RankDeficientDesign);

  MethodOptions mo;
  CHECK(code_of([&] { estimate(Method::mh, d, mo); }) == ErrorCode::InvalidOptions);
  CHECK(code_of([&] { estimate(Method::joint_reg, d, mo); }) == ErrorCode::InvalidOptions);
}

TEST_CASE("bootstrap follows the documented stream contract") {
  const auto& d = simulated();
  const auto asg = assign_strata(d, kSiteAge);
  std::vector<std::string> label(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) label[i] = asg.strata[asg.index[i]].label;

  const auto lib = bootstrap_stratified(d, asg, &mh_log_ratio, 60, 1234, 1);
  const double ref = oracle::bootstrap_sd(
      d, label, [&](const auto& rows, const auto& lab) { return oracle::mh(d, rows, lab, false); }, 60, 1234);
  CHECK(lib.std_err == doctest::Approx(ref).epsilon(1e-10));
  CHECK(lib.reps == 60);
  CHECK(lib.failures == 0);
  for (int w : {2, 4, 8}) CHECK(bootstrap_stratified(d, asg, &mh_log_ratio, 60, 1234, w).std_err == lib.std_err);
  CHECK(bootstrap_stratified(d, asg, &mh_log_ratio, 60, 1235, 1).std_err != lib.std_err);
}

TEST_CASE("correlation of y1 and y2") {
  std::vector<oracle::Subject> v;
  add(v, 3, 1, 1, 1);
  add(v, 2, 1, 0, 0);
  add(v, 4, 0, 1, 1);
  add(v, 1, 0, 0, 0);
  CHECK(report_correlation(oracle::cohort(v)).overall == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<oracle::Subject> flat;
  add(flat, 3, 1, 0, 1);
  add(flat, 3, 0, 0, 2);
  CHECK(code_of([&] { report_correlation(oracle::cohort(flat)); }) == ErrorCode::ZeroVariance);

  // independent outcomes
  auto cfg = sim::load_scenario("rand_medium_medium");
  cfg.n = 40000;
  cfg.a_values = {1, 1, 1};
  cfg.primary[0].alpha = cfg.primary[1].alpha = 0;
  cfg.primary[0].site = cfg.primary[1].site = {0, 0, 0};
  cfg.primary[0].beta = cfg.primary[1].beta = 0;
  const auto ind = sim::generate(cfg, 8).data;
  CHECK(std::abs(report_correlation(ind).overall) < 3.0 / std::sqrt(40000.0));
}

TEST_CASE("joint_reg negative-control component is centred at zero under randomization") {
  auto cfg = sim::load_scenario("rand_medium_medium");
  cfg.n = 2000;
  const auto reg = parse_regression_spec("primary=age+age^2+C(site)");
  std::vector<double> b2;
  for (std::uint64_t s = 0; s < 150; ++s) {
    const auto r = estimate_joint_reg(sim::generate(cfg, 500 + s).data, reg);
    b2.push_back(r.components->second);
  }
  double m = 0, ss = 0;
  for (double x : b2) m += x;
  m /= static_cast<double>(b2.size());
  for (double x : b2) ss += (x - m) * (x - m);
  const double se = std::sqrt(ss / static_cast<double>(b2.size() - 1) / static_cast<double>(b2.size()));
  CHECK(std::abs(m) < 3 * se);
}
