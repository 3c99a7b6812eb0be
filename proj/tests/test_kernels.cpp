#include <doctest.h>

#include <Eigen/Dense>

#include <random>
#include <stdexcept>

#include "ncvax/kernels.hpp"

using namespace ncvax;

namespace {

std::vector<double> binary(std::size_t n, std::mt19937_64& g, double p) {
  std::bernoulli_distribution d(p);
  std::vector<double> v(n);
  for (auto& x : v) x = d(g) ? 1.0 : 0.0;
  return v;
}

std::vector<double> counts(std::size_t n, std::mt19937_64& g) {
  std::poisson_distribution<int> d(1.75);
  std::vector<double> v(n);
  for (auto& x : v) x = d(g);
  return v;
}

std::vector<double> reals(std::size_t n, std::mt19937_64& g) {
  std::normal_distribution<double> d(0.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(g);
  return v;
}

bool same(const kernels::ArmTotals& a, const kernels::ArmTotals& b) {
  return a.n == b.n && a.t == b.t && a.y1 == b.y1 && a.y2 == b.y2 && a.y1y1 == b.y1y1 && a.y2y2 == b.y2y2 &&
         a.y1y2 == b.y1y2 && a.t_y1 == b.t_y1 && a.t_y2 == b.t_y2 && a.t_y1y1 == b.t_y1y1 &&
         a.t_y2y2 == b.t_y2y2 && a.t_y1y2 == b.t_y1y2;
}

}  // namespace

TEST_CASE("scalar arm totals match a direct loop") {
  std::mt19937_64 g(7);
  const std::size_t n = 1001;
  const auto t = binary(n, g, 0.5), y1 = binary(n, g, 0.1), y2 = counts(n, g);
  kernels::ArmTotals ref;
  for (std::size_t i = 0; i < n; ++i) {
    ref.n += 1;
    ref.t += t[i];
    ref.y1 += y1[i];
    ref.y2 += y2[i];
    ref.y1y1 += y1[i] * y1[i];
    ref.y2y2 += y2[i] * y2[i];
    ref.y1y2 += y1[i] * y2[i];
    ref.t_y1 += t[i] * y1[i];
    ref.t_y2 += t[i] * y2[i];
    ref.t_y1y1 += t[i] * y1[i] * y1[i];
    ref.t_y2y2 += t[i] * y2[i] * y2[i];
    ref.t_y1y2 += t[i] * y1[i] * y2[i];
  }
  CHECK(same(kernels::scalar::arm_totals(t, y1, y2), ref));
}

TEST_CASE("AVX2 variants agree with the scalar reference") {
  if (kernels::detected_isa() != kernels::Isa::avx2) {
    MESSAGE("AVX2 not available on this machine; equivalence not exercised");
    return;
  }
  std::mt19937_64 g(11);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 17u, 1000u, 4099u}) {
    CAPTURE(n);
    const auto t = binary(n, g, 0.5), y1 = binary(n, g, 0.2), y2 = counts(n, g);
    // integer-valued columns: every partial sum is exact, so equality holds
    CHECK(same(kernels::avx2::arm_totals(t, y1, y2), kernels::scalar::arm_totals(t, y1, y2)));
    CHECK(kernels::avx2::dot(t, y2) == kernels::scalar::dot(t, y2));

    const auto a = reals(n, g), b = reals(n, g), w = reals(n, g);
    const double s = kernels::scalar::dot(a, b), v = kernels::avx2::dot(a, b);
    double mag = 0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
    CHECK(std::abs(s - v) <= 1e-13 * (mag + 1));
    const double s3 = kernels::scalar::dot3(a, w, b), v3 = kernels::avx2::dot3(a, w, b);
    double mag3 = 0;
    for (std::size_t i = 0; i < n; ++i) mag3 += std::abs(a[i] * w[i] * b[i]);
    CHECK(std::abs(s3 - v3) <= 1e-13 * (mag3 + 1));
  }
}

TEST_CASE("runtime selection") {
  const auto before = kernels::active_isa();
  kernels::set_active_isa(kernels::Isa::scalar);
  CHECK(kernels::active_isa() == kernels::Isa::scalar);
  if (kernels::detected_isa() == kernels::Isa::avx2) {
    kernels::set_active_isa(kernels::Isa::avx2);
    CHECK(kernels::active_isa() == kernels::Isa::avx2);
  } else {
    CHECK_THROWS_AS(kernels::set_active_isa(kernels::Isa::avx2), std::invalid_argument);
  }
  kernels::set_active_isa(before);
  CHECK(kernels::to_string(kernels::Isa::scalar) == "scalar");
}

TEST_CASE("weighted gram matches Eigen under both variants") {
  std::mt19937_64 g(3);
  const std::size_t n = 203, p = 5;
  const auto xv = reals(n * p, g);
  auto w = reals(n, g);
  for (auto& x : w) x = std::abs(x);
  const Eigen::Map<const Eigen::MatrixXd> x(xv.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(n));
  const Eigen::MatrixXd ref = x.transpose() * wv.asDiagonal() * x;
  const auto before = kernels::active_isa();
  for (auto isa : {kernels::Isa::scalar, kernels::detected_isa()}) {
    kernels::set_active_isa(isa);
    std::vector<double> out(p * p);
    kernels::weighted_gram(xv, n, p, w, out);
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < p; ++c)
        CHECK(out[r * p + c] ==
              doctest::Approx(ref(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))).epsilon(1e-12));
  }
  kernels::set_active_isa(before);
}
