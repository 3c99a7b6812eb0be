#include <atomic>
#include <cstdlib>
#include <stdexcept>

#include "ncvax/kernels.hpp"

namespace ncvax::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(NCVAX_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  if (std::getenv("NCVAX_FORCE_SCALAR") != nullptr) return Isa::scalar;
  return detected_isa();
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

Isa detected_isa() {
  static const bool has = cpu_has_avx2();
  return has ? Isa::avx2 : Isa::scalar;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (isa == Isa::avx2 && detected_isa() != Isa::avx2)
    throw std::invalid_argument("AVX2 kernels are not available on this build or CPU");
  current().store(isa, std::memory_order_relaxed);
}

#if defined(NCVAX_HAVE_AVX2)
#define NCVAX_DISPATCH(fn, ...) \
  (active_isa() == Isa::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define NCVAX_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

ArmTotals arm_totals(std::span<const double> t, std::span<const double> y1,
                     std::span<const double> y2) {
  return NCVAX_DISPATCH(arm_totals, t, y1, y2);
}

double dot(std::span<const double> a, std::span<const double> b) {
  return NCVAX_DISPATCH(dot, a, b);
}

double dot3(std::span<const double> a, std::span<const double> w, std::span<const double> b) {
  return NCVAX_DISPATCH(dot3, a, w, b);
}

void weighted_gram(std::span<const double> x, std::size_t n, std::size_t p,
                   std::span<const double> w, std::span<double> out) {
  if (x.size() != n * p || w.size() != n || out.size() != p * p)
    throw std::invalid_argument("weighted_gram: dimension mismatch");
  for (std::size_t a = 0; a < p; ++a) {
    const auto xa = x.subspan(a * n, n);
    for (std::size_t b = a; b < p; ++b) {
      const double v = dot3(xa, w, x.subspan(b * n, n));
      out[a * p + b] = v;
      out[b * p + a] = v;
    }
  }
}

#if !defined(NCVAX_HAVE_AVX2)
namespace avx2 {
ArmTotals arm_totals(std::span<const double>, std::span<const double>, std::span<const double>) {
  throw std::logic_error("AVX2 kernels not compiled");
}
double dot(std::span<const double>, std::span<const double>) {
  throw std::logic_error("AVX2 kernels not compiled");
}
double dot3(std::span<const double>, std::span<const double>, std::span<const double>) {
  throw std::logic_error("AVX2 kernels not compiled");
}
}  // namespace avx2
#endif

}  // namespace ncvax::kernels
