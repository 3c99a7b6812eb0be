// Compiled with -mavx2 -mfma; only reached through dispatch after a CPU
// feature check.

#include <immintrin.h>

#include <cassert>

#include "ncvax/kernels.hpp"

namespace ncvax::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

}  // namespace

ArmTotals arm_totals(std::span<const double> t, std::span<const double> y1,
                     std::span<const double> y2) {
  assert(t.size() == y1.size() && t.size() == y2.size());
  const std::size_t n = t.size();
  __m256d st = _mm256_setzero_pd(), sa = st, sb = st, saa = st, sbb = st, sab = st;
  __m256d sta = st, stb = st, staa = st, stbb = st, stab = st;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vt = _mm256_loadu_pd(t.data() + i);
    const __m256d va = _mm256_loadu_pd(y1.data() + i);
    const __m256d vb = _mm256_loadu_pd(y2.data() + i);
    const __m256d ta = _mm256_mul_pd(vt, va);
    const __m256d tb = _mm256_mul_pd(vt, vb);
    st = _mm256_add_pd(st, vt);
    sa = _mm256_add_pd(sa, va);
    sb = _mm256_add_pd(sb, vb);
    saa = _mm256_fmadd_pd(va, va, saa);
    sbb = _mm256_fmadd_pd(vb, vb, sbb);
    sab = _mm256_fmadd_pd(va, vb, sab);
    sta = _mm256_add_pd(sta, ta);
    stb = _mm256_add_pd(stb, tb);
    staa = _mm256_fmadd_pd(ta, va, staa);
    stbb = _mm256_fmadd_pd(tb, vb, stbb);
    stab = _mm256_fmadd_pd(ta, vb, stab);
  }
  ArmTotals s;
  s.n = static_cast<double>(n);
  s.t = hsum(st);
  s.y1 = hsum(sa);
  s.y2 = hsum(sb);
  s.y1y1 = hsum(saa);
  s.y2y2 = hsum(sbb);
  s.y1y2 = hsum(sab);
  s.t_y1 = hsum(sta);
  s.t_y2 = hsum(stb);
  s.t_y1y1 = hsum(staa);
  s.t_y2y2 = hsum(stbb);
  s.t_y1y2 = hsum(stab);
  for (; i < n; ++i) {
    const double ti = t[i], a = y1[i], b = y2[i];
    s.t += ti;
    s.y1 += a;
    s.y2 += b;
    s.y1y1 += a * a;
    s.y2y2 += b * b;
    s.y1y2 += a * b;
    s.t_y1 += ti * a;
    s.t_y2 += ti * b;
    s.t_y1y1 += ti * a * a;
    s.t_y2y2 += ti * b * b;
    s.t_y1y2 += ti * a * b;
  }
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  const std::size_t n = a.size();
  __m256d acc0 = _mm256_setzero_pd(), acc1 = acc0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i + 4), _mm256_loadu_pd(b.data() + i + 4),
                           acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot3(std::span<const double> a, std::span<const double> w, std::span<const double> b) {
  assert(a.size() == b.size() && a.size() == w.size());
  const std::size_t n = a.size();
  __m256d acc0 = _mm256_setzero_pd(), acc1 = acc0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d aw0 = _mm256_mul_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(w.data() + i));
    const __m256d aw1 =
        _mm256_mul_pd(_mm256_loadu_pd(a.data() + i + 4), _mm256_loadu_pd(w.data() + i + 4));
    acc0 = _mm256_fmadd_pd(aw0, _mm256_loadu_pd(b.data() + i), acc0);
    acc1 = _mm256_fmadd_pd(aw1, _mm256_loadu_pd(b.data() + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d aw = _mm256_mul_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(w.data() + i));
    acc0 = _mm256_fmadd_pd(aw, _mm256_loadu_pd(b.data() + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * w[i] * b[i];
  return s;
}

}  // namespace ncvax::kernels::avx2
