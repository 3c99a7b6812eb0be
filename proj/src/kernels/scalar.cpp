#include <cassert>

#include "ncvax/kernels.hpp"

namespace ncvax::kernels::scalar {

ArmTotals arm_totals(std::span<const double> t, std::span<const double> y1,
                     std::span<const double> y2) {
  assert(t.size() == y1.size() && t.size() == y2.size());
  ArmTotals s;
  s.n = static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
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
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double dot3(std::span<const double> a, std::span<const double> w, std::span<const double> b) {
  assert(a.size() == b.size() && a.size() == w.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * w[i] * b[i];
  return s;
}

}  // namespace ncvax::kernels::scalar
