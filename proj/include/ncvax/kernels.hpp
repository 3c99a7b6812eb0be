#pragma once

// Arithmetic inner loops over dataset columns. Every kernel has a scalar
// reference implementation; on x86-64 an AVX2/FMA variant is compiled
// alongside it and chosen at runtime when the CPU supports it. The two
// agree up to floating-point reassociation (exactly, for integer-valued
// columns).

#include <cstddef>
#include <span>
#include <string_view>

namespace ncvax::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

/// Best variant this binary and CPU can run.
Isa detected_isa();

/// Variant currently used by the dispatching entry points. Defaults to
/// detected_isa() unless NCVAX_FORCE_SCALAR is set in the environment.
Isa active_isa();

/// Throws std::invalid_argument if `isa` is not available.
void set_active_isa(Isa isa);

/// Sums over subjects needed by the two-arm closed forms and by Pearson
/// correlation. "t_" prefixed sums are restricted to the treated arm.
struct ArmTotals {
  double n = 0;
  double t = 0;
  double y1 = 0, y2 = 0;
  double y1y1 = 0, y2y2 = 0, y1y2 = 0;
  double t_y1 = 0, t_y2 = 0;
  double t_y1y1 = 0, t_y2y2 = 0, t_y1y2 = 0;

  double control_n() const { return n - t; }
  double c_y1() const { return y1 - t_y1; }
  double c_y2() const { return y2 - t_y2; }
};

ArmTotals arm_totals(std::span<const double> t, std::span<const double> y1,
                     std::span<const double> y2);

/// sum_i a_i b_i
double dot(std::span<const double> a, std::span<const double> b);

/// sum_i a_i w_i b_i
double dot3(std::span<const double> a, std::span<const double> w, std::span<const double> b);

/// Symmetric p x p result (row-major into `out`) of sum_i w_i x_i x_i^T for
/// a column-major n x p matrix `x`.
void weighted_gram(std::span<const double> x, std::size_t n, std::size_t p,
                   std::span<const double> w, std::span<double> out);

namespace scalar {
ArmTotals arm_totals(std::span<const double> t, std::span<const double> y1,
                     std::span<const double> y2);
double dot(std::span<const double> a, std::span<const double> b);
double dot3(std::span<const double> a, std::span<const double> w, std::span<const double> b);
}  // namespace scalar

namespace avx2 {
ArmTotals arm_totals(std::span<const double> t, std::span<const double> y1,
                     std::span<const double> y2);
double dot(std::span<const double> a, std::span<const double> b);
double dot3(std::span<const double> a, std::span<const double> w, std::span<const double> b);
}  // namespace avx2

}  // namespace ncvax::kernels
