#include "survbench/special.hpp"

#include <cmath>

namespace survbench {

namespace {

/// Continued fraction for the incomplete beta (modified Lentz).
Scalar beta_continued_fraction(Scalar a, Scalar b, Scalar x) {
  constexpr int kMaxIter = 500;
  constexpr Scalar kTiny = 1e-300;
  constexpr Scalar kEps = 1e-15;

  const Scalar qab = a + b;
  const Scalar qap = a + 1.0;
  const Scalar qam = a - 1.0;
  Scalar c = 1.0;
  Scalar d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  Scalar h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const Scalar m2 = 2.0 * m;
    Scalar aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const Scalar del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

Scalar incomplete_beta(Scalar a, Scalar b, Scalar x) {
  if (!(a > 0) || !(b > 0)) throw ValidationError("incomplete_beta: a,b must be > 0");
  if (x < 0 || x > 1) throw ValidationError("incomplete_beta: x must lie in [0,1]");
  if (x == 0) return 0;
  if (x == 1) return 1;

  const Scalar ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  // The continued fraction converges fast for x < (a+1)/(a+b+2); use the
  // symmetry I_x(a,b) = 1 - I_{1-x}(b,a) otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(ln_front) * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(ln_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

Scalar student_t_two_sided_p(Scalar t, Scalar df) {
  if (!(df > 0)) throw ValidationError("student_t: df must be > 0");
  if (std::isinf(t)) return 0;
  const Scalar x = df / (df + t * t);
  return incomplete_beta(0.5 * df, 0.5, x);
}

Scalar chi_square_upper_tail_1df(Scalar x) {
  if (x < 0) throw ValidationError("chi_square: statistic must be >= 0");
  return std::erfc(std::sqrt(0.5 * x));
}

}  // namespace survbench
