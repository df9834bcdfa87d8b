#include "geco/specfun.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "geco/errors.hpp"

namespace geco {
namespace detail {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxTerms = 1000;
}  // namespace

double ei_power_series(double x) {
  double sum = 0.0;
  double power = 1.0;  // x^k / k!
  for (int k = 1; k < kMaxTerms; ++k) {
    power *= x / k;
    const double term = power / k;
    sum += term;
    if (std::abs(term) <= kEps * std::abs(sum)) break;
  }
  return kEulerGamma + std::log(std::abs(x)) + sum;
}

double ei_anchored_series(double x) {
  double sum = 0.0;
  double px = 1.0;  // x^k / k!
  double p0 = 1.0;  // x0^k / k!
  for (int k = 1; k < kMaxTerms; ++k) {
    px *= x / k;
    p0 *= kEiRoot / k;
    const double term = (px - p0) / k;
    sum += term;
    if (std::abs(term) <= kEps * std::abs(sum) && px <= kEps * std::abs(sum)) break;
  }
  return std::log1p((x - kEiRoot) / kEiRoot) + sum;
}

double ei_asymptotic(double x) {
  double sum = 1.0;
  double term = 1.0;
  for (int k = 1; k < kMaxTerms; ++k) {
    const double next = term * k / x;
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) <= kEps * std::abs(sum)) break;
  }
  return std::exp(x) / x * sum;
}

double e1_continued_fraction(double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double delta = c * d;
    h *= delta;
    if (std::abs(delta - 1.0) <= kEps) break;
  }
  return h * std::exp(-x);
}

}  // namespace detail

double expint_ei(double x) {
  if (!std::isfinite(x)) throw DomainError("expint_ei: non-finite argument " + std::to_string(x));
  if (x == 0.0) throw DomainError("expint_ei: logarithmic singularity at x = 0");

  if (x > detail::kEiAsymptoticThreshold) return detail::ei_asymptotic(x);
  if (x > 0.0) return detail::ei_anchored_series(x);
  if (x >= detail::kEiNegativeSeriesThreshold) return detail::ei_power_series(x);
  return -detail::e1_continued_fraction(-x);
}

}  // namespace geco
