#pragma once

namespace geco {

/// Euler-Mascheroni constant (20 significant digits).
inline constexpr double kEulerGamma = 0.57721566490153286061;

/// Positive root of Ei (Ramanujan-Soldner constant, ln mu).
inline constexpr double kEiRoot = 0.37250741078136663446;

/// Exponential integral Ei(x) = PV integral of e^t/t over (-inf, x].
///
/// Evaluation:
///   x > 40           asymptotic series e^x/x * sum k!/x^k, truncated at the smallest term
///   0 < x <= 40      power series, re-anchored at the positive root so values near
///                    the zero crossing keep full relative accuracy
///   -1 <= x < 0      power series gamma + ln|x| + sum x^k/(k k!)
///   x < -1           continued fraction for E1(-x); Ei(x) = -E1(-x)
///
/// Throws DomainError for x == 0 or non-finite x.
double expint_ei(double x);

namespace detail {

inline constexpr double kEiAsymptoticThreshold = 40.0;
inline constexpr double kEiNegativeSeriesThreshold = -1.0;

/// gamma + ln|x| + sum_{k>=1} x^k / (k k!). Valid for any x != 0, accurate where
/// the alternating terms do not cancel (|x| small or x > 0).
double ei_power_series(double x);

/// ln(x/x0) + sum_{k>=1} (x^k - x0^k) / (k k!), x > 0.
double ei_anchored_series(double x);

/// e^x/x * sum_{k>=0} k!/x^k truncated before the terms start to grow. x > 0.
double ei_asymptotic(double x);

/// E1(x) for x > 0 by modified Lentz evaluation of the continued fraction.
double e1_continued_fraction(double x);

}  // namespace detail
}  // namespace geco
