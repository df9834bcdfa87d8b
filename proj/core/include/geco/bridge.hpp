#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace geco {

/// Brownian bridge with exponential diffusion (BBED) schedule.
///
/// Forward SDE: dx = (s_hat - x)/(1 - t) dt + c v^t dw, pinned at the clean signal
/// at t = 0 and at the separator estimate s_hat as t -> 1.
struct BridgeConfig {
  double c = 0.51;         ///< diffusion scale
  double v = 2.6;          ///< diffusion base, v > 0 and v != 1
  double T = 0.999;        ///< terminal time, < 1 to keep the drift finite
  double t_eps = 0.03;     ///< smallest training time
  double T_prime = 0.5;    ///< reverse start time
  int M = 30;              ///< reverse steps

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;

  friend bool operator==(const BridgeConfig&, const BridgeConfig&) = default;
};

struct KernelSample {
  std::vector<double> x_t;
  std::vector<double> z_t;
  double t = 0.0;
  double sigma_t = 0.0;
};

/// (s_hat - x_t) / (1 - t). DomainError for t >= 1, ShapeError on length mismatch.
std::vector<double> drift(std::span<const double> x_t, std::span<const double> s_hat, double t);

/// g(t) = c v^t.
double diffusion(double t, const BridgeConfig& cfg);

/// Kernel mean (1 - t) x0 + t s_hat.
std::vector<double> kernel_mean(std::span<const double> x0, std::span<const double> s_hat,
                                double t);

/// Closed-form kernel standard deviation
///   sigma(t)^2 = (1-t) c^2 [ (v^{2t} - 1 + t) + ln(v^{2 v^2}) (1-t) E ]
///   E = Ei(2 (t-1) ln v) - Ei(-2 ln v)
/// with natural logarithms. Radicands in [-1e-12, 0) clamp to zero; anything more
/// negative raises NumericError.
double sigma(double t, const BridgeConfig& cfg);

/// x_t = kernel_mean(x0, s_hat, t) + sigma(t) z, z ~ N(0, I) drawn from `seed`.
/// DomainError unless t lies in [t_eps, T].
KernelSample sample_kernel(std::span<const double> x0, std::span<const double> s_hat, double t,
                           const BridgeConfig& cfg, std::uint64_t seed);

namespace detail {
/// sample_kernel without the [t_eps, T] range check; lets tests probe the pinned ends.
KernelSample sample_kernel_unchecked(std::span<const double> x0, std::span<const double> s_hat,
                                     double t, const BridgeConfig& cfg, std::uint64_t seed);

/// Radicand of sigma(t)^2 before clamping.
double sigma_squared_raw(double t, const BridgeConfig& cfg);
}  // namespace detail

}  // namespace geco
