#include "geco/bridge.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "geco/errors.hpp"
#include "geco/rng.hpp"
#include "geco/specfun.hpp"

namespace geco {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size()) {
    std::ostringstream msg;
    msg << op << ": length mismatch (" << a.size() << " vs " << b.size() << ")";
    throw ShapeError(msg.str());
  }
}

}  // namespace

void BridgeConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("bridge config: " + what); };
  if (!(c > 0.0) || !std::isfinite(c)) fail("c must be positive and finite");
  if (!(v > 0.0) || !std::isfinite(v) || v == 1.0) fail("v must be positive, finite and != 1");
  if (!(T > 0.0 && T < 1.0)) fail("T must lie in (0, 1)");
  if (!(t_eps > 0.0 && t_eps < T)) fail("t_eps must lie in (0, T)");
  if (!(T_prime > t_eps && T_prime <= T)) fail("T_prime must lie in (t_eps, T]");
  if (M < 1) fail("M must be >= 1");
}

std::vector<double> drift(std::span<const double> x_t, std::span<const double> s_hat, double t) {
  require_same_length(x_t, s_hat, "drift");
  if (!(t < 1.0)) throw DomainError("drift: t must be < 1, got " + std::to_string(t));
  const double inv = 1.0 / (1.0 - t);
  std::vector<double> out(x_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (s_hat[i] - x_t[i]) * inv;
  return out;
}

double diffusion(double t, const BridgeConfig& cfg) { return cfg.c * std::pow(cfg.v, t); }

std::vector<double> kernel_mean(std::span<const double> x0, std::span<const double> s_hat,
                                double t) {
  require_same_length(x0, s_hat, "kernel_mean");
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - t) * x0[i] + t * s_hat[i];
  return out;
}

namespace detail {

double sigma_squared_raw(double t, const BridgeConfig& cfg) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("sigma: t must lie in [0, 1], got " + std::to_string(t));
  if (t == 0.0 || t == 1.0) return 0.0;
  const double log_v = std::log(cfg.v);
  const double growth = std::expm1(2.0 * t * log_v) + t;
  const double e_term = expint_ei(2.0 * (t - 1.0) * log_v) - expint_ei(-2.0 * log_v);
  const double log_v_pow = 2.0 * cfg.v * cfg.v * log_v;  // ln(v^{2 v^2})
  return (1.0 - t) * cfg.c * cfg.c * (growth + log_v_pow * (1.0 - t) * e_term);
}

KernelSample sample_kernel_unchecked(std::span<const double> x0, std::span<const double> s_hat,
                                     double t, const BridgeConfig& cfg, std::uint64_t seed) {
  KernelSample out;
  out.t = t;
  out.sigma_t = sigma(t, cfg);
  out.x_t = kernel_mean(x0, s_hat, t);
  out.z_t = standard_normal(seed, x0.size());
  for (std::size_t i = 0; i < out.x_t.size(); ++i) out.x_t[i] += out.sigma_t * out.z_t[i];
  return out;
}

}  // namespace detail

double sigma(double t, const BridgeConfig& cfg) {
  const double radicand = detail::sigma_squared_raw(t, cfg);
  if (radicand >= 0.0) return std::sqrt(radicand);
  if (radicand >= -1e-12) return 0.0;
  std::ostringstream msg;
  msg.precision(17);
  msg << "sigma: negative variance " << radicand << " at t = " << t << " (c = " << cfg.c
      << ", v = " << cfg.v << ")";
  throw NumericError(msg.str());
}

KernelSample sample_kernel(std::span<const double> x0, std::span<const double> s_hat, double t,
                           const BridgeConfig& cfg, std::uint64_t seed) {
  if (!(t >= cfg.t_eps && t <= cfg.T)) {
    std::ostringstream msg;
    msg << "sample_kernel: t = " << t << " outside [" << cfg.t_eps << ", " << cfg.T << "]";
    throw DomainError(msg.str());
  }
  return detail::sample_kernel_unchecked(x0, s_hat, t, cfg, seed);
}

}  // namespace geco
