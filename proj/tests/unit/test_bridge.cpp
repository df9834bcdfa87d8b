#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "geco/bridge.hpp"
#include "geco/errors.hpp"
#include "geco/rng.hpp"
#include "geco/specfun.hpp"
#include "oracles.hpp"

namespace {

using geco::BridgeConfig;
using geco::testing::bridge_sigma_quadrature;

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

TEST(Drift, FixedPointIsZero) {
  const std::vector<double> x{0.3, -1.2, 4.0};
  for (double d : geco::drift(x, x, 0.7)) EXPECT_EQ(d, 0.0);
}

TEST(Drift, DirectSubstitution) {
  const std::vector<double> x{0.0}, s{1.0};
  EXPECT_DOUBLE_EQ(geco::drift(x, s, 0.5)[0], 2.0);
}

TEST(Drift, NearTerminalTimeMatchesScalarArithmetic) {
  geco::Rng rng(11);
  std::vector<double> x(64), s(64);
  geco::fill_standard_normal(rng, x);
  geco::fill_standard_normal(rng, s);
  const auto d = geco::drift(x, s, 0.999);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double want = (s[i] - x[i]) * 1000.0;
    EXPECT_NEAR(d[i], want, 1e-9 * std::abs(want));
  }
}

TEST(Drift, Errors) {
  const std::vector<double> a{1.0, 2.0}, b{1.0};
  EXPECT_THROW(geco::drift(a, b, 0.2), geco::ShapeError);
  EXPECT_THROW(geco::drift(a, a, 1.0), geco::DomainError);
  EXPECT_THROW(geco::drift(a, a, 1.5), geco::DomainError);
}

TEST(Diffusion, Endpoints) {
  const BridgeConfig cfg;
  EXPECT_DOUBLE_EQ(geco::diffusion(0.0, cfg), 0.51);
  EXPECT_NEAR(geco::diffusion(1.0, cfg), 1.326, 1e-12);
  EXPECT_NEAR(geco::diffusion(0.5, cfg), 0.51 * std::sqrt(2.6), 1e-15);
}

TEST(KernelMean, PinsAndConvexCombination) {
  const std::vector<double> x0{0.0, 4.0}, s{4.0, 0.0};
  EXPECT_EQ(geco::kernel_mean(x0, s, 0.0), x0);
  EXPECT_EQ(geco::kernel_mean(x0, s, 1.0), s);
  const auto m = geco::kernel_mean(x0, s, 0.25);
  EXPECT_DOUBLE_EQ(m[0], 1.0);
  EXPECT_DOUBLE_EQ(m[1], 3.0);
  EXPECT_THROW(geco::kernel_mean(x0, std::vector<double>{1.0}, 0.5), geco::ShapeError);
}

TEST(BridgeConfigTest, DefaultsAndValidation) {
  const BridgeConfig cfg;
  EXPECT_EQ(cfg.T, 0.999);
  EXPECT_EQ(cfg.t_eps, 0.03);
  EXPECT_EQ(cfg.v, 2.6);
  EXPECT_EQ(cfg.c, 0.51);
  EXPECT_EQ(cfg.T_prime, 0.5);
  EXPECT_EQ(cfg.M, 30);
  EXPECT_NO_THROW(cfg.validate());

  auto bad = cfg;
  bad.v = 1.0;
  EXPECT_THROW(bad.validate(), geco::ConfigError);
  bad = cfg;
  bad.T_prime = 0.02;
  EXPECT_THROW(bad.validate(), geco::ConfigError);
  bad = cfg;
  bad.T = 1.0;
  EXPECT_THROW(bad.validate(), geco::ConfigError);
  bad = cfg;
  bad.M = 0;
  EXPECT_THROW(bad.validate(), geco::ConfigError);
  bad = cfg;
  bad.c = -0.1;
  EXPECT_THROW(bad.validate(), geco::ConfigError);
}

TEST(Sigma, PinnedAtBothEnds) {
  const BridgeConfig cfg;
  EXPECT_EQ(geco::sigma(0.0, cfg), 0.0);
  EXPECT_EQ(geco::sigma(1.0, cfg), 0.0);
  EXPECT_THROW(geco::sigma(-0.1, cfg), geco::DomainError);
  EXPECT_THROW(geco::sigma(1.1, cfg), geco::DomainError);
}

TEST(Sigma, MatchesQuadratureAtMidpoint) {
  const BridgeConfig cfg;
  const double want = bridge_sigma_quadrature(0.5, cfg.c, cfg.v);
  EXPECT_NEAR(geco::sigma(0.5, cfg), want, 1e-8 * want);
}

TEST(Sigma, MatchesQuadratureOnGrid) {
  for (const BridgeConfig cfg : {BridgeConfig{}, BridgeConfig{.c = 0.3, .v = 0.6},
                                 BridgeConfig{.c = 1.2, .v = 5.0}}) {
    for (int i = 0; i < 50; ++i) {
      const double t = 0.01 + i * (0.99 - 0.01) / 49.0;
      const double want = bridge_sigma_quadrature(t, cfg.c, cfg.v);
      EXPECT_LE(std::abs(geco::sigma(t, cfg) - want), 1e-8 * std::max(want, 1e-6))
          << "t = " << t << " c = " << cfg.c << " v = " << cfg.v;
    }
  }
}

TEST(Sigma, Base10LogarithmReadingFailsQuadrature) {
  // Same closed form with log10 in place of ln: must disagree with the variance integral.
  const BridgeConfig cfg;
  const double t = 0.5;
  const double l10 = std::log10(cfg.v);
  auto ei = [](double x) { return geco::expint_ei(x); };
  const double e_term = ei(2.0 * (t - 1.0) * l10) - ei(-2.0 * l10);
  const double radicand = (1.0 - t) * cfg.c * cfg.c *
                          ((std::pow(cfg.v, 2 * t) - 1.0 + t) +
                           2.0 * cfg.v * cfg.v * l10 * (1.0 - t) * e_term);
  const double base10 = std::sqrt(std::max(radicand, 0.0));
  const double want = bridge_sigma_quadrature(t, cfg.c, cfg.v);
  EXPECT_GT(std::abs(base10 - want), 1e-3 * want);
}

TEST(Sigma, ContinuousOnUnitInterval) {
  // sigma behaves like c sqrt(t) at the left pin and c v sqrt(1 - t) at the right pin,
  // so adjacent differences near the pins scale with sqrt(h). Check the relative jump
  // bound on the range the process uses, and a square-root modulus on all of [0, 1].
  const BridgeConfig cfg;
  constexpr int kGrid = 10000;
  const double h = 1.0 / kGrid;
  double prev = geco::sigma(0.0, cfg);
  double max_sigma = prev;
  double max_jump_used = 0.0;
  double max_jump_all = 0.0;
  for (int i = 1; i <= kGrid; ++i) {
    const double t = static_cast<double>(i) / kGrid;
    const double s = geco::sigma(t, cfg);
    ASSERT_TRUE(std::isfinite(s));
    ASSERT_GE(s, 0.0);
    const double jump = std::abs(s - prev);
    max_jump_all = std::max(max_jump_all, jump);
    if (t - h >= cfg.t_eps && t <= cfg.T) max_jump_used = std::max(max_jump_used, jump);
    max_sigma = std::max(max_sigma, s);
    prev = s;
  }
  EXPECT_LT(max_jump_used, 1e-2 * max_sigma);
  EXPECT_LE(max_jump_all, 1.01 * cfg.c * std::max(1.0, cfg.v) * std::sqrt(h));
}

TEST(SampleKernel, ZeroNoiseAtPinnedStart) {
  const BridgeConfig cfg;
  const std::vector<double> x0{0.25, -0.5, 1.0}, s{3.0, 2.0, 1.0};
  const auto ks = geco::detail::sample_kernel_unchecked(x0, s, 0.0, cfg, 5);
  EXPECT_EQ(ks.sigma_t, 0.0);
  EXPECT_EQ(ks.x_t, x0);
}

TEST(SampleKernel, DeterministicPerSeed) {
  const BridgeConfig cfg;
  const std::vector<double> x0{0.25, -0.5, 1.0}, s{3.0, 2.0, 1.0};
  const auto a = geco::sample_kernel(x0, s, 0.4, cfg, 1234);
  const auto b = geco::sample_kernel(x0, s, 0.4, cfg, 1234);
  EXPECT_EQ(a.x_t, b.x_t);
  EXPECT_EQ(a.z_t, b.z_t);
  EXPECT_EQ(a.sigma_t, b.sigma_t);
  EXPECT_EQ(a.sigma_t, geco::sigma(0.4, cfg));
  const auto c = geco::sample_kernel(x0, s, 0.4, cfg, 1235);
  EXPECT_NE(a.z_t, c.z_t);
}

TEST(SampleKernel, RejectsTimesOutsideTrainingRange) {
  const BridgeConfig cfg;
  const std::vector<double> x{0.0};
  EXPECT_THROW(geco::sample_kernel(x, x, 0.01, cfg, 1), geco::DomainError);
  EXPECT_THROW(geco::sample_kernel(x, x, 0.9995, cfg, 1), geco::DomainError);
  EXPECT_NO_THROW(geco::sample_kernel(x, x, cfg.t_eps, cfg, 1));
  EXPECT_NO_THROW(geco::sample_kernel(x, x, cfg.T, cfg, 1));
}

TEST(SampleKernel, MonteCarloMomentsMatchClosedForm) {
  const BridgeConfig cfg;
  constexpr std::size_t kDraws = 100000;
  const std::vector<double> x0(kDraws, 0.3), s(kDraws, -0.2);
  const auto ks = geco::sample_kernel(x0, s, 0.5, cfg, 99);
  const Moments m = moments(ks.x_t);
  const double sig = geco::sigma(0.5, cfg);
  const double se_mean = sig / std::sqrt(static_cast<double>(kDraws));
  const double se_std = sig / std::sqrt(2.0 * kDraws);
  EXPECT_NEAR(m.mean, 0.5 * 0.3 + 0.5 * -0.2, 3.0 * se_mean);
  EXPECT_NEAR(m.stddev, sig, 3.0 * se_std);
}

TEST(ForwardSde, EulerSimulationMatchesKernelReduced) {
  // Smaller run of the acceptance check: 4000 paths, 4000 steps on [0, 0.5].
  const BridgeConfig cfg;
  constexpr int kPaths = 4000;
  constexpr int kSteps = 4000;
  const double x0 = 0.8, s_hat = -0.4, t_end = 0.5;
  const double dt = t_end / kSteps;
  std::vector<double> x(kPaths, x0);
  geco::Rng rng(2024);
  std::normal_distribution<double> nd;
  for (int k = 0; k < kSteps; ++k) {
    const double t = k * dt;
    const double g = geco::diffusion(t, cfg);
    for (auto& xi : x) xi += (s_hat - xi) / (1.0 - t) * dt + g * std::sqrt(dt) * nd(rng);
  }
  const Moments m = moments(x);
  const double sig = geco::sigma(t_end, cfg);
  EXPECT_NEAR(m.mean, 0.5 * x0 + 0.5 * s_hat, 3.0 * sig / std::sqrt(double(kPaths)));
  EXPECT_NEAR(m.stddev, sig, 3.0 * sig / std::sqrt(2.0 * kPaths));
}

}  // namespace
