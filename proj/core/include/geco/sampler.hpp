#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "geco/bridge.hpp"
#include "geco/models.hpp"

namespace geco {

/// score(x_t, s_hat, y, t). Must be safe to call concurrently if samplers run in parallel.
using ScoreFn = std::function<std::vector<double>(std::span<const double> x, std::span<const double> s_hat,
                                                  std::span<const double> y, double t)>;

struct ReverseOptions {
  /// Omit the Brownian term on the step that lands at t = 0.
  bool deterministic_final = false;
  /// Start from s_hat + sigma(T') z; when false the start is s_hat itself.
  bool stochastic_init = true;
  /// Multiplies g(t) inside the step. 0 gives the pure-drift Euler probe.
  double diffusion_scale = 1.0;
};

struct ReverseTrace {
  std::vector<std::vector<double>> states;  ///< x at each grid time, start and end included
  std::vector<double> times;                ///< T' descending to exactly 0
  std::uint64_t seed = 0;
};

struct ReverseResult {
  std::vector<double> x0;
  std::optional<ReverseTrace> trace;
  std::size_t score_evaluations = 0;
};

/// Seeds for the start noise and for the Brownian increment of step i (i = M..1).
std::uint64_t init_noise_seed(std::uint64_t seed);
std::uint64_t step_noise_seed(std::uint64_t seed, int step);

/// x_{T'} = s_hat + sigma(T') z.
std::vector<double> init_reverse(std::span<const double> s_hat, const BridgeConfig& cfg, std::uint64_t seed,
                                 const ReverseOptions& opts = {});

/// One reverse Euler-Maruyama update from t to t - dt:
///   x + [-drift(x, s_hat, t) + g(t)^2 score(x, s_hat, y, t)] dt + g(t) sqrt(dt) z.
/// NumericError on a non-finite score.
std::vector<double> eum_step(std::span<const double> x, std::span<const double> s_hat, std::span<const double> y,
                             double t, double dt, const ScoreFn& score_fn, const BridgeConfig& cfg,
                             std::uint64_t seed, const ReverseOptions& opts = {});

/// Grid time i of an M-step partition of [0, T']: T' (M - i) / M, with the last time exactly 0.
double reverse_grid_time(const BridgeConfig& cfg, int i);

/// M reverse steps over [0, T'] from init_reverse.
ReverseResult reverse_geco(std::span<const double> s_hat, std::span<const double> y, const ScoreFn& score_fn,
                           const BridgeConfig& cfg, std::uint64_t seed, bool keep_trace = false,
                           const ReverseOptions& opts = {});

/// Single step from T' with dt = T'. Same result as reverse_geco with M = 1.
std::vector<double> one_step_fastgeco(std::span<const double> s_hat, std::span<const double> y,
                                      const ScoreFn& score_fn, const BridgeConfig& cfg, std::uint64_t seed,
                                      const ReverseOptions& opts = {});

/// Score function backed by a model. Query times are clamped into [t_eps, T], the range
/// the model was trained on; the last reverse step otherwise asks for t = T'/M.
ScoreFn model_score_fn(const ScoreModel& model);

/// CSV dump: one row per grid time, "t,x[0],x[1],...".
void write_trace_csv(const ReverseTrace& trace, const std::filesystem::path& path);

}  // namespace geco
