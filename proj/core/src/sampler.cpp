#include "geco/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "geco/errors.hpp"
#include "geco/manifest.hpp"
#include "geco/rng.hpp"

namespace geco {

namespace {

constexpr std::uint64_t kInitTag = 0x1a17;
constexpr std::uint64_t kStepTag = 0x57e9;

void check_lengths(std::span<const double> x, std::span<const double> s_hat, std::span<const double> y) {
  if (x.size() != s_hat.size() || x.size() != y.size()) {
    throw ShapeError("sampler: x, s_hat and y must share one length");
  }
}

}  // namespace

std::uint64_t init_noise_seed(std::uint64_t seed) { return derive_seed(seed, kInitTag); }

std::uint64_t step_noise_seed(std::uint64_t seed, int step) {
  return derive_seed(seed, kStepTag, static_cast<std::uint64_t>(step));
}

std::vector<double> init_reverse(std::span<const double> s_hat, const BridgeConfig& cfg, std::uint64_t seed,
                                 const ReverseOptions& opts) {
  cfg.validate();
  std::vector<double> x(s_hat.begin(), s_hat.end());
  if (!opts.stochastic_init) return x;
  const double s = sigma(cfg.T_prime, cfg);
  const auto z = standard_normal(init_noise_seed(seed), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += s * z[i];
  return x;
}

std::vector<double> eum_step(std::span<const double> x, std::span<const double> s_hat, std::span<const double> y,
                             double t, double dt, const ScoreFn& score_fn, const BridgeConfig& cfg,
                             std::uint64_t seed, const ReverseOptions& opts) {
  check_lengths(x, s_hat, y);
  if (!(dt > 0.0) || !(t - dt >= -1e-12)) {
    std::ostringstream msg;
    msg << "eum_step: need dt > 0 and t - dt >= 0, got t = " << t << ", dt = " << dt;
    throw DomainError(msg.str());
  }
  const std::vector<double> score = score_fn(x, s_hat, y, t);
  if (score.size() != x.size()) throw ShapeError("eum_step: score length differs from state length");
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (!std::isfinite(score[i])) {
      std::ostringstream msg;
      msg << "eum_step: non-finite score at t = " << t << " (element " << i << ")";
      throw NumericError(msg.str());
    }
  }

  const double g = opts.diffusion_scale * diffusion(t, cfg);
  const double g2 = g * g;
  const double inv_1mt = 1.0 / (1.0 - t);
  const bool lands_at_zero = std::abs(t - dt) <= 1e-12;
  const bool brownian = g != 0.0 && !(opts.deterministic_final && lands_at_zero);

  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double drift = (s_hat[i] - x[i]) * inv_1mt;
    out[i] = x[i] + (-drift + g2 * score[i]) * dt;
  }
  if (brownian) {
    const double amp = g * std::sqrt(dt);
    const auto z = standard_normal(seed, x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += amp * z[i];
  }
  return out;
}

double reverse_grid_time(const BridgeConfig& cfg, int i) {
  if (i < 0 || i > cfg.M) throw DomainError("reverse_grid_time: index outside [0, M]");
  if (i == cfg.M) return 0.0;
  return cfg.T_prime * static_cast<double>(cfg.M - i) / static_cast<double>(cfg.M);
}

ReverseResult reverse_geco(std::span<const double> s_hat, std::span<const double> y, const ScoreFn& score_fn,
                           const BridgeConfig& cfg, std::uint64_t seed, bool keep_trace,
                           const ReverseOptions& opts) {
  cfg.validate();
  if (s_hat.size() != y.size()) throw ShapeError("reverse_geco: s_hat and y must share one length");

  ReverseResult result;
  std::size_t evaluations = 0;
  const ScoreFn counted = [&](std::span<const double> x, std::span<const double> s, std::span<const double> yy,
                              double t) {
    ++evaluations;
    return score_fn(x, s, yy, t);
  };

  std::vector<double> x = init_reverse(s_hat, cfg, seed, opts);
  if (keep_trace) {
    result.trace.emplace();
    result.trace->seed = seed;
    result.trace->states.push_back(x);
    result.trace->times.push_back(reverse_grid_time(cfg, 0));
  }
  const double dt = cfg.T_prime / static_cast<double>(cfg.M);
  for (int i = cfg.M; i >= 1; --i) {
    const double t = reverse_grid_time(cfg, cfg.M - i);
    try {
      x = eum_step(x, s_hat, y, t, dt, counted, cfg, step_noise_seed(seed, i), opts);
    } catch (const NumericError& e) {
      std::ostringstream msg;
      msg << "reverse step " << (cfg.M - i + 1) << " of " << cfg.M << ": " << e.what();
      throw NumericError(msg.str());
    }
    if (keep_trace) {
      result.trace->states.push_back(x);
      result.trace->times.push_back(reverse_grid_time(cfg, cfg.M - i + 1));
    }
  }
  result.x0 = std::move(x);
  result.score_evaluations = evaluations;
  return result;
}

std::vector<double> one_step_fastgeco(std::span<const double> s_hat, std::span<const double> y,
                                      const ScoreFn& score_fn, const BridgeConfig& cfg, std::uint64_t seed,
                                      const ReverseOptions& opts) {
  cfg.validate();
  if (s_hat.size() != y.size()) throw ShapeError("one_step_fastgeco: s_hat and y must share one length");
  const std::vector<double> x = init_reverse(s_hat, cfg, seed, opts);
  return eum_step(x, s_hat, y, cfg.T_prime, cfg.T_prime, score_fn, cfg, step_noise_seed(seed, 1), opts);
}

ScoreFn model_score_fn(const ScoreModel& model) {
  return [&model](std::span<const double> x, std::span<const double> s_hat, std::span<const double> y, double t) {
    const double tq = std::clamp(t, model.bridge.t_eps, model.bridge.T);
    return score_forward(model, x, s_hat, y, tq);
  };
}

void write_trace_csv(const ReverseTrace& trace, const std::filesystem::path& path) {
  std::ostringstream out;
  out.precision(17);
  out << "# seed=" << trace.seed << "\n";
  for (std::size_t r = 0; r < trace.times.size(); ++r) {
    out << trace.times[r];
    for (double v : trace.states[r]) out << ',' << v;
    out << '\n';
  }
  atomic_write_text(path, out.str());
}

}  // namespace geco
