#include "geco/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "geco/errors.hpp"
#include "geco/metrics.hpp"
#include "geco/rng.hpp"

namespace geco {

namespace {

constexpr std::uint64_t kShuffleTag = 0x5f1e;
constexpr std::uint64_t kDsmTag = 0xd5a;
constexpr std::uint64_t kFinetuneTag = 0xf7e;
constexpr std::uint64_t kValidationTag = 0x7a1;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::vector<double>> references(const MixtureExample& ex) {
  std::vector<std::vector<double>> out;
  for (const auto& s : ex.sources) out.push_back(s.samples);
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kShuffleTag, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

bool validates_this_epoch(const TrainConfig& cfg, int epoch) {
  return (epoch + 1) % cfg.validate_every == 0 || epoch + 1 == cfg.epochs;
}

[[noreturn]] void diverged(const char* who, int epoch, std::size_t step) {
  std::ostringstream msg;
  msg << who << ": non-finite loss at epoch " << epoch + 1 << ", step " << step;
  throw NumericError(msg.str());
}

/// Averages the batch gradient, clips, and applies Adam.
void apply_step(std::vector<double>& params, std::vector<double>& grad, double count, AdamState& adam,
                const TrainConfig& cfg, const char* who, int epoch, std::size_t step) {
  for (double& g : grad) g /= count;
  const double norm = clip_grad_norm(grad, cfg.grad_clip);
  if (!std::isfinite(norm)) diverged(who, epoch, step);
  adam_update(params, grad, adam, cfg.lr);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("train: ema_decay must lie in [0, 1)");
  if (!(grad_clip > 0.0)) throw ConfigError("train: grad_clip must be > 0");
  if (validate_every < 1) throw ConfigError("train: validate_every must be >= 1");
}

bool TrainReport::same_outcome(const TrainReport& o) const {
  auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!(a[i] == b[i] || (std::isnan(a[i]) && std::isnan(b[i])))) return false;
    }
    return true;
  };
  return same(epoch_loss, o.epoch_loss) && same(validation, o.validation) &&
         validation_metric == o.validation_metric && best_epoch == o.best_epoch && steps == o.steps;
}

void adam_update(std::span<double> params, std::span<const double> grad, AdamState& state, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (params.size() != grad.size()) throw ShapeError("adam_update: length mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grad[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + eps);
  }
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

// ---------------------------------------------------------------------------------------

ResolvedEstimates resolve_estimates(const SeparatorModel& separator, const MixtureExample& example) {
  auto raw = separator_forward(separator, example.mixture.samples);
  const PitResult pit = pit_assign(raw, references(example));
  ResolvedEstimates out;
  out.permutation = pit.permutation;
  for (int idx : pit.permutation) out.estimates.push_back(raw[static_cast<std::size_t>(idx)]);
  return out;
}

double mean_separator_sisnri(const SeparatorModel& separator, std::span<const MixtureExample> data) {
  if (data.empty()) throw ShapeError("mean_separator_sisnri: empty data");
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& ex : data) {
    const auto r = resolve_estimates(separator, ex);
    for (std::size_t k = 0; k < ex.sources.size(); ++k) {
      sum += si_snr_improvement(r.estimates[k], ex.sources[k].samples, ex.mixture.samples);
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

SeparatorTraining train_separator(std::span<const MixtureExample> data, SeparatorModel model,
                                  const TrainConfig& cfg, std::span<const MixtureExample> validation) {
  cfg.validate();
  validate(model);
  if (data.empty()) throw ShapeError("train_separator: no training data");
  if (validation.empty()) validation = data;
  const auto start = Clock::now();

  SeparatorTraining out{model, {}};
  out.report.validation_metric = "si_snri_db";
  double best = -std::numeric_limits<double>::infinity();
  AdamState adam;
  std::vector<double> grad(model.params.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t j = b0; j < b1; ++j) {
        const auto& ex = data[order[j]];
        SeparatorTapePtr tape;
        const auto est = separator_forward(model, ex.mixture.samples, tape);
        std::vector<std::vector<double>> d_est;
        const double loss = pit_loss_with_grad(est, references(ex), d_est);
        if (!std::isfinite(loss)) diverged("train_separator", epoch, out.report.steps);
        loss_sum += loss;
        const auto g = separator_backward(model, *tape, d_est);
        for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
      }
      apply_step(model.params, grad, static_cast<double>(b1 - b0), adam, cfg, "train_separator", epoch,
                 out.report.steps);
      ++out.report.steps;
    }
    out.report.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));

    double metric = std::numeric_limits<double>::quiet_NaN();
    if (validates_this_epoch(cfg, epoch)) {
      metric = mean_separator_sisnri(model, validation);
      if (metric > best) {
        best = metric;
        out.model = model;
        out.report.best_epoch = epoch;
      }
    }
    out.report.validation.push_back(metric);
  }
  out.report.wall_seconds = seconds_since(start);
  return out;
}

// ---------------------------------------------------------------------------------------

DsmSample draw_dsm_sample(const MixtureExample& example, const ResolvedEstimates& resolved,
                          const BridgeConfig& bridge, std::uint64_t seed) {
  const std::size_t K = example.sources.size();
  if (resolved.estimates.size() != K) throw ShapeError("draw_dsm_sample: estimates do not match sources");
  Rng rng(seed);
  DsmSample s;
  s.speaker = std::uniform_int_distribution<std::size_t>(0, K - 1)(rng);
  s.permutation = resolved.permutation;
  std::uniform_real_distribution<double> ut(bridge.t_eps, bridge.T);
  s.t = ut(rng);
  while (sigma(s.t, bridge) < 1e-6) {
    if (++s.t_retries > 10) throw NumericError("draw_dsm_sample: sigma(t) < 1e-6 after 10 redraws");
    s.t = ut(rng);
  }
  s.s_hat = resolved.estimates[s.speaker];
  auto kernel = sample_kernel(example.sources[s.speaker].samples, s.s_hat, s.t, bridge, rng());
  s.x_t = std::move(kernel.x_t);
  s.z = std::move(kernel.z_t);
  s.sigma_t = kernel.sigma_t;
  return s;
}

double dsm_loss(const ScoreFn& score_fn, const MixtureExample& example, const DsmSample& sample) {
  const auto score = score_fn(sample.x_t, sample.s_hat, example.mixture.samples, sample.t);
  if (score.size() != sample.z.size()) throw ShapeError("dsm_loss: score length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    const double r = score[i] + sample.z[i] / sample.sigma_t;
    loss += r * r;
  }
  return loss / static_cast<double>(score.size());
}

double dsm_loss(const ScoreModel& model, const MixtureExample& example, const DsmSample& sample,
                std::vector<double>* grad) {
  ScoreTapePtr tape;
  const auto score = score_forward(model, sample.x_t, sample.s_hat, example.mixture.samples, sample.t, tape);
  const double n = static_cast<double>(score.size());
  double loss = 0.0;
  std::vector<double> d(score.size());
  for (std::size_t i = 0; i < score.size(); ++i) {
    const double r = score[i] + sample.z[i] / sample.sigma_t;
    loss += r * r;
    d[i] = 2.0 * r / n;
  }
  if (grad) *grad = score_backward(model, *tape, d);
  return loss / n;
}

double dsm_step(const ScoreModel& score_model, const MixtureExample& example, const SeparatorModel& separator,
                std::uint64_t seed) {
  const auto resolved = resolve_estimates(separator, example);
  return dsm_loss(score_model, example, draw_dsm_sample(example, resolved, score_model.bridge, seed), nullptr);
}

GecoTraining train_geco(std::span<const MixtureExample> data, ScoreModel score_model,
                        const SeparatorModel& separator, const TrainConfig& cfg,
                        std::span<const MixtureExample> validation) {
  cfg.validate();
  validate(score_model);
  validate(separator);
  if (data.empty()) throw ShapeError("train_geco: no training data");
  if (validation.empty()) validation = data;
  const auto start = Clock::now();

  // The separator is frozen, so its uPIT-resolved outputs are computed once.
  std::vector<ResolvedEstimates> resolved;
  for (const auto& ex : data) resolved.push_back(resolve_estimates(separator, ex));
  std::vector<ResolvedEstimates> val_resolved;
  for (const auto& ex : validation) val_resolved.push_back(resolve_estimates(separator, ex));

  GecoTraining out{score_model, ema_init(score_model.params, cfg.ema_decay), {}};
  out.report.validation_metric = "dsm_loss";
  AdamState adam;
  std::vector<double> grad(score_model.params.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      const std::uint64_t step_seed = derive_seed(cfg.seed, kDsmTag, out.report.steps);
      for (std::size_t j = b0; j < b1; ++j) {
        const std::size_t idx = order[j];
        const auto sample = draw_dsm_sample(data[idx], resolved[idx], score_model.bridge, derive_seed(step_seed, 0, j));
        std::vector<double> g;
        const double loss = dsm_loss(score_model, data[idx], sample, &g);
        if (!std::isfinite(loss)) diverged("train_geco", epoch, out.report.steps);
        loss_sum += loss;
        for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
      }
      apply_step(score_model.params, grad, static_cast<double>(b1 - b0), adam, cfg, "train_geco", epoch,
                 out.report.steps);
      ema_update_in_place(out.ema, score_model.params);
      ++out.report.steps;
    }
    out.report.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));

    double metric = std::numeric_limits<double>::quiet_NaN();
    if (validates_this_epoch(cfg, epoch)) {
      const ScoreModel shadow = ema_swap_in(out.ema, score_model);
      double sum = 0.0;
      for (std::size_t i = 0; i < validation.size(); ++i) {
        const auto sample = draw_dsm_sample(validation[i], val_resolved[i], shadow.bridge,
                                            derive_seed(cfg.seed, kValidationTag, i));
        sum += dsm_loss(shadow, validation[i], sample, nullptr);
      }
      metric = sum / static_cast<double>(validation.size());
    }
    out.report.validation.push_back(metric);
  }
  out.model = std::move(score_model);
  out.report.best_epoch = cfg.epochs - 1;
  out.report.wall_seconds = seconds_since(start);
  return out;
}

// ---------------------------------------------------------------------------------------

double fastgeco_loss(const ScoreModel& model, std::span<const double> s_hat, std::span<const double> y,
                     std::span<const double> reference, std::uint64_t seed, std::vector<double>* grad,
                     const ReverseOptions& opts) {
  const BridgeConfig& bridge = model.bridge;
  const std::vector<double> x = init_reverse(s_hat, bridge, seed, opts);
  ScoreTapePtr tape;
  const ScoreFn recorded = [&](std::span<const double> xx, std::span<const double> s, std::span<const double> yy,
                               double t) {
    return score_forward(model, xx, s, yy, std::clamp(t, bridge.t_eps, bridge.T), tape);
  };
  const auto x0 = eum_step(x, s_hat, y, bridge.T_prime, bridge.T_prime, recorded, bridge,
                           step_noise_seed(seed, 1), opts);
  std::vector<double> d_x0(x0.size());
  const double value = si_snr_with_grad(x0, reference, d_x0);
  if (grad) {
    // x0 depends on the parameters only through T' g(T')^2 score.
    const double g = opts.diffusion_scale * diffusion(bridge.T_prime, bridge);
    const double factor = -bridge.T_prime * g * g;
    for (double& d : d_x0) d *= factor;
    *grad = score_backward(model, *tape, d_x0);
  }
  return -value;
}

double mean_one_step_sisnri(const ScoreModel& model, const SeparatorModel& separator,
                            std::span<const MixtureExample> data, std::uint64_t seed) {
  if (data.empty()) throw ShapeError("mean_one_step_sisnri: empty data");
  const ScoreFn fn = model_score_fn(model);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data[i];
    const auto r = resolve_estimates(separator, ex);
    for (std::size_t k = 0; k < ex.sources.size(); ++k) {
      const auto x0 = one_step_fastgeco(r.estimates[k], ex.mixture.samples, fn, model.bridge, derive_seed(seed, i, k));
      sum += si_snr_improvement(x0, ex.sources[k].samples, ex.mixture.samples);
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

FastGecoTraining finetune_fastgeco(std::span<const MixtureExample> data, ScoreModel score_model,
                                   const SeparatorModel& separator, const TrainConfig& cfg,
                                   std::span<const MixtureExample> validation, const FinetuneConfig& ft) {
  cfg.validate();
  validate(score_model);
  validate(separator);
  if (data.empty()) throw ShapeError("finetune_fastgeco: no training data");
  if (validation.empty()) validation = data;
  const auto start = Clock::now();

  std::vector<ResolvedEstimates> resolved;
  for (const auto& ex : data) resolved.push_back(resolve_estimates(separator, ex));

  FastGecoTraining out{score_model, {}};
  out.report.validation_metric = "si_snri_db";
  double best = -std::numeric_limits<double>::infinity();
  AdamState adam;
  std::vector<double> grad(score_model.params.size());
  const std::uint64_t val_seed = derive_seed(cfg.seed, kValidationTag);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t terms = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      const std::uint64_t step_seed = derive_seed(cfg.seed, kFinetuneTag, ft.fresh_noise ? out.report.steps : 0);
      std::size_t batch_terms = 0;
      for (std::size_t j = b0; j < b1; ++j) {
        const std::size_t idx = order[j];
        const auto& ex = data[idx];
        for (std::size_t k = 0; k < ex.sources.size(); ++k) {
          const std::uint64_t seed = ft.fresh_noise ? derive_seed(step_seed, j, k) : derive_seed(step_seed, idx, k);
          std::vector<double> g;
          const double loss = fastgeco_loss(score_model, resolved[idx].estimates[k], ex.mixture.samples,
                                            ex.sources[k].samples, seed, &g);
          if (!std::isfinite(loss)) diverged("finetune_fastgeco", epoch, out.report.steps);
          loss_sum += loss;
          ++terms;
          ++batch_terms;
          for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
        }
      }
      apply_step(score_model.params, grad, static_cast<double>(batch_terms), adam, cfg, "finetune_fastgeco",
                 epoch, out.report.steps);
      ++out.report.steps;
    }
    out.report.epoch_loss.push_back(loss_sum / static_cast<double>(terms));

    double metric = std::numeric_limits<double>::quiet_NaN();
    if (validates_this_epoch(cfg, epoch)) {
      metric = mean_one_step_sisnri(score_model, separator, validation, val_seed);
      if (metric > best) {
        best = metric;
        out.model = score_model;
        out.report.best_epoch = epoch;
      }
    }
    out.report.validation.push_back(metric);
  }
  out.report.wall_seconds = seconds_since(start);
  return out;
}

}  // namespace geco
