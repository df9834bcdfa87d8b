#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "geco/audio.hpp"
#include "geco/models.hpp"
#include "geco/sampler.hpp"

namespace geco {

struct TrainConfig {
  double lr = 1e-4;
  int epochs = 10;
  int batch_size = 8;
  std::uint64_t seed = 0;
  double ema_decay = 0.999;
  double grad_clip = 5.0;  ///< max global L2 norm
  int validate_every = 1;  ///< epochs between validation passes (the last epoch always validates)

  void validate() const;  ///< ConfigError
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainReport {
  std::vector<double> epoch_loss;   ///< mean training loss per epoch
  std::vector<double> validation;   ///< per-epoch validation metric (NaN when skipped)
  std::string validation_metric;    ///< "si_snri_db" or "dsm_loss"
  int best_epoch = -1;              ///< epoch whose parameters were kept (0-based)
  std::size_t steps = 0;
  double wall_seconds = 0.0;
  std::string checkpoint;           ///< filled in by whoever persists the result

  /// Equality ignoring wall-clock time.
  bool same_outcome(const TrainReport& o) const;
};

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
struct AdamState {
  std::vector<double> m, v;
  std::size_t step = 0;
};

void adam_update(std::span<double> params, std::span<const double> grad, AdamState& state, double lr);

/// Scales `grad` in place to L2 norm `max_norm` if larger; returns the norm before clipping.
double clip_grad_norm(std::span<double> grad, double max_norm);

// ---------------------------------------------------------------------------------------
// Separator

/// Separator estimates reordered so that entry k pairs with source k under uPIT.
struct ResolvedEstimates {
  std::vector<std::vector<double>> estimates;
  std::vector<int> permutation;  ///< pit_assign(raw outputs, sources).permutation
};

ResolvedEstimates resolve_estimates(const SeparatorModel& separator, const MixtureExample& example);

/// Mean uPIT SI-SNRi (dB) over all examples and sources.
double mean_separator_sisnri(const SeparatorModel& separator, std::span<const MixtureExample> data);

struct SeparatorTraining {
  SeparatorModel model;  ///< best-validation parameters
  TrainReport report;
};

/// Minimises the uPIT loss. `validation` defaults to the training data when empty.
SeparatorTraining train_separator(std::span<const MixtureExample> data, SeparatorModel model,
                                  const TrainConfig& cfg, std::span<const MixtureExample> validation = {});

// ---------------------------------------------------------------------------------------
// Denoising score matching

struct DsmSample {
  std::size_t speaker = 0;
  std::vector<int> permutation;  ///< uPIT permutation used to pair s_hat with the source
  std::vector<double> s_hat, x_t, z;
  double t = 0.0;
  double sigma_t = 0.0;
  std::size_t t_retries = 0;
};

/// Speaker drawn uniformly, t ~ U[t_eps, T] (redrawn while sigma(t) < 1e-6, at most 10
/// times), x_t from the kernel around the paired source.
DsmSample draw_dsm_sample(const MixtureExample& example, const ResolvedEstimates& resolved,
                          const BridgeConfig& bridge, std::uint64_t seed);

/// mean((score + z / sigma)^2) for an arbitrary score function.
double dsm_loss(const ScoreFn& score_fn, const MixtureExample& example, const DsmSample& sample);

/// Same loss for the model, optionally with its parameter gradient.
double dsm_loss(const ScoreModel& model, const MixtureExample& example, const DsmSample& sample,
                std::vector<double>* grad);

/// One DSM evaluation: resolve the separator, draw a sample from `seed`, return the loss.
double dsm_step(const ScoreModel& score_model, const MixtureExample& example, const SeparatorModel& separator,
                std::uint64_t seed);

struct GecoTraining {
  ScoreModel model;  ///< raw parameters after the last step
  EmaState ema;      ///< shadow used for evaluation
  TrainReport report;
};

GecoTraining train_geco(std::span<const MixtureExample> data, ScoreModel score_model,
                        const SeparatorModel& separator, const TrainConfig& cfg,
                        std::span<const MixtureExample> validation = {});

// ---------------------------------------------------------------------------------------
// One-step fine-tuning

/// -si_snr(one_step_fastgeco(s_hat, y, model, seed), reference) and, optionally, its
/// gradient through the single reverse step. The injected noise is held fixed for a given
/// seed, so the gradient is that of a reparameterised sample.
double fastgeco_loss(const ScoreModel& model, std::span<const double> s_hat, std::span<const double> y,
                     std::span<const double> reference, std::uint64_t seed, std::vector<double>* grad,
                     const ReverseOptions& opts = {});

/// Mean one-step SI-SNRi over examples and speakers with seeds derived from `seed`.
double mean_one_step_sisnri(const ScoreModel& model, const SeparatorModel& separator,
                            std::span<const MixtureExample> data, std::uint64_t seed);

struct FinetuneConfig {
  /// Draw new start and step noise every optimisation step. When false every step reuses
  /// the noise of step 0.
  bool fresh_noise = true;
};

struct FastGecoTraining {
  ScoreModel model;  ///< best-validation parameters
  TrainReport report;
};

FastGecoTraining finetune_fastgeco(std::span<const MixtureExample> data, ScoreModel score_model,
                                   const SeparatorModel& separator, const TrainConfig& cfg,
                                   std::span<const MixtureExample> validation = {},
                                   const FinetuneConfig& ft = {});

}  // namespace geco
