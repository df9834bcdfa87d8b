#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "geco/bridge.hpp"

namespace geco {

/// Separator architecture: framed encoder, gated residual mask estimator, linear decoder.
struct SeparatorArch {
  int window = 80;   ///< encoder frame length and stride (samples)
  int basis = 64;    ///< encoder filters
  int hidden = 128;
  int blocks = 2;
  int sources = 2;   ///< K

  friend bool operator==(const SeparatorArch&, const SeparatorArch&) = default;
};

/// Score network architecture. The three conditioning signals (x_t, s_hat, y) are framed
/// into non-overlapping `frame`-sample chunks and stacked as channels.
struct ScoreArch {
  int in_channels = 3;
  int time_embed_dim = 32;
  int hidden = 128;
  int blocks = 3;
  int frame = 32;

  friend bool operator==(const ScoreArch&, const ScoreArch&) = default;
};

struct SeparatorModel {
  SeparatorArch arch;
  std::vector<double> params;
};

/// Score model f(x_t, s_hat, y, t). The bridge schedule is part of the model: the network
/// sees (x_t - s_hat)/sigma(t) and its output is read as a correction to the score of a
/// kernel centred on s_hat,
///   score = -(x_t - s_hat)/sigma(t)^2 + net(...)/sigma(t).
struct ScoreModel {
  ScoreArch arch;
  BridgeConfig bridge;
  std::vector<double> params;
};

std::size_t parameter_count(const SeparatorArch& arch);
std::size_t parameter_count(const ScoreArch& arch);

/// Glorot-uniform initialization from `seed`.
SeparatorModel make_separator(const SeparatorArch& arch, std::uint64_t seed);
ScoreModel make_score_model(const ScoreArch& arch, const BridgeConfig& bridge, std::uint64_t seed);

/// Throws ShapeError if the parameter vector does not match the architecture and
/// NumericError on non-finite parameters.
void validate(const SeparatorModel& m);
void validate(const ScoreModel& m);

struct SeparatorTape;
struct ScoreTape;

struct SeparatorTapeDeleter {
  void operator()(SeparatorTape* p) const;
};
struct ScoreTapeDeleter {
  void operator()(ScoreTape* p) const;
};
using SeparatorTapePtr = std::unique_ptr<SeparatorTape, SeparatorTapeDeleter>;
using ScoreTapePtr = std::unique_ptr<ScoreTape, ScoreTapeDeleter>;

/// K source estimates, each the length of `y`. ShapeError when y is shorter than one window.
std::vector<std::vector<double>> separator_forward(const SeparatorModel& m, std::span<const double> y);

/// Forward pass that records what the reverse pass needs.
std::vector<std::vector<double>> separator_forward(const SeparatorModel& m, std::span<const double> y,
                                                   SeparatorTapePtr& tape);

/// d(loss)/d(params) given d(loss)/d(outputs).
std::vector<double> separator_backward(const SeparatorModel& m, const SeparatorTape& tape,
                                       const std::vector<std::vector<double>>& d_outputs);

/// Score estimate with the length of x_t. DomainError unless t lies in [t_eps, T] of the
/// model's bridge; ShapeError on length mismatch.
std::vector<double> score_forward(const ScoreModel& m, std::span<const double> x_t,
                                  std::span<const double> s_hat, std::span<const double> y, double t);

std::vector<double> score_forward(const ScoreModel& m, std::span<const double> x_t,
                                  std::span<const double> s_hat, std::span<const double> y, double t,
                                  ScoreTapePtr& tape);

std::vector<double> score_backward(const ScoreModel& m, const ScoreTape& tape,
                                   std::span<const double> d_score);

/// Sinusoidal embedding [sin(w_j t), cos(w_j t)], w_j log-spaced over [1, 1000].
std::vector<double> time_embedding(double t, int dim);

/// A loss over a flat parameter vector that also writes its gradient.
using LossClosure = std::function<double(std::span<const double> params, std::span<double> grad)>;

/// Gradient of `loss` at `params`. NumericError if the loss or any component is non-finite.
std::vector<double> grad(std::span<const double> params, const LossClosure& loss);

/// Exponential moving average of parameters.
struct EmaState {
  std::vector<double> shadow;
  double decay = 0.999;
};

EmaState ema_init(std::span<const double> params, double decay = 0.999);

/// shadow <- decay * shadow + (1 - decay) * params. ShapeError on length mismatch.
EmaState ema_update(EmaState e, std::span<const double> params);
void ema_update_in_place(EmaState& e, std::span<const double> params);

/// Copy of `model` carrying the shadow parameters.
template <class Model>
Model ema_swap_in(const EmaState& e, Model model) {
  model.params = e.shadow;
  validate(model);
  return model;
}

}  // namespace geco
