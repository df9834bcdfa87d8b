#include "geco/models.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "geco/errors.hpp"
#include "geco/nn.hpp"
#include "geco/rng.hpp"

namespace geco {

using nn::Mat;
using nn::RowVec;

namespace {

struct SeparatorNet {
  nn::ParamLayout layout;
  nn::Dense encoder, input, mask, decoder;
  std::vector<nn::GatedBlock> blocks;

  explicit SeparatorNet(const SeparatorArch& a) {
    encoder = layout.dense(a.window, a.basis, false);
    input = layout.dense(a.basis, a.hidden);
    for (int b = 0; b < a.blocks; ++b) blocks.push_back(nn::GatedBlock::make(layout, a.hidden));
    mask = layout.dense(a.hidden, (a.sources + 1) * a.basis);
    decoder = layout.dense(a.basis, a.window, false);
  }
};

struct ScoreNet {
  nn::ParamLayout layout;
  nn::Dense input, time, output;
  std::vector<nn::GatedBlock> blocks;

  explicit ScoreNet(const ScoreArch& a) {
    input = layout.dense(a.in_channels * a.frame, a.hidden);
    time = layout.dense(a.time_embed_dim, a.hidden);
    for (int b = 0; b < a.blocks; ++b) blocks.push_back(nn::GatedBlock::make(layout, a.hidden));
    output = layout.dense(a.hidden, a.frame);
  }
};

void check_arch(const SeparatorArch& a) {
  if (a.window < 1 || a.basis < 1 || a.hidden < 1 || a.blocks < 0 || a.sources < 1) {
    throw ConfigError("separator arch: all sizes must be positive");
  }
}

void check_arch(const ScoreArch& a) {
  if (a.in_channels != 3) throw ConfigError("score arch: in_channels must be 3 (x_t, s_hat, y)");
  if (a.time_embed_dim < 2 || a.time_embed_dim % 2 != 0) {
    throw ConfigError("score arch: time_embed_dim must be even and >= 2");
  }
  if (a.hidden < 1 || a.blocks < 0 || a.frame < 1) throw ConfigError("score arch: sizes must be positive");
}

void check_params(std::span<const double> p, std::size_t expected, const char* what) {
  if (p.size() != expected) {
    std::ostringstream msg;
    msg << what << ": parameter vector has " << p.size() << " entries, architecture needs " << expected;
    throw ShapeError(msg.str());
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i])) throw NumericError(std::string(what) + ": non-finite parameter at " + std::to_string(i));
  }
}

double rms(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace

struct SeparatorTape {
  Mat frames, enc, feat, h_final, logits_soft;
  double feat_scale = 0.0;
  std::vector<nn::GatedBlock::Cache> blocks;
  std::vector<Mat> masks, masked;
  std::size_t length = 0;
};

struct ScoreTape {
  Mat inputs, h_final;
  RowVec emb, cond;
  std::vector<nn::GatedBlock::Cache> blocks;
  double sigma_t = 0.0;
  std::size_t length = 0;
};

void SeparatorTapeDeleter::operator()(SeparatorTape* p) const { delete p; }
void ScoreTapeDeleter::operator()(ScoreTape* p) const { delete p; }

std::size_t parameter_count(const SeparatorArch& arch) {
  check_arch(arch);
  return SeparatorNet(arch).layout.size();
}

std::size_t parameter_count(const ScoreArch& arch) {
  check_arch(arch);
  return ScoreNet(arch).layout.size();
}

SeparatorModel make_separator(const SeparatorArch& arch, std::uint64_t seed) {
  check_arch(arch);
  return {arch, nn::glorot_init(SeparatorNet(arch).layout, seed)};
}

ScoreModel make_score_model(const ScoreArch& arch, const BridgeConfig& bridge, std::uint64_t seed) {
  check_arch(arch);
  bridge.validate();
  return {arch, bridge, nn::glorot_init(ScoreNet(arch).layout, seed)};
}

void validate(const SeparatorModel& m) {
  check_params(m.params, parameter_count(m.arch), "separator");
}

void validate(const ScoreModel& m) {
  m.bridge.validate();
  check_params(m.params, parameter_count(m.arch), "score model");
}

// ---------------------------------------------------------------------------------------
// Separator

std::vector<std::vector<double>> separator_forward(const SeparatorModel& m, std::span<const double> y,
                                                   SeparatorTapePtr& tape_out) {
  const SeparatorArch& a = m.arch;
  if (y.size() < static_cast<std::size_t>(a.window)) {
    throw ShapeError("separator_forward: input of " + std::to_string(y.size()) +
                     " samples is shorter than the " + std::to_string(a.window) + "-sample window");
  }
  const SeparatorNet net(a);
  if (m.params.size() != net.layout.size()) throw ShapeError("separator_forward: parameter count mismatch");
  const std::span<const double> p = m.params;

  SeparatorTapePtr tape(new SeparatorTape);
  tape->length = y.size();
  tape->frames = nn::frame_signal(y, a.window);
  tape->enc = net.encoder.forward(p, tape->frames);
  tape->feat_scale = 1.0 / (rms(y) + 1e-8);
  tape->feat = tape->enc * tape->feat_scale;

  Mat h = net.input.forward(p, tape->feat);
  tape->blocks.resize(net.blocks.size());
  for (std::size_t b = 0; b < net.blocks.size(); ++b) h = net.blocks[b].forward(p, h, nullptr, tape->blocks[b]);
  tape->h_final = h;

  // Softmax over K + 1 classes per basis coefficient; class K absorbs noise, so the K
  // source masks lie in [0, 1] and sum to at most 1.
  const Mat logits = net.mask.forward(p, h);
  const Eigen::Index frames = logits.rows(), basis = a.basis;
  const int classes = a.sources + 1;
  tape->masks.assign(static_cast<std::size_t>(classes), Mat(frames, basis));
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (Eigen::Index j = 0; j < basis; ++j) {
      double peak = logits(f, j);
      for (int c = 1; c < classes; ++c) peak = std::max(peak, logits(f, c * basis + j));
      double z = 0.0;
      for (int c = 0; c < classes; ++c) {
        const double e = std::exp(logits(f, c * basis + j) - peak);
        tape->masks[static_cast<std::size_t>(c)](f, j) = e;
        z += e;
      }
      for (int c = 0; c < classes; ++c) tape->masks[static_cast<std::size_t>(c)](f, j) /= z;
    }
  }

  std::vector<std::vector<double>> outputs;
  tape->masked.resize(static_cast<std::size_t>(a.sources));
  for (int k = 0; k < a.sources; ++k) {
    tape->masked[static_cast<std::size_t>(k)] = tape->enc.cwiseProduct(tape->masks[static_cast<std::size_t>(k)]);
    const Mat est = net.decoder.forward(p, tape->masked[static_cast<std::size_t>(k)]);
    outputs.push_back(nn::unframe_signal(est, y.size()));
  }
  tape_out = std::move(tape);
  return outputs;
}

std::vector<std::vector<double>> separator_forward(const SeparatorModel& m, std::span<const double> y) {
  SeparatorTapePtr tape;
  return separator_forward(m, y, tape);
}

std::vector<double> separator_backward(const SeparatorModel& m, const SeparatorTape& tape,
                                       const std::vector<std::vector<double>>& d_outputs) {
  const SeparatorArch& a = m.arch;
  const SeparatorNet net(a);
  const std::span<const double> p = m.params;
  if (d_outputs.size() != static_cast<std::size_t>(a.sources)) throw ShapeError("separator_backward: need K output gradients");

  std::vector<double> grad(p.size(), 0.0);
  const Eigen::Index frames = tape.enc.rows(), basis = a.basis;
  const int classes = a.sources + 1;

  Mat d_enc = Mat::Zero(frames, basis);
  std::vector<Mat> d_masks(static_cast<std::size_t>(classes), Mat::Zero(frames, basis));
  for (int k = 0; k < a.sources; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (d_outputs[ks].size() != tape.length) throw ShapeError("separator_backward: gradient length mismatch");
    const Mat d_est = nn::frame_gradient(d_outputs[ks], a.window, frames);
    const Mat d_masked = net.decoder.backward(p, tape.masked[ks], d_est, grad);
    d_enc += d_masked.cwiseProduct(tape.masks[ks]);
    d_masks[ks] = d_masked.cwiseProduct(tape.enc);
  }

  Mat d_logits(frames, classes * basis);
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (Eigen::Index j = 0; j < basis; ++j) {
      double dot = 0.0;
      for (int c = 0; c < classes; ++c) {
        const auto cs = static_cast<std::size_t>(c);
        dot += tape.masks[cs](f, j) * d_masks[cs](f, j);
      }
      for (int c = 0; c < classes; ++c) {
        const auto cs = static_cast<std::size_t>(c);
        d_logits(f, c * basis + j) = tape.masks[cs](f, j) * (d_masks[cs](f, j) - dot);
      }
    }
  }

  Mat dh = net.mask.backward(p, tape.h_final, d_logits, grad);
  for (std::size_t b = net.blocks.size(); b-- > 0;) dh = net.blocks[b].backward(p, tape.blocks[b], dh, grad, nullptr);
  const Mat d_feat = net.input.backward(p, tape.feat, dh, grad);
  d_enc += d_feat * tape.feat_scale;
  net.encoder.backward(p, tape.frames, d_enc, grad);
  return grad;
}

// ---------------------------------------------------------------------------------------
// Score model

std::vector<double> time_embedding(double t, int dim) {
  const int half = dim / 2;
  std::vector<double> emb(static_cast<std::size_t>(dim));
  for (int j = 0; j < half; ++j) {
    const double w = half > 1 ? std::exp(std::log(1000.0) * j / (half - 1)) : 1.0;
    emb[static_cast<std::size_t>(j)] = std::sin(w * t);
    emb[static_cast<std::size_t>(half + j)] = std::cos(w * t);
  }
  return emb;
}

std::vector<double> score_forward(const ScoreModel& m, std::span<const double> x_t,
                                  std::span<const double> s_hat, std::span<const double> y, double t,
                                  ScoreTapePtr& tape_out) {
  const ScoreArch& a = m.arch;
  if (x_t.size() != s_hat.size() || x_t.size() != y.size()) {
    throw ShapeError("score_forward: x_t, s_hat and y must share one length");
  }
  if (x_t.empty()) throw ShapeError("score_forward: empty input");
  if (!(t >= m.bridge.t_eps && t <= m.bridge.T)) {
    std::ostringstream msg;
    msg << "score_forward: t = " << t << " outside [" << m.bridge.t_eps << ", " << m.bridge.T << "]";
    throw DomainError(msg.str());
  }
  const ScoreNet net(a);
  if (m.params.size() != net.layout.size()) throw ShapeError("score_forward: parameter count mismatch");
  const std::span<const double> p = m.params;

  ScoreTapePtr tape(new ScoreTape);
  tape->length = x_t.size();
  tape->sigma_t = sigma(t, m.bridge);
  const double inv_sigma = 1.0 / tape->sigma_t;

  std::vector<double> offset(x_t.size());
  for (std::size_t i = 0; i < offset.size(); ++i) offset[i] = (x_t[i] - s_hat[i]) * inv_sigma;

  const Mat f_off = nn::frame_signal(offset, a.frame);
  const Mat f_shat = nn::frame_signal(s_hat, a.frame);
  const Mat f_y = nn::frame_signal(y, a.frame);
  tape->inputs.resize(f_off.rows(), 3 * a.frame);
  tape->inputs << f_off, f_shat, f_y;

  const std::vector<double> emb = time_embedding(t, a.time_embed_dim);
  tape->emb = Eigen::Map<const RowVec>(emb.data(), a.time_embed_dim);
  tape->cond = net.time.forward(p, tape->emb).array().tanh();

  Mat h = net.input.forward(p, tape->inputs);
  tape->blocks.resize(net.blocks.size());
  for (std::size_t b = 0; b < net.blocks.size(); ++b) h = net.blocks[b].forward(p, h, &tape->cond, tape->blocks[b]);
  tape->h_final = h;

  const std::vector<double> r = nn::unframe_signal(net.output.forward(p, h), x_t.size());
  std::vector<double> score(x_t.size());
  for (std::size_t i = 0; i < score.size(); ++i) score[i] = (r[i] - offset[i]) * inv_sigma;
  tape_out = std::move(tape);
  return score;
}

std::vector<double> score_forward(const ScoreModel& m, std::span<const double> x_t,
                                  std::span<const double> s_hat, std::span<const double> y, double t) {
  ScoreTapePtr tape;
  return score_forward(m, x_t, s_hat, y, t, tape);
}

std::vector<double> score_backward(const ScoreModel& m, const ScoreTape& tape, std::span<const double> d_score) {
  const ScoreArch& a = m.arch;
  const ScoreNet net(a);
  const std::span<const double> p = m.params;
  if (d_score.size() != tape.length) throw ShapeError("score_backward: gradient length mismatch");

  std::vector<double> grad(p.size(), 0.0);
  std::vector<double> d_r(d_score.begin(), d_score.end());
  for (double& v : d_r) v /= tape.sigma_t;
  const Mat d_out = nn::frame_gradient(d_r, a.frame, tape.h_final.rows());
  Mat dh = net.output.backward(p, tape.h_final, d_out, grad);

  RowVec d_cond = RowVec::Zero(a.hidden);
  for (std::size_t b = net.blocks.size(); b-- > 0;) dh = net.blocks[b].backward(p, tape.blocks[b], dh, grad, &d_cond);
  const RowVec d_pre = d_cond.array() * (1.0 - tape.cond.array().square());
  net.time.backward(p, tape.emb, d_pre, grad);
  net.input.backward(p, tape.inputs, dh, grad);
  return grad;
}

// ---------------------------------------------------------------------------------------

std::vector<double> grad(std::span<const double> params, const LossClosure& loss) {
  std::vector<double> g(params.size(), 0.0);
  const double value = loss(params, g);
  if (!std::isfinite(value)) throw NumericError("grad: loss is not finite");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) throw NumericError("grad: non-finite gradient at parameter " + std::to_string(i));
  }
  return g;
}

EmaState ema_init(std::span<const double> params, double decay) {
  if (!(decay >= 0.0 && decay < 1.0)) throw ConfigError("ema: decay must lie in [0, 1)");
  return {std::vector<double>(params.begin(), params.end()), decay};
}

void ema_update_in_place(EmaState& e, std::span<const double> params) {
  if (e.shadow.size() != params.size()) throw ShapeError("ema_update: length mismatch");
  const double keep = e.decay, take = 1.0 - e.decay;
  for (std::size_t i = 0; i < params.size(); ++i) e.shadow[i] = keep * e.shadow[i] + take * params[i];
}

EmaState ema_update(EmaState e, std::span<const double> params) {
  ema_update_in_place(e, params);
  return e;
}

}  // namespace geco
