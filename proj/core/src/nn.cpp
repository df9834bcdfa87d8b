#include "geco/nn.hpp"

#include <cmath>
#include <random>

#include "geco/errors.hpp"
#include "geco/rng.hpp"

namespace geco::nn {

namespace {

using ConstMatMap = Eigen::Map<const Mat>;
using MatMap = Eigen::Map<Mat>;
using ConstRowMap = Eigen::Map<const RowVec>;
using RowMap = Eigen::Map<RowVec>;

ConstMatMap weights(std::span<const double> p, const Dense& d) {
  return ConstMatMap(p.data() + d.weight_offset, d.out, d.in);
}

}  // namespace

Mat Dense::forward(std::span<const double> params, const Mat& x) const {
  Mat y = x * weights(params, *this).transpose();
  if (has_bias) y.rowwise() += ConstRowMap(params.data() + bias_offset, out);
  return y;
}

RowVec Dense::forward(std::span<const double> params, const RowVec& x) const {
  RowVec y = x * weights(params, *this).transpose();
  if (has_bias) y += ConstRowMap(params.data() + bias_offset, out);
  return y;
}

Mat Dense::backward(std::span<const double> params, const Mat& x, const Mat& dy,
                    std::span<double> grad) const {
  MatMap(grad.data() + weight_offset, out, in).noalias() += dy.transpose() * x;
  if (has_bias) RowMap(grad.data() + bias_offset, out) += dy.colwise().sum();
  return dy * weights(params, *this);
}

RowVec Dense::backward(std::span<const double> params, const RowVec& x, const RowVec& dy,
                       std::span<double> grad) const {
  MatMap(grad.data() + weight_offset, out, in).noalias() += dy.transpose() * x;
  if (has_bias) RowMap(grad.data() + bias_offset, out) += dy;
  return dy * weights(params, *this);
}

Dense ParamLayout::dense(int in, int out, bool has_bias) {
  Dense d;
  d.in = in;
  d.out = out;
  d.has_bias = has_bias;
  d.weight_offset = size_;
  size_ += static_cast<std::size_t>(in) * out;
  if (has_bias) {
    d.bias_offset = size_;
    size_ += static_cast<std::size_t>(out);
  }
  layers_.push_back(d);
  return d;
}

std::vector<double> glorot_init(const ParamLayout& layout, std::uint64_t seed) {
  std::vector<double> p(layout.size(), 0.0);
  Rng rng(seed);
  for (const Dense& d : layout.layers()) {
    const double a = std::sqrt(6.0 / (d.in + d.out));
    std::uniform_real_distribution<double> u(-a, a);
    const std::size_t n = static_cast<std::size_t>(d.in) * d.out;
    for (std::size_t i = 0; i < n; ++i) p[d.weight_offset + i] = u(rng);
  }
  return p;
}

Mat context3(const Mat& x) {
  const Eigen::Index f = x.rows(), c = x.cols();
  Mat ctx = Mat::Zero(f, 3 * c);
  if (f > 1) {
    ctx.block(1, 0, f - 1, c) = x.topRows(f - 1);
    ctx.block(0, 2 * c, f - 1, c) = x.bottomRows(f - 1);
  }
  ctx.middleCols(c, c) = x;
  return ctx;
}

Mat context3_backward(const Mat& dctx, int channels) {
  const Eigen::Index f = dctx.rows(), c = channels;
  Mat dx = dctx.middleCols(c, c);
  if (f > 1) {
    dx.topRows(f - 1) += dctx.block(1, 0, f - 1, c);
    dx.bottomRows(f - 1) += dctx.block(0, 2 * c, f - 1, c);
  }
  return dx;
}

GatedBlock GatedBlock::make(ParamLayout& layout, int hidden) {
  GatedBlock b;
  b.gate = layout.dense(3 * hidden, 2 * hidden);
  b.out = layout.dense(hidden, hidden);
  return b;
}

Mat GatedBlock::forward(std::span<const double> params, const Mat& h, const RowVec* cond,
                        Cache& cache) const {
  const int hidden = out.out;
  if (cond) {
    Mat u = h;
    u.rowwise() += *cond;
    cache.ctx = context3(u);
  } else {
    cache.ctx = context3(h);
  }
  const Mat ag = gate.forward(params, cache.ctx);
  cache.tanh_a = ag.leftCols(hidden).array().tanh();
  cache.sig_g = (1.0 + (-ag.rightCols(hidden).array()).exp()).inverse();
  cache.m = cache.tanh_a.cwiseProduct(cache.sig_g);
  return h + out.forward(params, cache.m);
}

Mat GatedBlock::backward(std::span<const double> params, const Cache& cache, const Mat& dh_out,
                         std::span<double> grad, RowVec* dcond) const {
  const int hidden = out.out;
  const Mat dm = out.backward(params, cache.m, dh_out, grad);
  Mat dag(dm.rows(), 2 * hidden);
  dag.leftCols(hidden) =
      dm.array() * cache.sig_g.array() * (1.0 - cache.tanh_a.array().square());
  dag.rightCols(hidden) =
      dm.array() * cache.tanh_a.array() * cache.sig_g.array() * (1.0 - cache.sig_g.array());
  const Mat dctx = gate.backward(params, cache.ctx, dag, grad);
  const Mat du = context3_backward(dctx, hidden);
  if (dcond) *dcond += du.colwise().sum();
  return dh_out + du;
}

Mat frame_signal(std::span<const double> x, int width) {
  const auto frames = static_cast<Eigen::Index>((x.size() + width - 1) / width);
  Mat out = Mat::Zero(frames, width);
  std::copy(x.begin(), x.end(), out.data());
  return out;
}

std::vector<double> unframe_signal(const Mat& frames, std::size_t length) {
  if (static_cast<std::size_t>(frames.size()) < length) throw ShapeError("unframe_signal: too few frames");
  return std::vector<double>(frames.data(), frames.data() + length);
}

Mat frame_gradient(std::span<const double> d_signal, int width, Eigen::Index frames) {
  Mat out = Mat::Zero(frames, width);
  std::copy(d_signal.begin(), d_signal.end(), out.data());
  return out;
}

}  // namespace geco::nn
