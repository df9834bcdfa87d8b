#pragma once

// Minimal building blocks for the reference networks. Activations are frame-major
// matrices (rows = frames, columns = channels); parameters live in one flat vector and
// layers refer to them by offset. Every forward has a matching backward that accumulates
// parameter gradients into a flat buffer of the same layout.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace geco::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::RowVectorXd;

/// Fully connected layer applied to each row: Y = X W^T + b. W is (out x in).
struct Dense {
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  int in = 0;
  int out = 0;
  bool has_bias = true;

  std::size_t param_count() const {
    return static_cast<std::size_t>(in) * out + (has_bias ? static_cast<std::size_t>(out) : 0);
  }

  Mat forward(std::span<const double> params, const Mat& x) const;
  RowVec forward(std::span<const double> params, const RowVec& x) const;

  /// Accumulates dW, db into `grad`; returns dX.
  Mat backward(std::span<const double> params, const Mat& x, const Mat& dy, std::span<double> grad) const;
  RowVec backward(std::span<const double> params, const RowVec& x, const RowVec& dy,
                  std::span<double> grad) const;
};

/// Assigns offsets in declaration order.
class ParamLayout {
 public:
  Dense dense(int in, int out, bool has_bias = true);
  std::size_t size() const noexcept { return size_; }
  const std::vector<Dense>& layers() const noexcept { return layers_; }

 private:
  std::size_t size_ = 0;
  std::vector<Dense> layers_;
};

/// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)), zero biases.
std::vector<double> glorot_init(const ParamLayout& layout, std::uint64_t seed);

/// [x_{f-1} | x_f | x_{f+1}] with zero rows outside the sequence (width-3 temporal context).
Mat context3(const Mat& x);
Mat context3_backward(const Mat& dctx, int channels);

/// Residual gated block: h' = h + W_o (tanh(a) * sigmoid(g)) + b_o with
/// [a | g] = W_ag context3(h + e) + b_ag and e an optional per-sequence conditioning row.
struct GatedBlock {
  Dense gate;  ///< 3H -> 2H
  Dense out;   ///< H -> H

  struct Cache {
    Mat ctx;
    Mat tanh_a;
    Mat sig_g;
    Mat m;
  };

  static GatedBlock make(ParamLayout& layout, int hidden);

  Mat forward(std::span<const double> params, const Mat& h, const RowVec* cond, Cache& cache) const;

  /// Returns dh; adds the conditioning gradient (column sums) into `dcond` when non-null.
  Mat backward(std::span<const double> params, const Cache& cache, const Mat& dh_out,
               std::span<double> grad, RowVec* dcond) const;
};

/// Splits a signal into non-overlapping frames of `width`, zero-padding the tail.
Mat frame_signal(std::span<const double> x, int width);

/// Inverse of frame_signal: row-major flatten cropped to `length`.
std::vector<double> unframe_signal(const Mat& frames, std::size_t length);

/// Gradient of unframe_signal: places d(output) back into frame layout.
Mat frame_gradient(std::span<const double> d_signal, int width, Eigen::Index frames);

}  // namespace geco::nn
