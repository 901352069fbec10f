#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "adsm/tensor.hpp"

namespace adsm {

struct Geometry {
  int kernel = 1;
  int stride = 1;
  int padding = 0;
};

/// O = (I - k + 2p) / s + 1. Throws GeometryError when O is not a positive integer.
int conv_output_size(int input, const Geometry& g);
/// O = s (I - 1) - 2p + k. Throws GeometryError when O <= 0.
int deconv_output_size(int input, const Geometry& g);

/// Weights are stored (out, in, row, col), row-major.
struct FilterBank {
  Geometry geometry;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weights;
  std::vector<double> bias;  // empty when the layer is followed by batch norm

  FilterBank() = default;
  FilterBank(Geometry g, int in, int out, bool with_bias);

  bool has_bias() const { return !bias.empty(); }
  double& weight(int out, int in, int ky, int kx) { return weights[weight_index(out, in, ky, kx)]; }
  double weight(int out, int in, int ky, int kx) const {
    return weights[weight_index(out, in, ky, kx)];
  }
  std::size_t weight_index(int out, int in, int ky, int kx) const {
    const int k = geometry.kernel;
    return ((static_cast<std::size_t>(out) * in_channels + in) * k + ky) * k + kx;
  }
};

/// Cross-correlation: out(oy, ox) = sum in(oy s + ky - p, ox s + kx - p) w(ky, kx) + b.
struct ConvLayer : FilterBank {
  using FilterBank::FilterBank;
};

/// Transposed convolution, the adjoint of ConvLayer with the same kernel.
struct DeconvLayer : FilterBank {
  using FilterBank::FilterBank;
};

struct BatchNorm {
  int channels = 0;
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double epsilon = 1e-5;
  double momentum = 0.9;

  BatchNorm() = default;
  explicit BatchNorm(int channels);
};

struct ReLU {
  int channels = 0;
};

using Layer = std::variant<ConvLayer, DeconvLayer, BatchNorm, ReLU>;

Tensor conv_forward(const Tensor& x, const ConvLayer& layer);
Tensor deconv_forward(const Tensor& x, const DeconvLayer& layer);
/// Inference-mode normalization with running statistics.
Tensor batchnorm_forward(const Tensor& x, const BatchNorm& bn);
Tensor relu_forward(const Tensor& x);

/// Per-channel mean and biased variance pooled over every element of every tensor.
struct BatchStatistics {
  std::vector<double> mean;
  std::vector<double> variance;
  std::size_t count = 0;
};

BatchStatistics batch_statistics(std::span<const Tensor> batch);

/// Normalization of `x` with explicitly supplied statistics (training mode).
Tensor batchnorm_apply(const Tensor& x, const BatchNorm& bn, const BatchStatistics& stats);

/// Training-mode forward over a batch: normalizes with batch statistics and folds them into the
/// running statistics with the layer's momentum.
std::vector<Tensor> batchnorm_forward_training(std::span<const Tensor> batch, BatchNorm& bn);

void update_running_statistics(BatchNorm& bn, const BatchStatistics& stats);

// Reverse-mode products. `grad` accumulates parameter gradients (same shape as the layer).
Tensor conv_backward(const Tensor& x, const ConvLayer& layer, const Tensor& grad_out,
                     FilterBank& grad);
Tensor deconv_backward(const Tensor& x, const DeconvLayer& layer, const Tensor& grad_out,
                       FilterBank& grad);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

/// Explicit linear operator of a single-channel layer applied to an in_h x in_w input, acting on
/// the row-major vectorization. Bias is ignored. Throws ShapeError for multi-channel layers.
Eigen::MatrixXd as_matrix(const ConvLayer& layer, int in_h, int in_w);
Eigen::MatrixXd as_matrix(const DeconvLayer& layer, int in_h, int in_w);

}  // namespace adsm
