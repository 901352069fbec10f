#include "adsm/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace adsm {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Upper bound on the im2col buffer, in doubles.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

// The "small" grid (conv output / deconv input) maps to the "big" grid (conv input / deconv
// output) via big = small * s + tap - p. Gathers rows [row0, row1) of the small grid into columns
// of shape (rows * small_w) x (k * k * channels).
void gather(const Tensor& big, int small_w, int row0, int row1, const Geometry& g,
            RowMatrix& cols) {
  const int k = g.kernel;
  const int c = big.channels();
  cols.setZero((row1 - row0) * small_w, k * k * c);
  for (int a = row0; a < row1; ++a) {
    for (int b = 0; b < small_w; ++b) {
      double* dst = cols.data() + static_cast<std::size_t>((a - row0) * small_w + b) * k * k * c;
      for (int ky = 0; ky < k; ++ky) {
        const int y = a * g.stride + ky - g.padding;
        if (y < 0 || y >= big.height()) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int x = b * g.stride + kx - g.padding;
          if (x < 0 || x >= big.width()) continue;
          const double* src = big.data() + (static_cast<std::size_t>(y) * big.width() + x) * c;
          std::copy(src, src + c, dst + static_cast<std::size_t>(ky * k + kx) * c);
        }
      }
    }
  }
}

// Adjoint of gather: accumulates columns back into the big grid.
void scatter_add(const RowMatrix& cols, int small_w, int row0, int row1, const Geometry& g,
                 Tensor& big) {
  const int k = g.kernel;
  const int c = big.channels();
  for (int a = row0; a < row1; ++a) {
    for (int b = 0; b < small_w; ++b) {
      const double* src =
          cols.data() + static_cast<std::size_t>((a - row0) * small_w + b) * k * k * c;
      for (int ky = 0; ky < k; ++ky) {
        const int y = a * g.stride + ky - g.padding;
        if (y < 0 || y >= big.height()) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int x = b * g.stride + kx - g.padding;
          if (x < 0 || x >= big.width()) continue;
          double* dst = big.data() + (static_cast<std::size_t>(y) * big.width() + x) * c;
          const double* s = src + static_cast<std::size_t>(ky * k + kx) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += s[ch];
        }
      }
    }
  }
}

int rows_per_chunk(int small_w, int row_width) {
  const std::size_t per_row = static_cast<std::size_t>(small_w) * row_width;
  return static_cast<int>(std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(1, per_row)));
}

// (k k in, out) with row (ky k + kx) in + ci, column co.
RowMatrix conv_weight_matrix(const FilterBank& f) {
  const int k = f.geometry.kernel;
  RowMatrix m(k * k * f.in_channels, f.out_channels);
  for (int co = 0; co < f.out_channels; ++co)
    for (int ci = 0; ci < f.in_channels; ++ci)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx)
          m((ky * k + kx) * f.in_channels + ci, co) = f.weight(co, ci, ky, kx);
  return m;
}

// (in, k k out) with row ci, column (ky k + kx) out + co.
RowMatrix deconv_weight_matrix(const FilterBank& f) {
  const int k = f.geometry.kernel;
  RowMatrix m(f.in_channels, k * k * f.out_channels);
  for (int co = 0; co < f.out_channels; ++co)
    for (int ci = 0; ci < f.in_channels; ++ci)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx)
          m(ci, (ky * k + kx) * f.out_channels + co) = f.weight(co, ci, ky, kx);
  return m;
}

void check_channels(const Tensor& x, int expected, const char* what) {
  if (x.channels() != expected) {
    throw ShapeError(std::string(what) + ": input has " + std::to_string(x.channels()) +
                     " channels, layer expects " + std::to_string(expected));
  }
}

void add_bias(Tensor& t, const std::vector<double>& bias) {
  if (bias.empty()) return;
  const int c = t.channels();
  auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += bias[i % c];
}

void accumulate_bias_grad(const Tensor& grad_out, std::vector<double>& grad_bias) {
  if (grad_bias.empty()) return;
  const int c = grad_out.channels();
  auto v = grad_out.values();
  for (std::size_t i = 0; i < v.size(); ++i) grad_bias[i % c] += v[i];
}

}  // namespace

int conv_output_size(int input, const Geometry& g) {
  if (g.kernel < 1 || g.stride < 1 || g.padding < 0) {
    throw GeometryError("invalid layer geometry (k >= 1, s >= 1, p >= 0 required)");
  }
  const int span = input - g.kernel + 2 * g.padding;
  if (span < 0 || span % g.stride != 0) {
    throw GeometryError("convolution output size (" + std::to_string(input) + " - " +
                        std::to_string(g.kernel) + " + 2*" + std::to_string(g.padding) + ")/" +
                        std::to_string(g.stride) + " + 1 is not a positive integer");
  }
  return span / g.stride + 1;
}

int deconv_output_size(int input, const Geometry& g) {
  if (g.kernel < 1 || g.stride < 1 || g.padding < 0) {
    throw GeometryError("invalid layer geometry (k >= 1, s >= 1, p >= 0 required)");
  }
  const int out = g.stride * (input - 1) - 2 * g.padding + g.kernel;
  if (input < 1 || out < 1) {
    throw GeometryError("deconvolution output size " + std::to_string(out) + " is not positive");
  }
  return out;
}

FilterBank::FilterBank(Geometry g, int in, int out, bool with_bias)
    : geometry(g), in_channels(in), out_channels(out) {
  if (in < 1 || out < 1) throw ShapeError("channel counts must be >= 1");
  weights.assign(static_cast<std::size_t>(in) * out * g.kernel * g.kernel, 0.0);
  if (with_bias) bias.assign(static_cast<std::size_t>(out), 0.0);
}

BatchNorm::BatchNorm(int c)
    : channels(c),
      gamma(static_cast<std::size_t>(c), 1.0),
      beta(static_cast<std::size_t>(c), 0.0),
      running_mean(static_cast<std::size_t>(c), 0.0),
      running_var(static_cast<std::size_t>(c), 1.0) {}

Tensor conv_forward(const Tensor& x, const ConvLayer& layer) {
  check_channels(x, layer.in_channels, "conv");
  const Geometry& g = layer.geometry;
  const int oh = conv_output_size(x.height(), g);
  const int ow = conv_output_size(x.width(), g);
  Tensor out(oh, ow, layer.out_channels);
  const RowMatrix w = conv_weight_matrix(layer);
  const int chunk = rows_per_chunk(ow, g.kernel * g.kernel * x.channels());
  RowMatrix cols;
  for (int r0 = 0; r0 < oh; r0 += chunk) {
    const int r1 = std::min(oh, r0 + chunk);
    gather(x, ow, r0, r1, g, cols);
    MatrixMap(out.data() + static_cast<std::size_t>(r0) * ow * layer.out_channels,
              (r1 - r0) * ow, layer.out_channels)
        .noalias() = cols * w;
  }
  add_bias(out, layer.bias);
  return out;
}

Tensor deconv_forward(const Tensor& x, const DeconvLayer& layer) {
  check_channels(x, layer.in_channels, "deconv");
  const Geometry& g = layer.geometry;
  const int oh = deconv_output_size(x.height(), g);
  const int ow = deconv_output_size(x.width(), g);
  Tensor out(oh, ow, layer.out_channels);
  const RowMatrix w = deconv_weight_matrix(layer);
  const int chunk = rows_per_chunk(x.width(), g.kernel * g.kernel * layer.out_channels);
  RowMatrix cols;
  for (int r0 = 0; r0 < x.height(); r0 += chunk) {
    const int r1 = std::min(x.height(), r0 + chunk);
    const ConstMatrixMap in(x.data() + static_cast<std::size_t>(r0) * x.width() * x.channels(),
                            (r1 - r0) * x.width(), x.channels());
    cols.noalias() = in * w;
    scatter_add(cols, x.width(), r0, r1, g, out);
  }
  add_bias(out, layer.bias);
  return out;
}

Tensor batchnorm_forward(const Tensor& x, const BatchNorm& bn) {
  BatchStatistics running{bn.running_mean, bn.running_var, 0};
  return batchnorm_apply(x, bn, running);
}

Tensor relu_forward(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.values()) v = std::max(v, 0.0);
  return out;
}

BatchStatistics batch_statistics(std::span<const Tensor> batch) {
  if (batch.empty()) throw ShapeError("batch statistics of an empty batch");
  const int c = batch.front().channels();
  BatchStatistics s;
  s.mean.assign(static_cast<std::size_t>(c), 0.0);
  s.variance.assign(static_cast<std::size_t>(c), 0.0);
  for (const Tensor& t : batch) {
    if (t.channels() != c) throw ShapeError("batch tensors disagree on channel count");
    auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) s.mean[i % c] += v[i];
    s.count += v.size() / c;
  }
  for (double& m : s.mean) m /= static_cast<double>(s.count);
  for (const Tensor& t : batch) {
    auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double d = v[i] - s.mean[i % c];
      s.variance[i % c] += d * d;
    }
  }
  for (double& var : s.variance) var /= static_cast<double>(s.count);
  return s;
}

Tensor batchnorm_apply(const Tensor& x, const BatchNorm& bn, const BatchStatistics& stats) {
  check_channels(x, bn.channels, "batchnorm");
  const int c = bn.channels;
  std::vector<double> scale(static_cast<std::size_t>(c));
  std::vector<double> shift(static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i) {
    scale[i] = bn.gamma[i] / std::sqrt(stats.variance[i] + bn.epsilon);
    shift[i] = bn.beta[i] - stats.mean[i] * scale[i];
  }
  Tensor out = x;
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] * scale[i % c] + shift[i % c];
  return out;
}

void update_running_statistics(BatchNorm& bn, const BatchStatistics& stats) {
  for (int i = 0; i < bn.channels; ++i) {
    bn.running_mean[i] = bn.momentum * bn.running_mean[i] + (1.0 - bn.momentum) * stats.mean[i];
    bn.running_var[i] = bn.momentum * bn.running_var[i] + (1.0 - bn.momentum) * stats.variance[i];
  }
}

std::vector<Tensor> batchnorm_forward_training(std::span<const Tensor> batch, BatchNorm& bn) {
  const BatchStatistics stats = batch_statistics(batch);
  std::vector<Tensor> out;
  out.reserve(batch.size());
  for (const Tensor& t : batch) out.push_back(batchnorm_apply(t, bn, stats));
  update_running_statistics(bn, stats);
  return out;
}

Tensor conv_backward(const Tensor& x, const ConvLayer& layer, const Tensor& grad_out,
                     FilterBank& grad) {
  const Geometry& g = layer.geometry;
  const int k = g.kernel;
  const int oh = grad_out.height();
  const int ow = grad_out.width();
  const RowMatrix w = conv_weight_matrix(layer);
  RowMatrix grad_w = RowMatrix::Zero(w.rows(), w.cols());
  Tensor grad_in(x.height(), x.width(), x.channels());
  const int chunk = rows_per_chunk(ow, k * k * x.channels());
  RowMatrix cols;
  RowMatrix grad_cols;
  for (int r0 = 0; r0 < oh; r0 += chunk) {
    const int r1 = std::min(oh, r0 + chunk);
    gather(x, ow, r0, r1, g, cols);
    const ConstMatrixMap go(
        grad_out.data() + static_cast<std::size_t>(r0) * ow * layer.out_channels, (r1 - r0) * ow,
        layer.out_channels);
    grad_w.noalias() += cols.transpose() * go;
    grad_cols.noalias() = go * w.transpose();
    scatter_add(grad_cols, ow, r0, r1, g, grad_in);
  }
  for (int co = 0; co < layer.out_channels; ++co)
    for (int ci = 0; ci < layer.in_channels; ++ci)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx)
          grad.weight(co, ci, ky, kx) += grad_w((ky * k + kx) * layer.in_channels + ci, co);
  accumulate_bias_grad(grad_out, grad.bias);
  return grad_in;
}

Tensor deconv_backward(const Tensor& x, const DeconvLayer& layer, const Tensor& grad_out,
                       FilterBank& grad) {
  const Geometry& g = layer.geometry;
  const int k = g.kernel;
  const RowMatrix w = deconv_weight_matrix(layer);
  RowMatrix grad_w = RowMatrix::Zero(w.rows(), w.cols());
  Tensor grad_in(x.height(), x.width(), x.channels());
  const int chunk = rows_per_chunk(x.width(), k * k * layer.out_channels);
  RowMatrix grad_cols;
  for (int r0 = 0; r0 < x.height(); r0 += chunk) {
    const int r1 = std::min(x.height(), r0 + chunk);
    gather(grad_out, x.width(), r0, r1, g, grad_cols);
    const ConstMatrixMap in(x.data() + static_cast<std::size_t>(r0) * x.width() * x.channels(),
                            (r1 - r0) * x.width(), x.channels());
    grad_w.noalias() += in.transpose() * grad_cols;
    MatrixMap(grad_in.data() + static_cast<std::size_t>(r0) * x.width() * x.channels(),
              (r1 - r0) * x.width(), x.channels())
        .noalias() = grad_cols * w.transpose();
  }
  for (int co = 0; co < layer.out_channels; ++co)
    for (int ci = 0; ci < layer.in_channels; ++ci)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx)
          grad.weight(co, ci, ky, kx) += grad_w(ci, (ky * k + kx) * layer.out_channels + co);
  accumulate_bias_grad(grad_out, grad.bias);
  return grad_in;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  Tensor grad_in = grad_out;
  auto in = x.values();
  auto g = grad_in.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (in[i] <= 0.0) g[i] = 0.0;
  }
  return grad_in;
}

Eigen::MatrixXd as_matrix(const ConvLayer& layer, int in_h, int in_w) {
  if (layer.in_channels != 1 || layer.out_channels != 1) {
    throw ShapeError("as_matrix supports single-channel layers only");
  }
  const Geometry& g = layer.geometry;
  const int oh = conv_output_size(in_h, g);
  const int ow = conv_output_size(in_w, g);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(oh * ow, in_h * in_w);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int ky = 0; ky < g.kernel; ++ky)
        for (int kx = 0; kx < g.kernel; ++kx) {
          const int iy = oy * g.stride + ky - g.padding;
          const int ix = ox * g.stride + kx - g.padding;
          if (iy < 0 || ix < 0 || iy >= in_h || ix >= in_w) continue;
          m(oy * ow + ox, iy * in_w + ix) += layer.weight(0, 0, ky, kx);
        }
  return m;
}

Eigen::MatrixXd as_matrix(const DeconvLayer& layer, int in_h, int in_w) {
  if (layer.in_channels != 1 || layer.out_channels != 1) {
    throw ShapeError("as_matrix supports single-channel layers only");
  }
  const Geometry& g = layer.geometry;
  const int oh = deconv_output_size(in_h, g);
  const int ow = deconv_output_size(in_w, g);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(oh * ow, in_h * in_w);
  for (int iy = 0; iy < in_h; ++iy)
    for (int ix = 0; ix < in_w; ++ix)
      for (int ky = 0; ky < g.kernel; ++ky)
        for (int kx = 0; kx < g.kernel; ++kx) {
          const int oy = iy * g.stride + ky - g.padding;
          const int ox = ix * g.stride + kx - g.padding;
          if (oy < 0 || ox < 0 || oy >= oh || ox >= ow) continue;
          m(oy * ow + ox, iy * in_w + ix) += layer.weight(0, 0, ky, kx);
        }
  return m;
}

}  // namespace adsm
