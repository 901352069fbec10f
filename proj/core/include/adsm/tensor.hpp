#pragma once

#include <span>
#include <vector>

#include "adsm/imaging.hpp"

namespace adsm {

/// Dense rank-3 array, height x width x channels, stored channel-innermost.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int height, int width, int channels, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int y, int x, int c) { return data_[index(y, x, c)]; }
  double operator()(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  /// Channel vector at one spatial position.
  std::span<const double> at(int y, int x) const {
    return std::span<const double>(data_).subspan(index(y, x, 0), channels_);
  }

  /// Copy of the window [y0, y0+h) x [x0, x0+w), all channels.
  Tensor crop(int y0, int x0, int h, int w) const;

  bool same_shape(const Tensor& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Single-channel tensor view of an intensity plane.
Tensor to_tensor(const ImagePlane& plane);

/// Single-channel tensor of the window of `plane` with top-left corner (x0, y0).
Tensor crop_to_tensor(const ImagePlane& plane, int x0, int y0, int width, int height);

}  // namespace adsm
