#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adsm/errors.hpp"

namespace adsm {

/// Dense row-major 2-D grid of values, indexed (x, y).
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw ShapeError("plane dimensions must be >= 1");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  std::span<T> row(int y) { return std::span<T>(data_).subspan(index(0, y), width_); }
  std::span<const T> row(int y) const {
    return std::span<const T>(data_).subspan(index(0, y), width_);
  }

  bool operator==(const Plane&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Image8 = Plane<std::uint8_t>;
using Image16 = Plane<std::uint16_t>;

/// Real-valued intensity image; values in [0, 1] once normalized.
using ImagePlane = Plane<double>;

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // interleaved R,G,B per pixel, row-major
};

/// Per-pixel boolean flag grid.
class ValidityMask {
 public:
  ValidityMask() = default;
  ValidityMask(int width, int height, bool fill = false)
      : flags_(width, height, fill ? std::uint8_t{1} : std::uint8_t{0}) {}

  int width() const { return flags_.width(); }
  int height() const { return flags_.height(); }
  bool operator()(int x, int y) const { return flags_(x, y) != 0; }
  void set(int x, int y, bool v) { flags_(x, y) = v ? 1 : 0; }
  std::size_t count() const;

  bool operator==(const ValidityMask&) const = default;

 private:
  Plane<std::uint8_t> flags_;
};

/// Real disparity per pixel plus a validity flag. Invalid pixels carry no meaningful disparity.
class DisparityMap {
 public:
  DisparityMap() = default;
  DisparityMap(int width, int height) : disparity_(width, height, 0.0), valid_(width, height) {}

  int width() const { return disparity_.width(); }
  int height() const { return disparity_.height(); }

  bool valid(int x, int y) const { return valid_(x, y); }
  double disparity(int x, int y) const { return disparity_(x, y); }

  void set(int x, int y, double d) {
    disparity_(x, y) = d;
    valid_.set(x, y, true);
  }
  void invalidate(int x, int y) {
    disparity_(x, y) = 0.0;
    valid_.set(x, y, false);
  }

  const ValidityMask& mask() const { return valid_; }
  const Plane<double>& disparities() const { return disparity_; }
  std::size_t valid_count() const { return valid_.count(); }

  bool operator==(const DisparityMap&) const = default;

 private:
  Plane<double> disparity_;
  ValidityMask valid_;
};

/// KITTI 16-bit disparity: raw 0 is invalid, otherwise d = raw / 256.
DisparityMap decode_kitti_disparity(const Image16& raw);

/// Inverse of decode_kitti_disparity. Valid pixels encode as round(256 d) clamped to [1, 65535];
/// throws RangeError for negative or too-large disparities.
Image16 encode_kitti_disparity(const DisparityMap& map);

/// v -> v / 255.
ImagePlane normalize(const Image8& image);

/// ITU-R BT.601 luma, rounded to nearest.
Image8 to_luminance(const RgbImage& image);

}  // namespace adsm
