#pragma once

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "adsm/imaging.hpp"
#include "adsm/network.hpp"

namespace adsm {

/// Disparity space image: rows x cols x levels matching costs (smaller is better), d in
/// [0, levels). Out-of-range correspondences hold kInvalidCost.
class CostVolume {
 public:
  static constexpr double kInvalidCost = std::numeric_limits<double>::infinity();

  CostVolume() = default;
  CostVolume(int rows, int cols, int levels, double fill = 0.0);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int levels() const { return levels_; }
  int max_disparity() const { return levels_ - 1; }

  double& operator()(int y, int x, int d) { return data_[index(y, x, d)]; }
  double operator()(int y, int x, int d) const { return data_[index(y, x, d)]; }

  /// All levels of one pixel.
  std::span<double> pixel(int y, int x) {
    return std::span<double>(data_).subspan(index(y, x, 0), levels_);
  }
  std::span<const double> pixel(int y, int x) const {
    return std::span<const double>(data_).subspan(index(y, x, 0), levels_);
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool operator==(const CostVolume&) const = default;

 private:
  std::size_t index(int y, int x, int d) const {
    return (static_cast<std::size_t>(y) * cols_ + x) * levels_ + d;
  }

  int rows_ = 0;
  int cols_ = 0;
  int levels_ = 0;
  std::vector<double> data_;
};

inline bool is_invalid_cost(double c) { return c == CostVolume::kInvalidCost; }

/// Full-image feature maps of both views; Cost(x, y, d) = -<f_L(x, y), f_R(x - d, y)>.
/// The grid is the valid-convolution interior, shrunk by patch_size - 1 in each axis.
CostVolume build_dsi_learned(const ImagePlane& left, const ImagePlane& right,
                             const FeatureExtractor& extractor, int max_disparity);

/// Same cost from precomputed H' x W' x C feature maps.
CostVolume cost_from_features(const Tensor& left_features, const Tensor& right_features,
                              int max_disparity);

/// Hamming distance between census transforms over an odd window (borders replicate).
CostVolume build_dsi_census(const ImagePlane& left, const ImagePlane& right, int window,
                            int max_disparity);

/// Sum of absolute intensity differences |I_L(x) - I_R(x - d)| over an odd window. The difference
/// plane of level d covers columns [d, width) and its borders replicate.
CostVolume build_dsi_sad(const ImagePlane& left, const ImagePlane& right, int window,
                         int max_disparity);

/// Right-view volume from the left one: Cost_R(x, y, d) = Cost_L(x + d, y, d).
CostVolume derive_right_dsi(const CostVolume& left_volume);

// DSI dump: u32 rows, cols, levels, then row-major float32 (y, x, d), invalid as +inf.
void write_dsi(std::ostream& out, const CostVolume& volume);
CostVolume read_dsi(std::istream& in);
void write_dsi(const std::filesystem::path& path, const CostVolume& volume);

}  // namespace adsm
