#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "adsm/imaging.hpp"

namespace adsm {

inline const std::vector<double> kDefaultThresholds = {2.0, 3.0, 4.0, 5.0};

struct ErrorReport {
  std::vector<double> thresholds;
  std::vector<std::uint64_t> bad_pixels;  // |est - gt| > threshold, per threshold
  std::uint64_t total_pixels = 0;         // pixels with valid ground truth

  double percent(std::size_t i) const;
  /// Adds the counts of another report over the same thresholds.
  ErrorReport& operator+=(const ErrorReport& other);
};

/// n-pixel error over valid-ground-truth pixels. An invalid estimate counts as bad.
/// Throws DomainError when the ground truth has no valid pixel.
ErrorReport n_pixel_error(const DisparityMap& estimate, const DisparityMap& ground_truth,
                          const std::vector<double>& thresholds = kDefaultThresholds);

/// CSV with header threshold,error_percent,bad_pixels,total_pixels.
void write_error_csv(std::ostream& out, const ErrorReport& report);
/// Table layout: "2-pixel-error 3-pixel-error ..." header and one row of percentages.
void write_error_table(std::ostream& out, const ErrorReport& report);

struct CameraGeometry {
  double baseline = 1.0;      // meters
  double focal_length = 1.0;  // pixels
};

/// z = B f / d. Throws DomainError for d <= 0 or invalid geometry.
double disparity_to_depth(double disparity, const CameraGeometry& geometry);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// x = z x_l / f, y = z y_l / f.
Point2 reproject(double x_left, double y_left, double depth, const CameraGeometry& geometry);

struct Stereogram {
  Image8 left;
  Image8 right;
  DisparityMap ground_truth;
};

/// Random-dot pair: the right view is seeded uniform noise, the left view copies
/// I_L(x, y) = I_R(x - d(x, y), y). Pixels with x - d < 0, or that lose a right pixel to a
/// larger-disparity claimant, get fresh noise and invalid ground truth.
Stereogram make_random_dot_stereogram(const Plane<int>& disparity_field, std::uint64_t seed);

/// Field with disparity `background` everywhere except `foreground` inside the given rectangle.
Plane<int> two_plane_field(int width, int height, int background, int foreground, int x0, int y0,
                           int rect_width, int rect_height);

}  // namespace adsm
