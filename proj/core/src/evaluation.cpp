#include "adsm/evaluation.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <string>

namespace adsm {

double ErrorReport::percent(std::size_t i) const {
  if (total_pixels == 0) return 0.0;
  return 100.0 * static_cast<double>(bad_pixels.at(i)) / static_cast<double>(total_pixels);
}

ErrorReport& ErrorReport::operator+=(const ErrorReport& other) {
  if (thresholds.empty()) {
    *this = other;
    return *this;
  }
  if (thresholds != other.thresholds) throw ShapeError("error reports use different thresholds");
  for (std::size_t i = 0; i < bad_pixels.size(); ++i) bad_pixels[i] += other.bad_pixels[i];
  total_pixels += other.total_pixels;
  return *this;
}

ErrorReport n_pixel_error(const DisparityMap& estimate, const DisparityMap& ground_truth,
                          const std::vector<double>& thresholds) {
  if (estimate.width() != ground_truth.width() || estimate.height() != ground_truth.height()) {
    throw ShapeError("estimate and ground truth differ in size");
  }
  ErrorReport report;
  report.thresholds = thresholds;
  report.bad_pixels.assign(thresholds.size(), 0);
  for (int y = 0; y < ground_truth.height(); ++y) {
    for (int x = 0; x < ground_truth.width(); ++x) {
      if (!ground_truth.valid(x, y)) continue;
      ++report.total_pixels;
      const double err = estimate.valid(x, y)
                             ? std::abs(estimate.disparity(x, y) - ground_truth.disparity(x, y))
                             : std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (err > thresholds[i]) ++report.bad_pixels[i];
      }
    }
  }
  if (report.total_pixels == 0) throw DomainError("ground truth has no valid pixel");
  return report;
}

void write_error_csv(std::ostream& out, const ErrorReport& report) {
  out << "threshold,error_percent,bad_pixels,total_pixels\n";
  for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
    out << report.thresholds[i] << ',' << std::fixed << std::setprecision(4) << report.percent(i)
        << std::defaultfloat << ',' << report.bad_pixels[i] << ',' << report.total_pixels << '\n';
  }
}

void write_error_table(std::ostream& out, const ErrorReport& report) {
  for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
    out << (i ? "\t" : "") << report.thresholds[i] << "-pixel-error";
  }
  out << '\n';
  for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
    out << (i ? "\t" : "") << std::fixed << std::setprecision(2) << report.percent(i);
  }
  out << std::defaultfloat << '\n';
}

double disparity_to_depth(double disparity, const CameraGeometry& geometry) {
  if (!(geometry.baseline > 0.0) || !(geometry.focal_length > 0.0)) {
    throw DomainError("baseline and focal length must be positive");
  }
  if (!(disparity > 0.0)) {
    throw DomainError("disparity must be positive to yield a finite depth");
  }
  return geometry.baseline * geometry.focal_length / disparity;
}

Point2 reproject(double x_left, double y_left, double depth, const CameraGeometry& geometry) {
  if (!(depth > 0.0)) throw DomainError("depth must be positive");
  if (!(geometry.focal_length > 0.0)) throw DomainError("focal length must be positive");
  return {depth * x_left / geometry.focal_length, depth * y_left / geometry.focal_length};
}

Stereogram make_random_dot_stereogram(const Plane<int>& field, std::uint64_t seed) {
  const int w = field.width();
  const int h = field.height();
  for (int v : field.values()) {
    if (v < 0 || v >= w) {
      throw RangeError("disparity field value " + std::to_string(v) + " outside [0, width)");
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> noise(0, 255);
  Stereogram s{Image8(w, h), Image8(w, h), DisparityMap(w, h)};
  for (auto& v : s.right.values()) v = static_cast<std::uint8_t>(noise(rng));

  // Largest-disparity claimant of each right pixel wins; ties go to the leftmost claimant.
  Plane<int> owner(w, h, -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xr = x - field(x, y);
      if (xr < 0) continue;
      const int current = owner(xr, y);
      if (current < 0 || field(x, y) > field(current, y)) owner(xr, y) = x;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int d = field(x, y);
      const int xr = x - d;
      if (xr >= 0 && owner(xr, y) == x) {
        s.left(x, y) = s.right(xr, y);
        s.ground_truth.set(x, y, d);
      } else {
        s.left(x, y) = static_cast<std::uint8_t>(noise(rng));
        s.ground_truth.invalidate(x, y);
      }
    }
  }
  return s;
}

Plane<int> two_plane_field(int width, int height, int background, int foreground, int x0, int y0,
                           int rect_width, int rect_height) {
  Plane<int> field(width, height, background);
  for (int y = std::max(0, y0); y < std::min(height, y0 + rect_height); ++y) {
    for (int x = std::max(0, x0); x < std::min(width, x0 + rect_width); ++x) {
      field(x, y) = foreground;
    }
  }
  return field;
}

}  // namespace adsm
