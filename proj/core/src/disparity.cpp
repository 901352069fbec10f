#include "adsm/disparity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace adsm {

DisparityMap wta(const CostVolume& volume) {
  DisparityMap map(volume.cols(), volume.rows());
  for (int y = 0; y < volume.rows(); ++y) {
    for (int x = 0; x < volume.cols(); ++x) {
      const auto costs = volume.pixel(y, x);
      int best = -1;
      double best_cost = CostVolume::kInvalidCost;
      for (int d = 0; d < volume.levels(); ++d) {
        if (costs[d] < best_cost) {
          best_cost = costs[d];
          best = d;
        }
      }
      if (best < 0) {
        map.invalidate(x, y);
      } else {
        map.set(x, y, best);
      }
    }
  }
  return map;
}

double parabola_offset(double c_minus, double c0, double c_plus) {
  const double curvature = c_minus - 2.0 * c0 + c_plus;
  if (!(curvature > 0.0)) return 0.0;
  return (c_minus - c_plus) / (2.0 * curvature);
}

DisparityMap subpixel_refine(const CostVolume& volume, const DisparityMap& integer_map) {
  if (integer_map.width() != volume.cols() || integer_map.height() != volume.rows()) {
    throw ShapeError("disparity map and cost volume grids differ");
  }
  DisparityMap out = integer_map;
  for (int y = 0; y < volume.rows(); ++y) {
    for (int x = 0; x < volume.cols(); ++x) {
      if (!integer_map.valid(x, y)) continue;
      const int d = static_cast<int>(std::lround(integer_map.disparity(x, y)));
      if (d <= 0 || d >= volume.max_disparity()) continue;
      const double cm = volume(y, x, d - 1);
      const double c0 = volume(y, x, d);
      const double cp = volume(y, x, d + 1);
      if (is_invalid_cost(cm) || is_invalid_cost(c0) || is_invalid_cost(cp)) continue;
      out.set(x, y, d + parabola_offset(cm, c0, cp));
    }
  }
  return out;
}

ValidityMask consistency_check(const DisparityMap& left, const DisparityMap& right,
                               double threshold) {
  if (left.width() != right.width() || left.height() != right.height()) {
    throw ShapeError("left and right disparity maps differ in size");
  }
  ValidityMask mask(left.width(), left.height());
  for (int y = 0; y < left.height(); ++y) {
    for (int x = 0; x < left.width(); ++x) {
      if (!left.valid(x, y)) continue;
      const double d = left.disparity(x, y);
      const long xr = x - std::lround(d);
      if (xr < 0 || xr >= left.width()) continue;
      const int xi = static_cast<int>(xr);
      if (!right.valid(xi, y)) continue;
      mask.set(x, y, std::abs(d - right.disparity(xi, y)) <= threshold);
    }
  }
  return mask;
}

DisparityMap fill_invalid(const DisparityMap& map, const ValidityMask& mask) {
  if (mask.width() != map.width() || mask.height() != map.height()) {
    throw ShapeError("mask and disparity map differ in size");
  }
  const int w = map.width();
  const int h = map.height();
  DisparityMap out(w, h);
  std::vector<bool> row_has_valid(static_cast<std::size_t>(h), false);
  constexpr double kNone = std::numeric_limits<double>::infinity();
  std::vector<double> from_left(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    double last = kNone;
    for (int x = 0; x < w; ++x) {
      if (mask(x, y)) last = map.disparity(x, y);
      from_left[x] = last;
    }
    double next = kNone;
    for (int x = w - 1; x >= 0; --x) {
      if (mask(x, y)) {
        next = map.disparity(x, y);
        out.set(x, y, next);
        row_has_valid[y] = true;
        continue;
      }
      const double v = std::min(from_left[x], next);
      if (v != kNone) out.set(x, y, v);
    }
  }

  std::vector<int> source_row(static_cast<std::size_t>(h), -1);
  for (int y = 0; y < h; ++y) {
    if (row_has_valid[y]) continue;
    int best = -1;
    for (int dist = 1; dist < h && best < 0; ++dist) {
      if (y - dist >= 0 && row_has_valid[y - dist]) best = y - dist;
      else if (y + dist < h && row_has_valid[y + dist]) best = y + dist;
    }
    if (best < 0) throw DomainError("cannot fill a disparity map with no valid pixel");
    source_row[y] = best;
  }
  for (int y = 0; y < h; ++y) {
    if (source_row[y] < 0) continue;
    for (int x = 0; x < w; ++x) out.set(x, y, out.disparity(x, source_row[y]));
  }
  return out;
}

DisparityMap pad_to_full(const DisparityMap& map, int full_width, int full_height) {
  return pad_to_full(map, full_width, full_height, (full_width - map.width()) / 2,
                     (full_height - map.height()) / 2);
}

DisparityMap pad_to_full(const DisparityMap& map, int full_width, int full_height, int offset_x,
                         int offset_y) {
  if (map.width() > full_width || map.height() > full_height) {
    throw ShapeError("disparity map is larger than the requested full size");
  }
  if (offset_x < 0 || offset_y < 0 || offset_x + map.width() > full_width ||
      offset_y + map.height() > full_height) {
    throw ShapeError("interior offset places the map outside the full frame");
  }
  DisparityMap out(full_width, full_height);
  for (int y = 0; y < full_height; ++y) {
    const int sy = std::clamp(y - offset_y, 0, map.height() - 1);
    for (int x = 0; x < full_width; ++x) {
      const int sx = std::clamp(x - offset_x, 0, map.width() - 1);
      if (map.valid(sx, sy)) {
        out.set(x, y, map.disparity(sx, sy));
      } else {
        out.invalidate(x, y);
      }
    }
  }
  return out;
}

}  // namespace adsm
