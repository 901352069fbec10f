#include "adsm/sgm.hpp"

#include <algorithm>
#include <cmath>

namespace adsm {
namespace {

double finite_min(std::span<const double> costs) {
  double m = CostVolume::kInvalidCost;
  for (double c : costs) m = std::min(m, c);
  return m;
}

void step(std::span<const double> cost, std::span<const double> prev, std::span<double> out,
          const Penalties& pen) {
  const double prev_min = finite_min(prev);
  const int levels = static_cast<int>(cost.size());
  if (is_invalid_cost(prev_min)) {
    std::copy(cost.begin(), cost.end(), out.begin());
    return;
  }
  // Penalties are taken relative to the predecessor minimum, so the added term lies in
  // [0, P2] exactly and L >= C holds in floating point, not just algebraically.
  for (int d = 0; d < levels; ++d) {
    if (is_invalid_cost(cost[d])) {
      out[d] = CostVolume::kInvalidCost;
      continue;
    }
    double extra = std::min(prev[d] - prev_min, pen.p2);
    if (d > 0) extra = std::min(extra, (prev[d - 1] - prev_min) + pen.p1);
    if (d + 1 < levels) extra = std::min(extra, (prev[d + 1] - prev_min) + pen.p1);
    out[d] = cost[d] + extra;
  }
}

}  // namespace

void validate(const Penalties& penalties) {
  if (!(penalties.p1 > 0.0) || !(penalties.p1 <= penalties.p2)) {
    throw DomainError("SGM penalties must satisfy 0 < P1 <= P2");
  }
}

CostVolume aggregate_direction(const CostVolume& volume, Direction direction,
                               const Penalties& penalties) {
  validate(penalties);
  CostVolume out(volume.rows(), volume.cols(), volume.levels());
  const int rows = volume.rows();
  const int cols = volume.cols();
  switch (direction) {
    case Direction::LeftToRight:
    case Direction::RightToLeft: {
      const bool forward = direction == Direction::LeftToRight;
      for (int y = 0; y < rows; ++y) {
        for (int i = 0; i < cols; ++i) {
          const int x = forward ? i : cols - 1 - i;
          if (i == 0) {
            std::ranges::copy(volume.pixel(y, x), out.pixel(y, x).begin());
          } else {
            step(volume.pixel(y, x), out.pixel(y, forward ? x - 1 : x + 1), out.pixel(y, x),
                 penalties);
          }
        }
      }
      break;
    }
    case Direction::TopToBottom:
    case Direction::BottomToTop: {
      const bool forward = direction == Direction::TopToBottom;
      for (int i = 0; i < rows; ++i) {
        const int y = forward ? i : rows - 1 - i;
        for (int x = 0; x < cols; ++x) {
          if (i == 0) {
            std::ranges::copy(volume.pixel(y, x), out.pixel(y, x).begin());
          } else {
            step(volume.pixel(y, x), out.pixel(forward ? y - 1 : y + 1, x), out.pixel(y, x),
                 penalties);
          }
        }
      }
      break;
    }
  }
  return out;
}

CostVolume aggregate_all(const CostVolume& volume, const Penalties& penalties) {
  CostVolume sum = aggregate_direction(volume, kAllDirections[0], penalties);
  for (std::size_t i = 1; i < kAllDirections.size(); ++i) {
    const CostVolume part = aggregate_direction(volume, kAllDirections[i], penalties);
    auto dst = sum.values();
    auto src = part.values();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
  return sum;
}

}  // namespace adsm
