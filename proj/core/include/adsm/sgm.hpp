#pragma once

#include <array>

#include "adsm/cost_volume.hpp"

namespace adsm {

struct Penalties {
  double p1 = 30.0;
  double p2 = 160.0;
};

/// Throws DomainError unless 0 < p1 <= p2.
void validate(const Penalties& penalties);

enum class Direction { LeftToRight, RightToLeft, TopToBottom, BottomToTop };

inline constexpr std::array<Direction, 4> kAllDirections = {
    Direction::LeftToRight, Direction::RightToLeft, Direction::TopToBottom,
    Direction::BottomToTop};

/// One scanline pass of
///   L(p, d) = C(p, d) + min{L(p-r, d), L(p-r, d+-1) + P1, min_k L(p-r, k) + P2}
///             - min_k L(p-r, k)
/// with L = C on the first pixel of every scanline. Invalid costs stay invalid and are skipped
/// by the minima; a predecessor with no finite level restarts the recurrence.
CostVolume aggregate_direction(const CostVolume& volume, Direction direction,
                               const Penalties& penalties);

/// Sum of the four directional aggregations.
CostVolume aggregate_all(const CostVolume& volume, const Penalties& penalties);

}  // namespace adsm
