#pragma once

#include "adsm/cost_volume.hpp"
#include "adsm/imaging.hpp"

namespace adsm {

/// Per-pixel argmin over d, ties to the smaller d; pixels without a finite cost are invalid.
DisparityMap wta(const CostVolume& volume);

/// Parabola vertex through (d-1, d, d+1). Left unrefined at range ends, next to invalid costs,
/// or when the fit is not convex.
DisparityMap subpixel_refine(const CostVolume& volume, const DisparityMap& integer_map);

/// Offset of the vertex of the parabola through (-1, c_minus), (0, c0), (1, c_plus); 0 when the
/// curvature is not positive.
double parabola_offset(double c_minus, double c0, double c_plus);

/// Valid iff x - round(d) lies inside the image and |D_L(x, y) - D_R(x - round(d), y)| <= threshold.
ValidityMask consistency_check(const DisparityMap& left, const DisparityMap& right,
                               double threshold = 1.0);

/// Each masked-out pixel takes the smaller of the nearest valid values to its left and right;
/// rows without a valid pixel copy the nearest row that has one. Throws DomainError when nothing
/// is valid.
DisparityMap fill_invalid(const DisparityMap& map, const ValidityMask& mask);

/// Replicates edge rows and columns out to full size; the interior lands at
/// ((full_w - w) / 2, (full_h - h) / 2).
DisparityMap pad_to_full(const DisparityMap& map, int full_width, int full_height);
DisparityMap pad_to_full(const DisparityMap& map, int full_width, int full_height, int offset_x,
                         int offset_y);

}  // namespace adsm
