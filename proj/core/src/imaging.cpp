#include "adsm/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace adsm {

std::size_t ValidityMask::count() const {
  const auto values = flags_.values();
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

DisparityMap decode_kitti_disparity(const Image16& raw) {
  DisparityMap map(raw.width(), raw.height());
  for (int y = 0; y < raw.height(); ++y) {
    for (int x = 0; x < raw.width(); ++x) {
      const std::uint16_t v = raw(x, y);
      if (v == 0) {
        map.invalidate(x, y);
      } else {
        map.set(x, y, static_cast<double>(v) / 256.0);
      }
    }
  }
  return map;
}

Image16 encode_kitti_disparity(const DisparityMap& map) {
  constexpr double kMax = 65535.0 / 256.0;
  Image16 raw(map.width(), map.height(), 0);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (!map.valid(x, y)) {
        continue;
      }
      const double d = map.disparity(x, y);
      if (!(d >= 0.0) || d >= kMax + 0.5 / 256.0) {
        throw RangeError("disparity " + std::to_string(d) + " at (" + std::to_string(x) + ", " +
                         std::to_string(y) + ") is outside the 16-bit KITTI range");
      }
      const double scaled = std::round(d * 256.0);
      raw(x, y) = static_cast<std::uint16_t>(std::clamp(scaled, 1.0, 65535.0));
    }
  }
  return raw;
}

ImagePlane normalize(const Image8& image) {
  ImagePlane out(image.width(), image.height());
  auto src = image.values();
  auto dst = out.values();
  std::transform(src.begin(), src.end(), dst.begin(),
                 [](std::uint8_t v) { return static_cast<double>(v) / 255.0; });
  return out;
}

Image8 to_luminance(const RgbImage& image) {
  if (image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw ShapeError("RGB buffer size does not match image dimensions");
  }
  Image8 out(image.width, image.height);
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double r = image.rgb[3 * i];
    const double g = image.rgb[3 * i + 1];
    const double b = image.rgb[3 * i + 2];
    dst[i] = static_cast<std::uint8_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
  }
  return out;
}

}  // namespace adsm
