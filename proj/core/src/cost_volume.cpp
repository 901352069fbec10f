#include "adsm/cost_volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace adsm {
namespace {

void check_pair(const ImagePlane& left, const ImagePlane& right, int max_disparity) {
  if (left.width() != right.width() || left.height() != right.height()) {
    throw ShapeError("left and right images differ in size");
  }
  if (max_disparity < 0) throw DomainError("maximum disparity must be >= 0");
}

void check_window(const ImagePlane& image, int window) {
  if (window < 3 || window % 2 == 0) throw DomainError("window must be odd and >= 3");
  if (window > image.width() || window > image.height()) {
    throw ShapeError("window " + std::to_string(window) + " is larger than the image");
  }
}

double clamped(const ImagePlane& image, int x, int y) {
  return image(std::clamp(x, 0, image.width() - 1), std::clamp(y, 0, image.height() - 1));
}

// Census bits per pixel, packed into `words` 64-bit words: bit i set iff neighbor i < center.
struct CensusImage {
  int width = 0;
  int height = 0;
  int words = 0;
  std::vector<std::uint64_t> bits;

  const std::uint64_t* at(int x, int y) const {
    return bits.data() + (static_cast<std::size_t>(y) * width + x) * words;
  }
};

CensusImage census_transform(const ImagePlane& image, int window) {
  const int r = window / 2;
  const int neighbours = window * window - 1;
  CensusImage out{image.width(), image.height(), (neighbours + 63) / 64, {}};
  out.bits.assign(static_cast<std::size_t>(out.width) * out.height * out.words, 0);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double center = image(x, y);
      std::uint64_t* code =
          out.bits.data() + (static_cast<std::size_t>(y) * out.width + x) * out.words;
      int bit = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (clamped(image, x + dx, y + dy) < center) code[bit / 64] |= std::uint64_t{1} << (bit % 64);
          ++bit;
        }
      }
    }
  }
  return out;
}

// Box sum over an odd window with replicated borders, via a summed-area table on the padded grid.
Plane<double> box_sum(const Plane<double>& values, int window) {
  const int r = window / 2;
  const int w = values.width();
  const int h = values.height();
  const int pw = w + 2 * r;
  const int ph = h + 2 * r;
  std::vector<double> table(static_cast<std::size_t>(pw + 1) * (ph + 1), 0.0);
  auto t = [&](int x, int y) -> double& { return table[static_cast<std::size_t>(y) * (pw + 1) + x]; };
  for (int y = 0; y < ph; ++y) {
    double row = 0.0;
    for (int x = 0; x < pw; ++x) {
      row += values(std::clamp(x - r, 0, w - 1), std::clamp(y - r, 0, h - 1));
      t(x + 1, y + 1) = t(x + 1, y) + row;
    }
  }
  Plane<double> out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out(x, y) = t(x + window, y + window) - t(x, y + window) - t(x + window, y) + t(x, y);
    }
  }
  return out;
}

}  // namespace

CostVolume::CostVolume(int rows, int cols, int levels, double fill)
    : rows_(rows), cols_(cols), levels_(levels) {
  if (rows < 1 || cols < 1 || levels < 1) throw ShapeError("cost volume dimensions must be >= 1");
  data_.assign(static_cast<std::size_t>(rows) * cols * levels, fill);
}

CostVolume cost_from_features(const Tensor& left, const Tensor& right, int max_disparity) {
  if (!left.same_shape(right)) throw ShapeError("feature maps differ in shape");
  if (max_disparity < 0) throw DomainError("maximum disparity must be >= 0");
  const int c = left.channels();
  CostVolume volume(left.height(), left.width(), max_disparity + 1, CostVolume::kInvalidCost);
  for (int y = 0; y < left.height(); ++y) {
    for (int x = 0; x < left.width(); ++x) {
      const auto fl = left.at(y, x);
      auto costs = volume.pixel(y, x);
      const int d_end = std::min(max_disparity, x);
      for (int d = 0; d <= d_end; ++d) {
        const auto fr = right.at(y, x - d);
        double dot = 0.0;
        for (int ch = 0; ch < c; ++ch) dot += fl[ch] * fr[ch];
        costs[d] = -dot;
      }
    }
  }
  return volume;
}

CostVolume build_dsi_learned(const ImagePlane& left, const ImagePlane& right,
                             const FeatureExtractor& extractor, int max_disparity) {
  check_pair(left, right, max_disparity);
  if (extractor.input_channels() != 1) {
    throw ShapeError("feature extractor must take single-channel input");
  }
  const int patch = extractor.patch_size();
  if (validate_geometry(extractor, patch) != 1) {
    throw GeometryError("feature extractor does not reduce its patch to a single cell");
  }
  if (left.width() < patch || left.height() < patch) {
    throw GeometryError("image smaller than the network patch size " + std::to_string(patch));
  }
  const Tensor fl = extractor.forward(to_tensor(left));
  const Tensor fr = extractor.forward(to_tensor(right));
  return cost_from_features(fl, fr, max_disparity);
}

CostVolume build_dsi_census(const ImagePlane& left, const ImagePlane& right, int window,
                            int max_disparity) {
  check_pair(left, right, max_disparity);
  check_window(left, window);
  const CensusImage cl = census_transform(left, window);
  const CensusImage cr = census_transform(right, window);
  CostVolume volume(left.height(), left.width(), max_disparity + 1, CostVolume::kInvalidCost);
  for (int y = 0; y < left.height(); ++y) {
    for (int x = 0; x < left.width(); ++x) {
      const std::uint64_t* a = cl.at(x, y);
      auto costs = volume.pixel(y, x);
      const int d_end = std::min(max_disparity, x);
      for (int d = 0; d <= d_end; ++d) {
        const std::uint64_t* b = cr.at(x - d, y);
        int distance = 0;
        for (int w = 0; w < cl.words; ++w) distance += std::popcount(a[w] ^ b[w]);
        costs[d] = distance;
      }
    }
  }
  return volume;
}

CostVolume build_dsi_sad(const ImagePlane& left, const ImagePlane& right, int window,
                         int max_disparity) {
  check_pair(left, right, max_disparity);
  check_window(left, window);
  const int w = left.width();
  const int h = left.height();
  CostVolume volume(h, w, max_disparity + 1, CostVolume::kInvalidCost);
  for (int d = 0; d <= std::min(max_disparity, w - 1); ++d) {
    // Differences exist on columns [d, w); the box sum replicates that strip's borders.
    Plane<double> diff(w - d, h);
    for (int y = 0; y < h; ++y) {
      for (int x = d; x < w; ++x) diff(x - d, y) = std::abs(left(x, y) - right(x - d, y));
    }
    const Plane<double> sums = box_sum(diff, window);
    for (int y = 0; y < h; ++y) {
      for (int x = d; x < w; ++x) volume(y, x, d) = sums(x - d, y);
    }
  }
  return volume;
}

CostVolume derive_right_dsi(const CostVolume& left_volume) {
  CostVolume right(left_volume.rows(), left_volume.cols(), left_volume.levels(),
                   CostVolume::kInvalidCost);
  for (int y = 0; y < left_volume.rows(); ++y) {
    for (int x = 0; x < left_volume.cols(); ++x) {
      for (int d = 0; d < left_volume.levels() && x + d < left_volume.cols(); ++d) {
        right(y, x, d) = left_volume(y, x + d, d);
      }
    }
  }
  return right;
}

void write_dsi(std::ostream& out, const CostVolume& volume) {
  static_assert(std::endian::native == std::endian::little, "DSI dump assumes little-endian");
  for (int v : {volume.rows(), volume.cols(), volume.levels()}) {
    const auto u = static_cast<std::uint32_t>(v);
    out.write(reinterpret_cast<const char*>(&u), sizeof u);
  }
  for (double c : volume.values()) {
    const float f = static_cast<float>(c);
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
  if (!out) throw IoError("failed writing DSI dump");
}

CostVolume read_dsi(std::istream& in) {
  std::uint32_t dims[3] = {};
  if (!in.read(reinterpret_cast<char*>(dims), sizeof dims)) throw IoError("truncated DSI header");
  CostVolume volume(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
  for (double& c : volume.values()) {
    float f = 0;
    if (!in.read(reinterpret_cast<char*>(&f), sizeof f)) throw IoError("truncated DSI payload");
    c = f;
  }
  return volume;
}

void write_dsi(const std::filesystem::path& path, const CostVolume& volume) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dsi(out, volume);
}

}  // namespace adsm
