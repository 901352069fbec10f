#include "adsm/tensor.hpp"

#include <algorithm>

namespace adsm {

Tensor::Tensor(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ShapeError("tensor dimensions must be >= 1");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Tensor Tensor::crop(int y0, int x0, int h, int w) const {
  if (y0 < 0 || x0 < 0 || y0 + h > height_ || x0 + w > width_) {
    throw ShapeError("crop window outside tensor");
  }
  Tensor out(h, w, channels_);
  for (int y = 0; y < h; ++y) {
    const double* src = data_.data() + index(y0 + y, x0, 0);
    std::copy(src, src + static_cast<std::size_t>(w) * channels_, out.data() + out.index(y, 0, 0));
  }
  return out;
}

Tensor to_tensor(const ImagePlane& plane) {
  Tensor t(plane.height(), plane.width(), 1);
  std::copy(plane.values().begin(), plane.values().end(), t.values().begin());
  return t;
}

Tensor crop_to_tensor(const ImagePlane& plane, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || x0 + width > plane.width() || y0 + height > plane.height()) {
    throw ShapeError("patch window outside image");
  }
  Tensor t(height, width, 1);
  for (int y = 0; y < height; ++y) {
    const auto row = plane.row(y0 + y).subspan(x0, width);
    std::copy(row.begin(), row.end(), t.data() + static_cast<std::size_t>(y) * width);
  }
  return t;
}

}  // namespace adsm
