#pragma once

#include <filesystem>

#include "adsm/imaging.hpp"

namespace adsm {

// 8-bit grayscale read. Color or alpha inputs are reduced to BT.601 luminance; 16-bit inputs are
// rejected, use read_png16 for those.
Image8 read_png8(const std::filesystem::path& path);

// 16-bit single-channel read (KITTI disparity convention).
Image16 read_png16(const std::filesystem::path& path);

void write_png8(const std::filesystem::path& path, const Image8& image);
void write_png16(const std::filesystem::path& path, const Image16& image);

inline DisparityMap read_kitti_disparity(const std::filesystem::path& path) {
  return decode_kitti_disparity(read_png16(path));
}

inline void write_kitti_disparity(const std::filesystem::path& path, const DisparityMap& map) {
  write_png16(path, encode_kitti_disparity(map));
}

}  // namespace adsm
