#include "adsm/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

namespace adsm {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw IoError("cannot open " + path.string());
  }
  return f;
}

// Decoded rows in a uniform layout: 8- or 16-bit samples, native byte order for 16-bit.
struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;
};

thread_local char png_error_text[256];

// Keeps libpng quiet on stderr; the message travels into the thrown IoError instead.
[[noreturn]] void on_png_error(png_structp png, png_const_charp text) {
  std::snprintf(png_error_text, sizeof png_error_text, "%s", text);
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

// libpng reports errors through longjmp; keep every setjmp frame free of non-trivial objects.
bool read_raw(std::FILE* file, RawPng& out, std::string& message) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
  if (png == nullptr) {
    message = "png_create_read_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    message = "png_create_info_struct failed";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    message = std::string("corrupt or unsupported PNG: ") + png_error_text;
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_strip_alpha(png);
  }
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) {
    png_read_row(png, out.bytes.data() + stride * static_cast<std::size_t>(y), nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

RawPng read_any(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  RawPng raw;
  std::string message;
  if (!read_raw(file.get(), raw, message)) {
    throw IoError(path.string() + ": " + message);
  }
  return raw;
}

bool write_raw(std::FILE* file, int width, int height, int bit_depth, const std::uint8_t* data,
               std::string& message) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
  if (png == nullptr) {
    message = "png_create_write_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    message = "png_create_info_struct failed";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    message = std::string("PNG encoding failed: ") + png_error_text;
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  const std::size_t stride = static_cast<std::size_t>(width) * (bit_depth / 8);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, data + stride * static_cast<std::size_t>(y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

void write_gray(const std::filesystem::path& path, int width, int height, int bit_depth,
                const std::uint8_t* data) {
  FilePtr file = open_file(path, "wb");
  std::string message;
  if (!write_raw(file.get(), width, height, bit_depth, data, message)) {
    throw IoError(path.string() + ": " + message);
  }
  if (std::fflush(file.get()) != 0) {
    throw IoError(path.string() + ": write failed");
  }
}

}  // namespace

Image8 read_png8(const std::filesystem::path& path) {
  RawPng raw = read_any(path);
  if (raw.bit_depth != 8) {
    throw IoError(path.string() + ": expected an 8-bit image, got " +
                  std::to_string(raw.bit_depth) + "-bit");
  }
  if (raw.channels == 1) {
    Image8 out(raw.width, raw.height);
    std::copy(raw.bytes.begin(), raw.bytes.end(), out.values().begin());
    return out;
  }
  if (raw.channels == 3) {
    return to_luminance(RgbImage{raw.width, raw.height, std::move(raw.bytes)});
  }
  throw IoError(path.string() + ": unsupported channel count " + std::to_string(raw.channels));
}

Image16 read_png16(const std::filesystem::path& path) {
  RawPng raw = read_any(path);
  if (raw.bit_depth != 16 || raw.channels != 1) {
    throw IoError(path.string() + ": expected a 16-bit single-channel image");
  }
  Image16 out(raw.width, raw.height);
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::uint16_t v;
    std::memcpy(&v, raw.bytes.data() + 2 * i, sizeof v);
    dst[i] = v;
  }
  return out;
}

void write_png8(const std::filesystem::path& path, const Image8& image) {
  write_gray(path, image.width(), image.height(), 8, image.values().data());
}

void write_png16(const std::filesystem::path& path, const Image16& image) {
  write_gray(path, image.width(), image.height(), 16,
             reinterpret_cast<const std::uint8_t*>(image.values().data()));
}

}  // namespace adsm
