#include <png.h>

#include <cstring>

#include "fuse2d/colorize.hpp"
#include "fuse2d/error.hpp"

namespace fuse2d {

void write_png(const RgbImage& img, const std::filesystem::path& path) {
  if (img.width <= 0 || img.height <= 0 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
    throw std::invalid_argument("write_png: malformed image buffer");
  }
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  const int ok = png_image_write_to_file(&png, path.c_str(), 0, img.pixels.data(), 0, nullptr);
  if (!ok) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("cannot write PNG " + path.string() + ": " + msg);
  }
}

void write_png(const FusedImage& img, const std::filesystem::path& path) {
  if (img.image.width != kImageSide || img.image.height != kImageSide) {
    throw std::invalid_argument("fused image must be 128x128");
  }
  write_png(img.image, path);
}

RgbImage read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("cannot read PNG " + path.string() + ": " + msg);
  }
  png.format = PNG_FORMAT_RGB;
  RgbImage out(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

}  // namespace fuse2d
