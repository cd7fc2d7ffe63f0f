#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fuse2d/fusion.hpp"

namespace fuse2d {

enum class ColorScheme : std::uint8_t { Grayscale, ManualRGB, Custom };

std::string to_string(ColorScheme s);            // "gray", "manual", "custom"
ColorScheme parse_color_scheme(std::string_view);  // also accepts "grayscale", "rgb"

using Rgb = std::array<std::uint8_t, 3>;

/// Interleaved 8-bit RGB raster.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  Rgb at(int row, int col) const;
  void set(int row, int col, Rgb c);
  bool operator==(const RgbImage&) const = default;
};

inline constexpr int kImageSide = 128;
inline constexpr int kUpscale = kImageSide / kMatrixSide;

struct FusedImage {
  RgbImage image;  // 128x128
  ColorScheme scheme = ColorScheme::Custom;
  Provenance provenance;
};

/// round(255 * v) with halves rounded up.
std::uint8_t to_byte(double v);

RgbImage map_grayscale(const SignalMatrix& m);
RgbImage map_manual_rgb(const SignalMatrix& m);

/// Parameters of the custom colormap.
struct CustomColormap {
  static constexpr double kClamp = 0.95;
  static constexpr double kHueStart = 240.0;  // blue at the low end, red at the clamp
  static constexpr double kValueFloor = 0.15;

  /// Clamped, rescaled position u in [0, 1].
  static double position(double v);
  /// HSV components for a cell value.
  static std::array<double, 3> hsv(double v);
};

std::array<double, 3> hsv_to_rgb(double hue_deg, double sat, double value);
Rgb custom_color(double v);
RgbImage map_custom(const SignalMatrix& m);

RgbImage colorize(const SignalMatrix& m, ColorScheme scheme);

/// Nearest-neighbour x4: each source pixel becomes a 4x4 block.
FusedImage upscale_nearest(const RgbImage& img, ColorScheme scheme = ColorScheme::Custom,
                           Provenance provenance = {});

/// Top-left pixel of each `factor` x `factor` block.
RgbImage downsample_blocks(const RgbImage& img, int factor);

/// 8-bit RGB PNG, no alpha. Output bytes depend only on the pixels.
void write_png(const RgbImage& img, const std::filesystem::path& path);
void write_png(const FusedImage& img, const std::filesystem::path& path);
RgbImage read_png(const std::filesystem::path& path);

std::string image_file_name(const Provenance& p, ColorScheme scheme);

}  // namespace fuse2d
