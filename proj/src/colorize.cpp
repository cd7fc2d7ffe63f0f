#include "fuse2d/colorize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fuse2d/error.hpp"

namespace fuse2d {

std::string to_string(ColorScheme s) {
  switch (s) {
    case ColorScheme::Grayscale: return "gray";
    case ColorScheme::ManualRGB: return "manual";
    case ColorScheme::Custom: return "custom";
  }
  return "custom";
}

ColorScheme parse_color_scheme(std::string_view s) {
  if (s == "gray" || s == "grayscale") return ColorScheme::Grayscale;
  if (s == "manual" || s == "rgb" || s == "manual-rgb") return ColorScheme::ManualRGB;
  if (s == "custom") return ColorScheme::Custom;
  throw std::invalid_argument("unknown color scheme '" + std::string(s) + "'");
}

Rgb RgbImage::at(int row, int col) const {
  const auto i = (static_cast<std::size_t>(row) * width + col) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void RgbImage::set(int row, int col, Rgb c) {
  const auto i = (static_cast<std::size_t>(row) * width + col) * 3;
  pixels[i] = c[0];
  pixels[i + 1] = c[1];
  pixels[i + 2] = c[2];
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(255.0 * v + 0.5), 0.0, 255.0));
}

namespace {

void check_range(const SignalMatrix& m) {
  for (double v : m.cells) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("matrix cell outside [0,1]");
  }
}

template <class F>
RgbImage map_cells(const SignalMatrix& m, F&& color) {
  RgbImage out(kMatrixSide, kMatrixSide);
  for (int r = 0; r < kMatrixSide; ++r) {
    for (int c = 0; c < kMatrixSide; ++c) out.set(r, c, color(r, m.at(r, c)));
  }
  return out;
}

}  // namespace

RgbImage map_grayscale(const SignalMatrix& m) {
  check_range(m);
  return map_cells(m, [](int, double v) {
    const auto b = to_byte(v);
    return Rgb{b, b, b};
  });
}

RgbImage map_manual_rgb(const SignalMatrix& m) {
  check_range(m);
  return map_cells(m, [&](int row, double v) {
    const auto b = to_byte(v);
    switch (m.band_map[static_cast<std::size_t>(row)]) {
      case RowTag::P: return Rgb{0, b, 0};
      case RowTag::E: return Rgb{b, 0, 0};
      case RowTag::A: return Rgb{0, 0, b};
      case RowTag::Fill: break;
    }
    return Rgb{0, 0, 0};
  });
}

double CustomColormap::position(double v) { return std::min(v, kClamp) / kClamp; }

std::array<double, 3> CustomColormap::hsv(double v) {
  const double u = position(v);
  return {kHueStart * (1.0 - u), 1.0, kValueFloor + (1.0 - kValueFloor) * u};
}

std::array<double, 3> hsv_to_rgb(double hue_deg, double sat, double value) {
  const double c = value * sat;
  const double hp = std::fmod(std::max(hue_deg, 0.0), 360.0) / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  const double m = value - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  return {r + m, g + m, b + m};
}

Rgb custom_color(double v) {
  const auto [h, s, val] = CustomColormap::hsv(v);
  const auto rgb = hsv_to_rgb(h, s, val);
  return {to_byte(rgb[0]), to_byte(rgb[1]), to_byte(rgb[2])};
}

RgbImage map_custom(const SignalMatrix& m) {
  check_range(m);
  return map_cells(m, [](int, double v) { return custom_color(v); });
}

RgbImage colorize(const SignalMatrix& m, ColorScheme scheme) {
  switch (scheme) {
    case ColorScheme::Grayscale: return map_grayscale(m);
    case ColorScheme::ManualRGB: return map_manual_rgb(m);
    case ColorScheme::Custom: return map_custom(m);
  }
  return map_custom(m);
}

FusedImage upscale_nearest(const RgbImage& img, ColorScheme scheme, Provenance provenance) {
  if (img.width != kMatrixSide || img.height != kMatrixSide) {
    throw std::invalid_argument("upscale_nearest expects a 32x32 image, got " +
                                std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  FusedImage out{RgbImage(kImageSide, kImageSide), scheme, std::move(provenance)};
  for (int r = 0; r < kImageSide; ++r) {
    for (int c = 0; c < kImageSide; ++c) out.image.set(r, c, img.at(r / kUpscale, c / kUpscale));
  }
  return out;
}

RgbImage downsample_blocks(const RgbImage& img, int factor) {
  if (factor < 1 || img.width % factor || img.height % factor) {
    throw std::invalid_argument("image size is not a multiple of the block factor");
  }
  RgbImage out(img.width / factor, img.height / factor);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) out.set(r, c, img.at(r * factor, c * factor));
  }
  return out;
}

std::string image_file_name(const Provenance& p, ColorScheme scheme) {
  return p.subject_id + "_" + std::to_string(p.start_s) + "_" + p.arrangement + "_" + to_string(scheme) +
         ".png";
}

}  // namespace fuse2d
