#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "manifold/tensor.hpp"

namespace manifold {

// 8-bit grayscale raster. Pixel (r, c) lives at r * width + c.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  std::uint8_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
};

// Clamp to [0,1], scale by 255 and round half to even.
std::uint8_t quantize_unit(double v);
GrayImage quantize_image(const Vec& values, int width, int height);

// Tiles images into rows x cols cells with 1-pixel separators (mid gray).
// All cells must share one size; missing cells stay at the separator shade.
GrayImage assemble_grid(const std::vector<GrayImage>& cells, int rows, int cols);

// Binary PGM (P5, maxval 255).
std::string encode_pgm(const GrayImage& img);

// Minimal grayscale PNG: stored (uncompressed) deflate blocks inside a zlib
// stream, CRC32 per chunk. Deterministic bytes for a given raster.
std::string encode_png(const GrayImage& img);

// Simple polyline chart: one SVG per call, one polyline per series over a
// shared x grid. Used for spectrum and distance-curve plots.
struct SvgSeries {
  std::string label;
  std::vector<double> y;
};

std::string render_line_svg(const std::vector<double>& x, const std::vector<SvgSeries>& series,
                            const std::string& x_label, const std::string& y_label,
                            bool log_y = false);

}  // namespace manifold
