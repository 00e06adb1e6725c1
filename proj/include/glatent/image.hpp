#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "glatent/tensor.hpp"

namespace glatent {

using Rgb = std::array<std::uint8_t, 3>;

// Interleaved 8-bit RGB raster, row-major from the top-left corner.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h);

  std::uint8_t& at(int x, int y, int channel);
  std::uint8_t at(int x, int y, int channel) const;
  void set(int x, int y, const Rgb& color);
};

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

// Planar [3,H,W] tensor in [0,1] <-> interleaved bytes (round(v*255)).
TensorPtr image_to_tensor(const Image& image);
Image tensor_to_image(const Tensor& t);

// Rasterizer primitives. All use pixel-center coverage tests and clip to the
// canvas, so out-of-range geometry is a caller error caught upstream.
void fill_rect(Image& img, int x, int y, int w, int h, const Rgb& color);
void fill_ellipse(Image& img, double cx, double cy, double rx, double ry, const Rgb& color);

// Heart in an extent-by-extent box at (x, y): two half-discs over an
// inverted triangle whose top edge sits a quarter of the way down.
void fill_heart(Image& img, int x, int y, int extent, const Rgb& color);

}  // namespace glatent
