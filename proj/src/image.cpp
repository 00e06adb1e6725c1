#include "glatent/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace glatent {

Image::Image(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw std::invalid_argument("Image: non-positive dimensions");
  pixels.assign(static_cast<std::size_t>(w) * h * 3, 0);
}

std::uint8_t& Image::at(int x, int y, int channel) {
  return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + channel];
}

std::uint8_t Image::at(int x, int y, int channel) const {
  return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + channel];
}

void Image::set(int x, int y, const Rgb& color) {
  for (int c = 0; c < 3; ++c) at(x, y, c) = color[static_cast<std::size_t>(c)];
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for reading");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("corrupt PNG file: " + path.string());
  }

  png_init_io(png, file.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Image img(static_cast<int>(w), static_cast<int>(h));
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.width <= 0 || image.height <= 0)
    throw std::invalid_argument("write_png: empty image");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());

  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG write failed: " + path.string());
  }

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_const_bytep> rows(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y)
    rows[static_cast<std::size_t>(y)] =
        image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3;
  png_write_rows(png, const_cast<png_bytepp>(rows.data()),
                 static_cast<png_uint_32>(image.height));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

TensorPtr image_to_tensor(const Image& image) {
  auto t = tensor({3, image.height, image.width});
  const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c)
        t->values[static_cast<std::size_t>(c) * plane +
                  static_cast<std::size_t>(y) * image.width + x] = image.at(x, y, c) / 255.0;
  return t;
}

Image tensor_to_image(const Tensor& t) {
  if (t.shape.size() != 3 || t.shape[0] != 3)
    throw std::invalid_argument("tensor_to_image: expected [3,H,W], got " + shape_str(t.shape));
  const int h = t.shape[1], w = t.shape[2];
  Image img(w, h);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = t.values[static_cast<std::size_t>(c) * plane +
                                  static_cast<std::size_t>(y) * w + x];
        const double clamped = std::min(std::max(v, 0.0), 1.0);
        img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(clamped * 255.0));
      }
  return img;
}

void fill_rect(Image& img, int x, int y, int w, int h, const Rgb& color) {
  const int x0 = std::max(x, 0), y0 = std::max(y, 0);
  const int x1 = std::min(x + w, img.width), y1 = std::min(y + h, img.height);
  for (int py = y0; py < y1; ++py)
    for (int px = x0; px < x1; ++px) img.set(px, py, color);
}

void fill_ellipse(Image& img, double cx, double cy, double rx, double ry, const Rgb& color) {
  if (rx <= 0 || ry <= 0) return;
  const int x0 = std::max(static_cast<int>(std::floor(cx - rx)), 0);
  const int x1 = std::min(static_cast<int>(std::ceil(cx + rx)), img.width - 1);
  const int y0 = std::max(static_cast<int>(std::floor(cy - ry)), 0);
  const int y1 = std::min(static_cast<int>(std::ceil(cy + ry)), img.height - 1);
  for (int py = y0; py <= y1; ++py)
    for (int px = x0; px <= x1; ++px) {
      const double dx = (px + 0.5 - cx) / rx;
      const double dy = (py + 0.5 - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) img.set(px, py, color);
    }
}

void fill_heart(Image& img, int x, int y, int extent, const Rgb& color) {
  const double e = extent;
  const double r = e / 4.0;        // lobe radius
  const double shoulder = e / 4.0; // vertical line through both lobe centers
  for (int py = std::max(y, 0); py < std::min(y + extent, img.height); ++py)
    for (int px = std::max(x, 0); px < std::min(x + extent, img.width); ++px) {
      const double fx = px + 0.5 - x;
      const double fy = py + 0.5 - y;
      bool inside = false;
      if (fy <= shoulder) {
        const double dl = (fx - r) * (fx - r) + (fy - shoulder) * (fy - shoulder);
        const double dr = (fx - 3 * r) * (fx - 3 * r) + (fy - shoulder) * (fy - shoulder);
        inside = dl <= r * r || dr <= r * r;
      } else {
        inside = std::abs(fx - e / 2.0) <= (e - fy) * (2.0 / 3.0);
      }
      if (inside) img.set(px, py, color);
    }
}

}  // namespace glatent
