#include "splinestroke/io/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace splinestroke::io {

using grad::Buffer;
using Index = Eigen::Index;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

Tensor read_png(const std::filesystem::path& path) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error("cannot open image " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng initialisation failed");
  }
  std::vector<std::uint8_t> pixels;
  png_uint_32 w = 0, h = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("malformed PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 i = 0; i < h; ++i) rows[i] = pixels.data() + i * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Buffer b(static_cast<Index>(std::size_t{w} * h * 3));
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t k = 0; k < std::size_t{w} * 3; ++k)
      b[static_cast<Index>(i * w * 3 + k)] = pixels[i * stride + k] / 255.0;
  return Tensor({h, w, 3}, std::move(b));
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  const bool gray = image.dim() == 2;
  if (!gray && (image.dim() != 3 || image.extent(2) != 3)) {
    throw Error("write_png: expected [H,W,3] or [H,W], got " + grad::to_string(image.shape()));
  }
  const std::size_t h = image.extent(0), w = image.extent(1);
  std::vector<std::uint8_t> pixels(h * w * 3);
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t ch = 0; ch < 3; ++ch)
      pixels[3 * p + ch] = to_byte(image.value()[static_cast<Index>(gray ? p : 3 * p + ch)]);

  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed writing PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t i = 0; i < h; ++i) png_write_row(png, pixels.data() + i * w * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.dim() != 3) throw Error("resize_bilinear: expected [H,W,C]");
  const std::size_t ih = image.extent(0), iw = image.extent(1), c = image.extent(2);
  if (ih == height && iw == width) return image.detach();
  Buffer out(static_cast<Index>(height * width * c));
  const Buffer& src = image.value();
  auto sample = [&](double coord, std::size_t in, std::size_t out_n, std::size_t& lo, std::size_t& hi, double& w) {
    double s = (coord + 0.5) * static_cast<double>(in) / static_cast<double>(out_n) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    lo = static_cast<std::size_t>(std::floor(s));
    hi = std::min(lo + 1, in - 1);
    w = s - static_cast<double>(lo);
  };
  for (std::size_t i = 0; i < height; ++i) {
    std::size_t y0, y1;
    double wy;
    sample(static_cast<double>(i), ih, height, y0, y1, wy);
    for (std::size_t j = 0; j < width; ++j) {
      std::size_t x0, x1;
      double wx;
      sample(static_cast<double>(j), iw, width, x0, x1, wx);
      for (std::size_t ch = 0; ch < c; ++ch) {
        auto at = [&](std::size_t y, std::size_t x) { return src[static_cast<Index>((y * iw + x) * c + ch)]; };
        const double top = (1 - wx) * at(y0, x0) + wx * at(y0, x1);
        const double bottom = (1 - wx) * at(y1, x0) + wx * at(y1, x1);
        out[static_cast<Index>((i * width + j) * c + ch)] = (1 - wy) * top + wy * bottom;
      }
    }
  }
  return Tensor({height, width, c}, std::move(out));
}

Tensor quantize8(const Tensor& image) {
  Buffer b = image.value().unaryExpr([](double v) { return to_byte(v) / 255.0; });
  return Tensor(image.shape(), std::move(b));
}

}  // namespace splinestroke::io
