#include "visemeforge/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "visemeforge/errors.hpp"

namespace vf::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

unsigned char quantize(double v) {
  const double c = std::min(std::max(v, 0.0), 1.0);
  return static_cast<unsigned char>(std::lround(c * 255.0));
}

}  // namespace

void write_png(const std::string& path, const Tensor& chw) {
  if (chw.ndim() != 3) throw ShapeError("write_png: expects [C,H,W], got " + chw.shape_str());
  const long c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (c != 1 && c != 3) throw ShapeError("write_png: C must be 1 or 3");

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng error while writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<unsigned char> row(static_cast<std::size_t>(w * c));
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x)
      for (long ch = 0; ch < c; ++ch)
        row[static_cast<std::size_t>(x * c + ch)] =
            quantize(chw[(ch * h + y) * w + x]);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open for reading: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng error while reading " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const long w = png_get_image_width(png, info);
  const long h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const long c = png_get_channels(png, info);
  if (c != 1 && c != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png: unsupported channel count");
  }

  std::vector<unsigned char> raw(static_cast<std::size_t>(h * w * c));
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (long y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = raw.data() + y * w * c;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor out({c, h, w});
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (long ch = 0; ch < c; ++ch)
        out[(ch * h + y) * w + x] =
            static_cast<double>(raw[static_cast<std::size_t>((y * w + x) * c + ch)]) / 255.0;
  return out;
}

}  // namespace vf::io
