#include "debiaskit/png_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include "debiaskit/errors.hpp"

namespace debiaskit {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const Canvas& canvas, const std::string& path) {
  if (canvas.width <= 0 || canvas.height <= 0) {
    throw data_error("write_png: canvas dimensions must be positive");
  }
  if (canvas.pixels.size() != static_cast<size_t>(canvas.width) *
                                  static_cast<size_t>(canvas.height) * 3) {
    throw data_error("write_png: pixel buffer does not match dimensions");
  }

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw io_error("write_png: cannot open " + path);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw io_error("write_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw io_error("write_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error("write_png: encoder failure for " + path);
  }

  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, static_cast<png_uint_32>(canvas.width),
               static_cast<png_uint_32>(canvas.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_bytep> rows(static_cast<size_t>(canvas.height));
  for (int y = 0; y < canvas.height; ++y) {
    rows[static_cast<size_t>(y)] = const_cast<png_bytep>(
        canvas.pixels.data() +
        static_cast<size_t>(y) * static_cast<size_t>(canvas.width) * 3);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);

  if (std::fflush(fp.get()) != 0) {
    throw io_error("write_png: flush failed for " + path);
  }
}

Canvas read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw io_error("read_png: cannot open " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 ||
      png_sig_cmp(header, 0, 8) != 0) {
    throw io_error("read_png: not a PNG file: " + path);
  }

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw io_error("read_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw io_error("read_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("read_png: decoder failure for " + path);
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  // Normalize anything reasonable to 8-bit RGB.
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);

  Canvas canvas;
  canvas.width = static_cast<int>(png_get_image_width(png, info));
  canvas.height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_channels(png, info) != 3 || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("read_png: unsupported pixel format in " + path);
  }
  canvas.pixels.resize(static_cast<size_t>(canvas.width) *
                       static_cast<size_t>(canvas.height) * 3);

  std::vector<png_bytep> rows(static_cast<size_t>(canvas.height));
  for (int y = 0; y < canvas.height; ++y) {
    rows[static_cast<size_t>(y)] =
        canvas.pixels.data() +
        static_cast<size_t>(y) * static_cast<size_t>(canvas.width) * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return canvas;
}

}  // namespace debiaskit
