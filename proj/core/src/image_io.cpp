#include "lottery/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <vector>

namespace lottery {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

PixelGrid from_rgb8(const std::vector<std::uint8_t>& rgb, int h, int w) {
  PixelGrid img(3, h, w);
  const std::size_t plane = img.plane_size();
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) img.values[c * plane + p] = rgb[p * 3 + c] / 255.0;
  return img;
}

std::vector<std::uint8_t> to_rgb8(const PixelGrid& img) {
  if (img.channels != 3) throw std::invalid_argument("write_image: expected 3 channels");
  const std::size_t plane = img.plane_size();
  std::vector<std::uint8_t> rgb(plane * 3);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) {
      const long v = std::llround(img.values[c * plane + p] * 255.0);
      rgb[p * 3 + c] = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
    }
  }
  return rgb;
}

PixelGrid read_png(std::FILE* f, const std::string& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("failed to read PNG: " + path);
  }
  png_init_io(png, f);
  png_read_info(png, info);

  // Normalize anything 8-bit-representable to plain RGB.
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported PNG layout: " + path);
  }

  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h) * w * 3);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = rgb.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return from_rgb8(rgb, h, w);
}

void write_png(const PixelGrid& img, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed to write PNG: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::vector<std::uint8_t> rgb = to_rgb8(img);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * img.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

int next_pnm_int(std::FILE* f) {
  int ch = std::fgetc(f);
  while (ch != EOF && (std::isspace(ch) || ch == '#')) {
    if (ch == '#')
      while (ch != EOF && ch != '\n') ch = std::fgetc(f);
    ch = std::fgetc(f);
  }
  int value = 0;
  bool any = false;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    any = true;
    ch = std::fgetc(f);
  }
  if (!any) throw std::runtime_error("malformed PPM header");
  return value;
}

PixelGrid read_ppm(std::FILE* f, const std::string& path) {
  const int w = next_pnm_int(f);
  const int h = next_pnm_int(f);
  const int maxval = next_pnm_int(f);
  if (maxval != 255) throw std::runtime_error("unsupported PPM maxval (want 255): " + path);
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h) * w * 3);
  if (std::fread(rgb.data(), 1, rgb.size(), f) != rgb.size())
    throw std::runtime_error("truncated PPM: " + path);
  return from_rgb8(rgb, h, w);
}

void write_ppm(const PixelGrid& img, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  std::fprintf(f.get(), "P6\n%d %d\n255\n", img.width, img.height);
  const std::vector<std::uint8_t> rgb = to_rgb8(img);
  if (std::fwrite(rgb.data(), 1, rgb.size(), f.get()) != rgb.size())
    throw std::runtime_error("short write: " + path);
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

PixelGrid read_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open image: " + path);
  unsigned char sig[2] = {0, 0};
  if (std::fread(sig, 1, 2, f.get()) != 2) throw std::runtime_error("unreadable image: " + path);
  std::rewind(f.get());
  if (sig[0] == 0x89 && sig[1] == 'P') return read_png(f.get(), path);
  if (sig[0] == 'P' && sig[1] == '6') {
    std::fgetc(f.get());
    std::fgetc(f.get());
    return read_ppm(f.get(), path);
  }
  throw std::runtime_error("unsupported image format (want PNG or binary PPM): " + path);
}

void write_image(const PixelGrid& image, const std::string& path) {
  if (has_suffix(path, ".png"))
    write_png(image, path);
  else if (has_suffix(path, ".ppm"))
    write_ppm(image, path);
  else
    throw std::runtime_error("unsupported output extension (want .png or .ppm): " + path);
}

}  // namespace lottery
