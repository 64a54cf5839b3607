// SPDX-License-Identifier: Apache-2.0
#include "v3dg/image.hpp"

#include <algorithm>
#include <cmath>

#include <png.h>

#include "v3dg/bundle.hpp"
#include "v3dg/error.hpp"

namespace v3dg {

ImageRGBA downsample_box(const ImageRGBA& img, int k) {
  if (k < 1) raise(ErrorKind::kArgument, "downsample factor must be >= 1");
  if (img.width() % k != 0 || img.height() % k != 0) {
    raise(ErrorKind::kArgument, "image dimensions are not divisible by the downsample factor");
  }
  if (k == 1) return img;
  ImageRGBA out(img.width() / k, img.height() / k);
  const double inv = 1.0 / (static_cast<double>(k) * k);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      double* dst = out.pixel(x, y);
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          const double* src = img.pixel(x * k + dx, y * k + dy);
          for (int c = 0; c < 4; ++c) dst[c] += src[c];
        }
      }
      for (int c = 0; c < 4; ++c) dst[c] *= inv;
    }
  }
  return out;
}

double psnr(const ImageRGBA& a, const ImageRGBA& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    raise(ErrorKind::kArgument, "psnr: image dimensions differ");
  }
  if (a.size() == 0) return kPsnrCapDb;
  double sum = 0.0;
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t p = 0; p < a.size(); ++p) {
    const double* pa = da.data() + 4 * p;
    const double* pb = db.data() + 4 * p;
    for (int c = 0; c < 3; ++c) {
      const double d = (pa[c] + 1.0 - pa[3]) - (pb[c] + 1.0 - pb[3]);
      sum += d * d;
    }
  }
  const double mse = sum / (3.0 * static_cast<double>(a.size()));
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

namespace {

void append_png_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageRGBA& img) {
  if (img.width() < 1 || img.height() < 1) raise(ErrorKind::kArgument, "cannot encode an empty image");

  std::vector<std::uint8_t> rgba(img.size() * 4);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double* p = img.pixel(x, y);
      std::uint8_t* q = rgba.data() + 4 * (static_cast<std::size_t>(y) * img.width() + x);
      const double a = p[3];
      for (int c = 0; c < 3; ++c) q[c] = to_byte(a > 0.0 ? p[c] / a : 0.0);
      q[3] = to_byte(a);
    }
  }

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) raise(ErrorKind::kIo, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    raise(ErrorKind::kIo, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, append_png_bytes, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
               static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_RGBA,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height(); ++y) {
    png_write_row(png, rgba.data() + 4 * static_cast<std::size_t>(y) * img.width());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const ImageRGBA& img, const std::filesystem::path& path) {
  const auto bytes = encode_png(img);
  write_file_atomic(path, bytes.data(), bytes.size());
}

}  // namespace v3dg
