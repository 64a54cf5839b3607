// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

namespace v3dg {

/// Linear RGB plus accumulated alpha, stored row-major as 4 doubles per
/// pixel. Color is premultiplied: a pixel composited over a background b
/// is rgb + (1 - alpha) * b.
class ImageRGBA {
 public:
  ImageRGBA() = default;
  ImageRGBA(int width, int height) : width_(width), height_(height), data_(4 * size(), 0.0) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  double* pixel(int x, int y) { return data_.data() + 4 * index(x, y); }
  const double* pixel(int x, int y) const { return data_.data() + 4 * index(x, y); }
  double& at(int x, int y, int channel) { return pixel(x, y)[channel]; }
  double at(int x, int y, int channel) const { return pixel(x, y)[channel]; }
  double alpha(int x, int y) const { return pixel(x, y)[3]; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool operator==(const ImageRGBA&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Mean of every k x k block, all four channels. Dimensions must be
/// divisible by k.
ImageRGBA downsample_box(const ImageRGBA& img, int k);

/// Ceiling reported for identical images.
inline constexpr double kPsnrCapDb = 99.0;

/// PSNR in dB over RGB after compositing both images onto white, with a
/// peak value of 1. Capped at kPsnrCapDb.
double psnr(const ImageRGBA& a, const ImageRGBA& b);

/// 8-bit straight-alpha RGBA PNG.
std::vector<std::uint8_t> encode_png(const ImageRGBA& img);
void write_png(const ImageRGBA& img, const std::filesystem::path& path);

}  // namespace v3dg
