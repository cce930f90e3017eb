#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "flymethrough/projection.hpp"

namespace flymethrough {

/// 8-bit RGB raster, interleaved, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::array<std::uint8_t, 3> at(int u, int v) const {
    const std::size_t i = (static_cast<std::size_t>(v) * width + u) * 3;
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set(int u, int v, std::array<std::uint8_t, 3> rgb) {
    const std::size_t i = (static_cast<std::size_t>(v) * width + u) * 3;
    data[i] = rgb[0];
    data[i + 1] = rgb[1];
    data[i + 2] = rgb[2];
  }
};

struct Gray16Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;
};

RgbImage read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& image);
std::vector<std::uint8_t> encode_png_rgb(const RgbImage& image);
RgbImage decode_png_rgb(const std::vector<std::uint8_t>& bytes);

/// Any non-zero gray value is a set pixel.
SegMask read_png_mask(const std::filesystem::path& path);
void write_png_mask(const std::filesystem::path& path, const SegMask& mask);

Gray16Image read_png_gray16(const std::filesystem::path& path);
void write_png_gray16(const std::filesystem::path& path, const Gray16Image& image);

}  // namespace flymethrough
