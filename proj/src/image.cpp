#include "flymethrough/image.hpp"

#include <png.h>

#include <cstring>
#include <string>

namespace flymethrough {

namespace {

// RAII around libpng's simplified API.
class PngImage {
public:
  PngImage() {
    std::memset(&image_, 0, sizeof(image_));
    image_.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image_); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;

  png_image* get() { return &image_; }
  png_image* operator->() { return &image_; }

  [[noreturn]] void fail(ErrorCode code, const std::string& what) const {
    throw Error(code, what + ": " + image_.message);
  }

private:
  png_image image_;
};

template <typename Sample>
std::vector<Sample> read_file(const std::filesystem::path& path, png_uint_32 format, int& width,
                              int& height) {
  PngImage png;
  if (!png_image_begin_read_from_file(png.get(), path.c_str())) {
    png.fail(ErrorCode::IoError, "cannot read PNG " + path.string());
  }
  png->format = format;
  std::vector<Sample> buffer(PNG_IMAGE_SIZE(*png.get()) / sizeof(Sample));
  if (!png_image_finish_read(png.get(), nullptr, buffer.data(), 0, nullptr)) {
    png.fail(ErrorCode::IoError, "cannot decode PNG " + path.string());
  }
  width = static_cast<int>(png->width);
  height = static_cast<int>(png->height);
  return buffer;
}

template <typename Sample>
void write_file(const std::filesystem::path& path, png_uint_32 format, int width, int height,
                const Sample* data) {
  PngImage png;
  png->width = static_cast<png_uint_32>(width);
  png->height = static_cast<png_uint_32>(height);
  png->format = format;
  if (!png_image_write_to_file(png.get(), path.c_str(), 0, data, 0, nullptr)) {
    png.fail(ErrorCode::IoError, "cannot write PNG " + path.string());
  }
}

}  // namespace

RgbImage read_png_rgb(const std::filesystem::path& path) {
  RgbImage img;
  img.data = read_file<std::uint8_t>(path, PNG_FORMAT_RGB, img.width, img.height);
  return img;
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& image) {
  write_file(path, PNG_FORMAT_RGB, image.width, image.height, image.data.data());
}

std::vector<std::uint8_t> encode_png_rgb(const RgbImage& image) {
  PngImage png;
  png->width = static_cast<png_uint_32>(image.width);
  png->height = static_cast<png_uint_32>(image.height);
  png->format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(png.get(), nullptr, &size, 0, image.data.data(), 0, nullptr)) {
    png.fail(ErrorCode::IoError, "cannot size PNG");
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(png.get(), out.data(), &size, 0, image.data.data(), 0, nullptr)) {
    png.fail(ErrorCode::IoError, "cannot encode PNG");
  }
  out.resize(size);
  return out;
}

RgbImage decode_png_rgb(const std::vector<std::uint8_t>& bytes) {
  PngImage png;
  if (!png_image_begin_read_from_memory(png.get(), bytes.data(), bytes.size())) {
    png.fail(ErrorCode::UnsupportedFormat, "cannot read PNG bytes");
  }
  png->format = PNG_FORMAT_RGB;
  RgbImage img;
  img.width = static_cast<int>(png->width);
  img.height = static_cast<int>(png->height);
  img.data.resize(PNG_IMAGE_SIZE(*png.get()));
  if (!png_image_finish_read(png.get(), nullptr, img.data.data(), 0, nullptr)) {
    png.fail(ErrorCode::UnsupportedFormat, "cannot decode PNG bytes");
  }
  return img;
}

SegMask read_png_mask(const std::filesystem::path& path) {
  int width = 0, height = 0;
  const auto gray = read_file<std::uint8_t>(path, PNG_FORMAT_GRAY, width, height);
  SegMask mask(width, height);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      if (gray[static_cast<std::size_t>(v) * width + u] != 0) mask.set(u, v);
    }
  }
  return mask;
}

void write_png_mask(const std::filesystem::path& path, const SegMask& mask) {
  std::vector<std::uint8_t> gray(mask.bits().size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits()[i] ? 255 : 0;
  write_file(path, PNG_FORMAT_GRAY, mask.width(), mask.height(), gray.data());
}

// 16-bit PNG samples are treated as linear by libpng, so codes pass through unchanged.
Gray16Image read_png_gray16(const std::filesystem::path& path) {
  Gray16Image img;
  img.data = read_file<std::uint16_t>(path, PNG_FORMAT_LINEAR_Y, img.width, img.height);
  return img;
}

void write_png_gray16(const std::filesystem::path& path, const Gray16Image& image) {
  write_file(path, PNG_FORMAT_LINEAR_Y, image.width, image.height, image.data.data());
}

}  // namespace flymethrough
