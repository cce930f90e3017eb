#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "flymethrough/image.hpp"
#include "flymethrough/project.hpp"

namespace flymethrough {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

DepthMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic;
  if (magic == "PF") throw Error(ErrorCode::UnsupportedFormat, path.string() + ": color PFM is not a depth map");
  if (magic != "Pf") throw Error(ErrorCode::UnsupportedFormat, path.string() + ": not a PFM file");
  if (!(in >> width >> height >> scale) || width <= 0 || height <= 0 || scale == 0.0) {
    throw Error(ErrorCode::UnsupportedFormat, path.string() + ": bad PFM header");
  }
  in.get();  // single whitespace before the raster
  const bool little = scale < 0.0;
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<std::uint32_t> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 4));
  if (in.gcount() != static_cast<std::streamsize>(n * 4)) {
    throw Error(ErrorCode::UnsupportedFormat, path.string() + ": truncated PFM raster");
  }
  const bool host_little = std::endian::native == std::endian::little;
  std::vector<float> values(n);
  for (int row = 0; row < height; ++row) {
    // PFM scanlines run bottom to top.
    const std::size_t src = static_cast<std::size_t>(height - 1 - row) * width;
    const std::size_t dst = static_cast<std::size_t>(row) * width;
    for (int u = 0; u < width; ++u) {
      std::uint32_t bits = raw[src + u];
      if (little != host_little) bits = __builtin_bswap32(bits);
      values[dst + u] = std::bit_cast<float>(bits);
    }
  }
  return DepthMap(width, height, std::move(values));
}

DepthMap read_png16_depth(const std::filesystem::path& path) {
  std::filesystem::path sidecar = path;
  sidecar.replace_extension(".json");
  std::ifstream meta(sidecar);
  if (!meta) throw Error(ErrorCode::UnsupportedFormat, path.string() + ": 16-bit depth needs sidecar " + sidecar.string());
  double scale = 0.0, offset = 0.0;
  try {
    const auto j = nlohmann::json::parse(meta);
    scale = j.at("scale").get<double>();
    offset = j.value("offset", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, sidecar.string() + ": " + e.what());
  }
  if (!(scale > 0.0) || !std::isfinite(offset)) {
    throw Error(ErrorCode::ParseError, sidecar.string() + ": scale must be positive");
  }
  const Gray16Image img = read_png_gray16(path);
  std::vector<float> values(img.data.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = img.data[i] == 0 ? 0.0f : static_cast<float>(img.data[i] * scale + offset);
  }
  return DepthMap(img.width, img.height, std::move(values));
}

}  // namespace

DepthMap load_depth_map(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".pfm") return read_pfm(path);
  if (ext == ".png") return read_png16_depth(path);
  throw Error(ErrorCode::UnsupportedFormat, path.string() + ": depth must be .pfm or 16-bit .png");
}

DepthMap load_depth_map(const std::filesystem::path& path, int expected_width, int expected_height) {
  DepthMap depth = load_depth_map(path);
  if (depth.width() != expected_width || depth.height() != expected_height) {
    throw Error(ErrorCode::DimensionMismatch,
                path.string() + " is " + std::to_string(depth.width()) + "x" + std::to_string(depth.height()) +
                    ", frame is " + std::to_string(expected_width) + "x" + std::to_string(expected_height));
  }
  return depth;
}

void write_pfm(const std::filesystem::path& path, const DepthMap& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "Pf\n" << depth.width() << " " << depth.height() << "\n-1.0\n";
  const bool host_little = std::endian::native == std::endian::little;
  std::vector<std::uint32_t> row(static_cast<std::size_t>(depth.width()));
  for (int v = depth.height() - 1; v >= 0; --v) {
    for (int u = 0; u < depth.width(); ++u) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(depth.at(u, v));
      if (!host_little) bits = __builtin_bswap32(bits);
      row[static_cast<std::size_t>(u)] = bits;
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

}  // namespace flymethrough
