#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flymethrough/geometry.hpp"

namespace flymethrough {

/// Per-pixel relative depth (camera-frame z, unitless). Zero marks an invalid pixel.
class DepthMap {
public:
  DepthMap() = default;
  DepthMap(int width, int height, std::vector<float> values);
  DepthMap(int width, int height, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  float at(int u, int v) const { return values_[static_cast<std::size_t>(v) * width_ + u]; }
  float& at(int u, int v) { return values_[static_cast<std::size_t>(v) * width_ + u]; }
  bool valid(int u, int v) const { return at(u, v) > 0.0f; }
  const std::vector<float>& values() const { return values_; }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
};

/// Binary object mask for one frame, row-major.
class SegMask {
public:
  SegMask() = default;
  SegMask(int width, int height, std::string frame_id = {});

  int width() const { return width_; }
  int height() const { return height_; }
  const std::string& frame_id() const { return frame_id_; }
  void set_frame_id(std::string id) { frame_id_ = std::move(id); }

  bool at(int u, int v) const { return bits_[static_cast<std::size_t>(v) * width_ + u] != 0; }
  void set(int u, int v, bool value = true) {
    bits_[static_cast<std::size_t>(v) * width_ + u] = value ? 1 : 0;
  }
  bool at_index(std::size_t i) const { return bits_[i] != 0; }
  void set_index(std::size_t i, bool value = true) { bits_[i] = value ? 1 : 0; }
  bool in_bounds(int u, int v) const { return u >= 0 && v >= 0 && u < width_ && v < height_; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  /// Mean (u, v) of set pixels in pixel-center coordinates; nullopt when empty.
  std::optional<Pixel> centroid() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  bool operator==(const SegMask& other) const {
    return width_ == other.width_ && height_ == other.height_ && bits_ == other.bits_;
  }

private:
  int width_ = 0;
  int height_ = 0;
  std::string frame_id_;
  std::vector<std::uint8_t> bits_;
};

/// Back-projected mask points at the raw (pre-scale) relative depth.
struct SegmentCloud {
  std::vector<WorldPoint> points;
  WorldPoint camera_center = WorldPoint::Zero();
  std::string frame_id;
  std::size_t source_pixel_count = 0;
  /// Source pixel (center coordinates) of every point, parallel to points.
  std::vector<Pixel> pixels;
};

struct Projection {
  Pixel pixel;
  double depth = 0.0;
};

/// Forward pinhole projection. nullopt when the point is not in front of the camera.
std::optional<Projection> project_point(const CameraModel& model, const CameraPose& pose,
                                        const WorldPoint& p);

/// R^-1 (depth * K^-1 [u v 1]^T - t). Throws NonPositiveDepth for depth <= 0.
WorldPoint back_project_pixel(const CameraModel& model, const CameraPose& pose, const Pixel& px,
                              double depth);

/// Unit-free ray direction (world frame) through a pixel; K^-1 [u v 1]^T rotated to world.
Eigen::Vector3d pixel_ray(const CameraModel& model, const CameraPose& pose, const Pixel& px);

/// Back-projects every set mask pixel with valid depth, sampling pixel
/// centers at (u + 0.5, v + 0.5), in row-major order.
SegmentCloud mask_to_cloud(const CameraModel& model, const CameraPose& pose, const SegMask& mask,
                           const DepthMap& depth);

}  // namespace flymethrough
