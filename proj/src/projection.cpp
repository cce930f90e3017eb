#include "flymethrough/projection.hpp"

#include <algorithm>
#include <cmath>

namespace flymethrough {

DepthMap::DepthMap(int width, int height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width <= 0 || height <= 0 ||
      values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::DimensionMismatch, "depth values do not match dimensions");
  }
  // Anything non-finite or non-positive is an invalid pixel.
  for (float& v : values_) {
    if (!std::isfinite(v) || v <= 0.0f) v = 0.0f;
  }
}

DepthMap::DepthMap(int width, int height, float fill)
    : DepthMap(width, height,
               std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) *
                                      static_cast<std::size_t>(std::max(height, 0)),
                                  fill)) {}

SegMask::SegMask(int width, int height, std::string frame_id)
    : width_(width), height_(height), frame_id_(std::move(frame_id)) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "mask size must be positive");
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

std::size_t SegMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::optional<Pixel> SegMask::centroid() const {
  double su = 0.0, sv = 0.0;
  std::size_t n = 0;
  for (int v = 0; v < height_; ++v) {
    for (int u = 0; u < width_; ++u) {
      if (!at(u, v)) continue;
      su += u + 0.5;
      sv += v + 0.5;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return Pixel{su / static_cast<double>(n), sv / static_cast<double>(n)};
}

std::optional<Projection> project_point(const CameraModel& model, const CameraPose& pose,
                                        const WorldPoint& p) {
  const Eigen::Vector3d pc = pose.rotation() * p + pose.translation();
  if (!(pc.z() > 0.0)) return std::nullopt;
  return Projection{{model.fx() * pc.x() / pc.z() + model.cx(),
                     model.fy() * pc.y() / pc.z() + model.cy()},
                    pc.z()};
}

Eigen::Vector3d pixel_ray(const CameraModel& model, const CameraPose& pose, const Pixel& px) {
  const Eigen::Vector3d camera_ray((px.u - model.cx()) / model.fx(),
                                   (px.v - model.cy()) / model.fy(), 1.0);
  return pose.rotation().transpose() * camera_ray;
}

WorldPoint back_project_pixel(const CameraModel& model, const CameraPose& pose, const Pixel& px,
                              double depth) {
  if (!(depth > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "depth must be positive");
  // K^-1 applied in closed form; R^-1 = R^T for a rotation.
  const Eigen::Vector3d camera_point(depth * (px.u - model.cx()) / model.fx(),
                                     depth * (px.v - model.cy()) / model.fy(), depth);
  return pose.rotation().transpose() * (camera_point - pose.translation());
}

SegmentCloud mask_to_cloud(const CameraModel& model, const CameraPose& pose, const SegMask& mask,
                           const DepthMap& depth) {
  if (mask.width() != depth.width() || mask.height() != depth.height()) {
    throw Error(ErrorCode::DimensionMismatch, "mask and depth map sizes differ");
  }
  if (mask.width() != model.width() || mask.height() != model.height()) {
    throw Error(ErrorCode::DimensionMismatch, "mask does not match camera image size");
  }
  SegmentCloud cloud;
  cloud.camera_center = pose.center();
  cloud.frame_id = mask.frame_id();
  for (int v = 0; v < mask.height(); ++v) {
    for (int u = 0; u < mask.width(); ++u) {
      if (!mask.at(u, v)) continue;
      ++cloud.source_pixel_count;
      if (!depth.valid(u, v)) continue;
      const Pixel px{u + 0.5, v + 0.5};
      cloud.points.push_back(back_project_pixel(model, pose, px, depth.at(u, v)));
      cloud.pixels.push_back(px);
    }
  }
  if (cloud.source_pixel_count == 0) throw Error(ErrorCode::EmptyInput, "mask has no set pixels");
  if (cloud.points.empty()) throw Error(ErrorCode::EmptyCloud, "no mask pixel has valid depth");
  return cloud;
}

}  // namespace flymethrough
