#pragma once

#include <Eigen/Core>

#include "flymethrough/error.hpp"

namespace flymethrough {

using WorldPoint = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics. Construction validates fx, fy > 0 and a principal
/// point within the closed image rectangle.
class CameraModel {
public:
  CameraModel(double fx, double fy, double cx, double cy, int width, int height);

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }

  bool operator==(const CameraModel&) const = default;

private:
  double fx_, fy_, cx_, cy_;
  int width_, height_;
};

/// World-to-camera rigid transform: p_cam = rotation * p_world + translation.
class CameraPose {
public:
  CameraPose(const Mat3& rotation, const Eigen::Vector3d& translation);
  static CameraPose identity();

  const Mat3& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  /// Optical center in world coordinates, -R^T t.
  WorldPoint center() const { return -(rotation_.transpose() * translation_); }

private:
  Mat3 rotation_;
  Eigen::Vector3d translation_;
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Oriented box; columns of axes are the box axes.
class OrientedBox {
public:
  OrientedBox(const WorldPoint& center, const Mat3& axes, const Eigen::Vector3d& half_extents);

  const WorldPoint& center() const { return center_; }
  const Mat3& axes() const { return axes_; }
  const Eigen::Vector3d& half_extents() const { return half_extents_; }

  double volume() const { return 8.0 * half_extents_.prod(); }
  bool contains(const WorldPoint& p, double tolerance = 0.0) const;
  /// Corner i has local sign pattern (bit0 -> x, bit1 -> y, bit2 -> z).
  WorldPoint corner(int i) const;

private:
  WorldPoint center_;
  Mat3 axes_;
  Eigen::Vector3d half_extents_;
};

Mat3 build_intrinsic_matrix(const CameraModel& model);

bool is_rotation(const Mat3& m, double tolerance = 1e-6);

}  // namespace flymethrough
