#include "flymethrough/geometry.hpp"

#include <Eigen/LU>
#include <cmath>
#include <string>

namespace flymethrough {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NoContact: return "NoContact";
    case ErrorCode::NoResults: return "NoResults";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoPositivePrompt: return "NoPositivePrompt";
    case ErrorCode::InvalidPrompt: return "InvalidPrompt";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedCameraModel: return "UnsupportedCameraModel";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NotFound: return "NotFound";
  }
  return "Unknown";
}

CameraModel::CameraModel(double fx, double fy, double cx, double cy, int width, int height)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height) {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  }
  if (!(cx >= 0.0 && cx <= width) || !(cy >= 0.0 && cy <= height)) {
    throw Error(ErrorCode::InvalidArgument, "principal point outside image");
  }
}

bool is_rotation(const Mat3& m, double tolerance) {
  if (!m.allFinite()) return false;
  const Mat3 gram = m.transpose() * m;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tolerance) return false;
  return std::abs(m.determinant() - 1.0) <= tolerance;
}

CameraPose::CameraPose(const Mat3& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_rotation(rotation)) {
    throw Error(ErrorCode::InvalidArgument, "pose rotation is not orthonormal with det 1");
  }
  if (!translation.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "pose translation is not finite");
  }
}

CameraPose CameraPose::identity() { return CameraPose(Mat3::Identity(), Eigen::Vector3d::Zero()); }

OrientedBox::OrientedBox(const WorldPoint& center, const Mat3& axes,
                         const Eigen::Vector3d& half_extents)
    : center_(center), axes_(axes), half_extents_(half_extents) {
  if (!center.allFinite()) throw Error(ErrorCode::InvalidArgument, "box center not finite");
  const Mat3 gram = axes.transpose() * axes;
  if (!axes.allFinite() || (gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
    throw Error(ErrorCode::InvalidArgument, "box axes not orthonormal");
  }
  if (!(half_extents.minCoeff() > 0.0) || !half_extents.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "box half extents must be positive");
  }
}

bool OrientedBox::contains(const WorldPoint& p, double tolerance) const {
  const Eigen::Vector3d local = axes_.transpose() * (p - center_);
  return (local.cwiseAbs().array() <= half_extents_.array() + tolerance).all();
}

WorldPoint OrientedBox::corner(int i) const {
  Eigen::Vector3d sign((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
  return center_ + axes_ * sign.cwiseProduct(half_extents_);
}

Mat3 build_intrinsic_matrix(const CameraModel& model) {
  Mat3 k;
  k << model.fx(), 0.0, model.cx(),
       0.0, model.fy(), model.cy(),
       0.0, 0.0, 1.0;
  return k;
}

}  // namespace flymethrough
