#include <Eigen/Geometry>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "flymethrough/mesh.hpp"
#include "flymethrough/project.hpp"

namespace flymethrough {

namespace {

[[noreturn]] void parse_fail(const std::string& file, int line, const std::string& what) {
  throw Error(ErrorCode::ParseError, file + ":" + std::to_string(line) + ": " + what);
}

bool skip_line(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

template <typename T>
T read_field(std::istringstream& in, const std::string& file, int line, const char* name) {
  T value{};
  if (!(in >> value)) parse_fail(file, line, std::string("expected ") + name);
  return value;
}

std::string stem_of(const std::string& name) { return std::filesystem::path(name).stem().string(); }

}  // namespace

std::map<int, CameraModel> parse_colmap_cameras(std::istream& in) {
  const std::string file = "cameras.txt";
  std::map<int, CameraModel> cameras;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (skip_line(line)) continue;
    std::istringstream fields(line);
    const int id = read_field<int>(fields, file, number, "CAMERA_ID");
    const std::string model = read_field<std::string>(fields, file, number, "MODEL");
    const int width = read_field<int>(fields, file, number, "WIDTH");
    const int height = read_field<int>(fields, file, number, "HEIGHT");
    double fx = 0, fy = 0, cx = 0, cy = 0;
    if (model == "PINHOLE") {
      fx = read_field<double>(fields, file, number, "fx");
      fy = read_field<double>(fields, file, number, "fy");
    } else if (model == "SIMPLE_PINHOLE") {
      fx = fy = read_field<double>(fields, file, number, "f");
    } else {
      throw Error(ErrorCode::UnsupportedCameraModel,
                  file + ":" + std::to_string(number) + ": camera model " + model +
                      " is not supported; undistort to PINHOLE first");
    }
    cx = read_field<double>(fields, file, number, "cx");
    cy = read_field<double>(fields, file, number, "cy");
    std::string extra;
    if (fields >> extra) parse_fail(file, number, "unexpected trailing field '" + extra + "'");
    try {
      cameras.insert_or_assign(id, CameraModel(fx, fy, cx, cy, width, height));
    } catch (const Error& e) {
      parse_fail(file, number, e.what());
    }
  }
  return cameras;
}

std::vector<ColmapImage> parse_colmap_images(std::istream& in) {
  const std::string file = "images.txt";
  std::vector<ColmapImage> images;
  std::string line;
  int number = 0;
  bool expect_points = false;
  while (std::getline(in, line)) {
    ++number;
    if (expect_points) {
      // 2D observations line (possibly blank); not used.
      expect_points = false;
      continue;
    }
    if (skip_line(line)) continue;
    std::istringstream fields(line);
    ColmapImage image;
    image.image_id = read_field<int>(fields, file, number, "IMAGE_ID");
    const double qw = read_field<double>(fields, file, number, "QW");
    const double qx = read_field<double>(fields, file, number, "QX");
    const double qy = read_field<double>(fields, file, number, "QY");
    const double qz = read_field<double>(fields, file, number, "QZ");
    const double tx = read_field<double>(fields, file, number, "TX");
    const double ty = read_field<double>(fields, file, number, "TY");
    const double tz = read_field<double>(fields, file, number, "TZ");
    image.camera_id = read_field<int>(fields, file, number, "CAMERA_ID");
    image.name = read_field<std::string>(fields, file, number, "NAME");
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (!(q.norm() > 1e-12) || !std::isfinite(q.norm())) parse_fail(file, number, "degenerate quaternion");
    q.normalize();
    image.pose = CameraPose(q.toRotationMatrix(), Eigen::Vector3d(tx, ty, tz));
    images.push_back(std::move(image));
    expect_points = true;
  }
  return images;
}

ColmapImport import_colmap_text(const std::filesystem::path& cameras_file,
                                const std::filesystem::path& images_file) {
  std::ifstream cameras_in(cameras_file);
  if (!cameras_in) throw Error(ErrorCode::IoError, "cannot open " + cameras_file.string());
  std::ifstream images_in(images_file);
  if (!images_in) throw Error(ErrorCode::IoError, "cannot open " + images_file.string());
  ColmapImport result;
  result.cameras = parse_colmap_cameras(cameras_in);
  result.images = parse_colmap_images(images_in);
  for (const ColmapImage& image : result.images) {
    if (!result.cameras.count(image.camera_id)) {
      throw Error(ErrorCode::ParseError, "images.txt: image " + image.name + " references unknown camera " +
                                             std::to_string(image.camera_id));
    }
  }
  return result;
}

std::vector<std::string> pose_missing_frames(const std::vector<std::string>& frame_ids,
                                             const ColmapImport& import) {
  std::set<std::string> posed;
  for (const ColmapImage& image : import.images) posed.insert(stem_of(image.name));
  std::vector<std::string> missing;
  for (const std::string& id : frame_ids) {
    if (!posed.count(id)) missing.push_back(id);
  }
  return missing;
}

CameraPose flip_pose(const CameraPose& pose) {
  return CameraPose(pose.rotation() * axis_flip_rotation().transpose(), pose.translation());
}

}  // namespace flymethrough
