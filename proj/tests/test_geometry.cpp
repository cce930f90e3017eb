#include <doctest.h>

#include <random>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "flymethrough/geometry.hpp"
#include "support/oracles.hpp"

using namespace flymethrough;

TEST_SUITE("geometry") {

TEST_CASE("intrinsic matrix places the fields directly") {
  CHECK(build_intrinsic_matrix(CameraModel(1, 1, 0, 0, 2, 2)).isApprox(Mat3::Identity(), 0.0));

  Mat3 expected;
  expected << 800, 0, 640, 0, 800, 360, 0, 0, 1;
  CHECK(build_intrinsic_matrix(CameraModel(800, 800, 640, 360, 1280, 720)) == expected);
}

TEST_CASE("intrinsic matrix is invertible for random models") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> f(10.0, 3000.0), frac(0.01, 0.99);
  for (int i = 0; i < 200; ++i) {
    const CameraModel m(f(rng), f(rng), frac(rng) * 1920, frac(rng) * 1080, 1920, 1080);
    const Mat3 k = build_intrinsic_matrix(m);
    CHECK((k * k.inverse() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("camera model rejects invalid intrinsics") {
  CHECK_THROWS_AS(CameraModel(0, 1, 1, 1, 2, 2), Error);
  CHECK_THROWS_AS(CameraModel(1, -1, 1, 1, 2, 2), Error);
  CHECK_THROWS_AS(CameraModel(1, 1, 3, 1, 2, 2), Error);
  CHECK_THROWS_AS(CameraModel(1, 1, 1, -0.5, 2, 2), Error);
  CHECK_THROWS_AS(CameraModel(1, 1, 0, 0, 0, 2), Error);
}

TEST_CASE("camera pose requires a proper rotation") {
  CHECK_NOTHROW(CameraPose(Mat3::Identity(), Eigen::Vector3d(1, 2, 3)));
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1.0;
  CHECK_THROWS_AS(CameraPose(reflect, Eigen::Vector3d::Zero()), Error);
  CHECK_THROWS_AS(CameraPose(2.0 * Mat3::Identity(), Eigen::Vector3d::Zero()), Error);
  CHECK_THROWS_AS(CameraPose(Mat3::Identity(), Eigen::Vector3d(NAN, 0, 0)), Error);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const Mat3 r = oracle::random_rotation(rng);
    CHECK(is_rotation(r));
    const CameraPose pose(r, Eigen::Vector3d(1, -2, 0.5));
    CHECK((pose.rotation() * pose.center() + pose.translation()).norm() < 1e-12);
  }
}

TEST_CASE("oriented box invariants and containment") {
  CHECK_THROWS_AS(OrientedBox(WorldPoint::Zero(), Mat3::Identity(), Eigen::Vector3d(1, 0, 1)), Error);
  CHECK_THROWS_AS(OrientedBox(WorldPoint::Zero(), 2.0 * Mat3::Identity(), Eigen::Vector3d(1, 1, 1)), Error);

  const Mat3 axes = Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const OrientedBox box(WorldPoint(1, 2, 3), axes, Eigen::Vector3d(1, 2, 0.5));
  CHECK(box.volume() == doctest::Approx(8.0));
  for (int i = 0; i < 8; ++i) CHECK(box.contains(box.corner(i), 1e-12));
  CHECK(box.contains(box.center()));
  CHECK_FALSE(box.contains(box.center() + axes.col(2) * 0.51));
  CHECK(box.contains(box.center() + axes.col(2) * 0.51, 0.02));

  const WorldPoint c0 = box.corner(0);
  const WorldPoint c7 = box.corner(7);
  CHECK((c7 - c0).norm() == doctest::Approx(2.0 * box.half_extents().norm()));
}

}
