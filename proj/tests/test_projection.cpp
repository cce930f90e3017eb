#include <doctest.h>

#include <random>

#include "flymethrough/projection.hpp"
#include "flymethrough/synth.hpp"
#include "support/oracles.hpp"

using namespace flymethrough;

namespace {

const CameraModel kUnit(1, 1, 0, 0, 1, 1);

double cross_residual(const SegmentCloud& cloud, const CameraModel& m, const CameraPose& pose, std::size_t i,
                      const WorldPoint& p) {
  const Eigen::Vector3d ray = pixel_ray(m, pose, cloud.pixels[i]).normalized();
  return (p - cloud.camera_center).cross(ray).norm() / (p - cloud.camera_center).norm();
}

}  // namespace

TEST_SUITE("projection") {

TEST_CASE("project_point examples") {
  const CameraPose id = CameraPose::identity();
  auto a = project_point(kUnit, id, {0, 0, 1});
  REQUIRE(a);
  CHECK(a->pixel.u == 0.0);
  CHECK(a->pixel.v == 0.0);
  CHECK(a->depth == 1.0);

  auto b = project_point(CameraModel(100, 100, 50, 50, 100, 100), id, {0.1, 0, 1});
  REQUIRE(b);
  CHECK(b->pixel.u == doctest::Approx(60.0).epsilon(1e-15));
  CHECK(b->pixel.v == 50.0);
  CHECK(b->depth == 1.0);

  CHECK_FALSE(project_point(kUnit, id, {0, 0, -1}));
  CHECK_FALSE(project_point(kUnit, id, {1, 1, 0}));
}

TEST_CASE("back_project_pixel examples") {
  CHECK(back_project_pixel(kUnit, CameraPose::identity(), {0, 0}, 1.0) == WorldPoint(0, 0, 1));
  const CameraPose shifted(Mat3::Identity(), Eigen::Vector3d(0, 0, -5));
  CHECK(back_project_pixel(kUnit, shifted, {0, 0}, 1.0) == WorldPoint(0, 0, 6));
  CHECK_THROWS_AS(back_project_pixel(kUnit, shifted, {0, 0}, 0.0), Error);
  CHECK_THROWS_AS(back_project_pixel(kUnit, shifted, {0, 0}, -2.0), Error);
}

TEST_CASE("project then back-project recovers random points") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> f(100.0, 2000.0), u(-10.0, 10.0), frac(0.05, 0.95);
  int checked = 0;
  while (checked < 1000) {
    const CameraModel m(f(rng), f(rng), frac(rng) * 1280, frac(rng) * 720, 1280, 720);
    const CameraPose pose(oracle::random_rotation(rng), Eigen::Vector3d(u(rng), u(rng), u(rng)));
    const WorldPoint p(u(rng), u(rng), u(rng));
    const auto proj = project_point(m, pose, p);
    if (!proj) continue;
    const WorldPoint back = back_project_pixel(m, pose, proj->pixel, proj->depth);
    CHECK((back - p).norm() <= 1e-9 * std::max(1.0, p.norm()));
    ++checked;
  }
}

TEST_CASE("mask_to_cloud composes back-projection") {
  SegMask mask(2, 1, "f");
  mask.set(0, 0);
  mask.set(1, 0);
  const DepthMap depth(2, 1, std::vector<float>{1.0f, 2.0f});
  const CameraModel m(1, 1, 0, 0, 2, 1);
  const SegmentCloud cloud = mask_to_cloud(m, CameraPose::identity(), mask, depth);
  REQUIRE(cloud.points.size() == 2);
  CHECK(cloud.points[0] == back_project_pixel(m, CameraPose::identity(), {0.5, 0.5}, 1.0));
  CHECK(cloud.points[1] == back_project_pixel(m, CameraPose::identity(), {1.5, 0.5}, 2.0));
  CHECK(cloud.source_pixel_count == 2);
  CHECK(cloud.frame_id == "f");
  CHECK(cloud.camera_center == WorldPoint::Zero());
}

TEST_CASE("mask_to_cloud errors") {
  const CameraModel m(1, 1, 0, 0, 3, 3);
  SegMask mask(3, 3);
  mask.set(1, 1);
  CHECK_THROWS_AS(mask_to_cloud(m, CameraPose::identity(), mask, DepthMap(3, 3, 0.0f)), Error);
  CHECK_THROWS_AS(mask_to_cloud(m, CameraPose::identity(), mask, DepthMap(2, 3, 1.0f)), Error);
  CHECK_THROWS_AS(mask_to_cloud(m, CameraPose::identity(), SegMask(3, 3), DepthMap(3, 3, 1.0f)), Error);
}

TEST_CASE("cloud cardinality and ray property on random masks") {
  std::mt19937_64 rng(8);
  std::bernoulli_distribution in(0.4), valid(0.7);
  std::uniform_real_distribution<double> d(0.5, 20.0), u(-3, 3);
  const CameraModel m(300, 320, 40, 30, 80, 60);
  for (int trial = 0; trial < 20; ++trial) {
    const CameraPose pose(oracle::random_rotation(rng), Eigen::Vector3d(u(rng), u(rng), u(rng)));
    SegMask mask(80, 60);
    DepthMap depth(80, 60);
    std::size_t expected = 0, set = 0;
    for (int v = 0; v < 60; ++v) {
      for (int x = 0; x < 80; ++x) {
        const bool s = in(rng);
        const bool ok = valid(rng);
        if (s) mask.set(x, v);
        if (ok) depth.at(x, v) = static_cast<float>(d(rng));
        set += s;
        expected += s && ok;
      }
    }
    const SegmentCloud cloud = mask_to_cloud(m, pose, mask, depth);
    CHECK(cloud.points.size() == expected);
    CHECK(cloud.source_pixel_count == set);
    REQUIRE(cloud.pixels.size() == cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      CHECK(cross_residual(cloud, m, pose, i, cloud.points[i]) < 1e-6);
      CHECK((cloud.points[i] - cloud.camera_center).norm() > 0.0);
    }
    // Row-major order.
    for (std::size_t i = 1; i < cloud.pixels.size(); ++i) {
      const auto& a = cloud.pixels[i - 1];
      const auto& b = cloud.pixels[i];
      CHECK((a.v < b.v || (a.v == b.v && a.u < b.u)));
    }
  }
}

TEST_CASE("analytic box render back-projects onto the true box surface") {
  const SynthScene scene = standard_fixture(1.0);
  const SynthFrame frame = render_analytic(scene, 0);
  const SynthView& view = scene.path[0];
  const SegmentCloud cloud = mask_to_cloud(view.model, view.pose, frame.masks[0], frame.depth);
  REQUIRE(cloud.points.size() > 1000);
  const OrientedBox& box = scene.pois[0].box;
  double worst = 0.0;
  for (const WorldPoint& p : cloud.points) {
    const Eigen::Vector3d local = box.axes().transpose() * (p - box.center());
    const double surface = (local.cwiseAbs() - box.half_extents()).maxCoeff();
    worst = std::max(worst, std::abs(surface));
  }
  CHECK(worst < 1e-6);
}

}
