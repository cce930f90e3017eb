#include <doctest.h>

#include <cmath>
#include <fstream>

#include <Eigen/Geometry>

#include "flymethrough/synth.hpp"
#include "support/oracles.hpp"

using namespace flymethrough;
namespace fs = std::filesystem;

namespace {

// Empty room, one camera at the middle of the room facing the +x wall head on.
SynthScene wall_scene(double hidden_scale) {
  SynthScene scene;
  scene.hidden_depth_scale = hidden_scale;
  const CameraModel model(50.0, 50.0, 32.0, 24.0, 64, 48);
  scene.path.push_back({model, look_at(WorldPoint(5, 4, 1.5), WorldPoint(10, 4, 1.5))});
  return scene;
}

// Pinhole projection written out by hand.
Eigen::Vector2d project_by_hand(const SynthView& view, const WorldPoint& p) {
  const Eigen::Vector3d c = view.pose.rotation() * p + view.pose.translation();
  return {view.model.fx() * c.x() / c.z() + view.model.cx(), view.model.fy() * c.y() / c.z() + view.model.cy()};
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("a wall at known distance renders that depth times the hidden scale") {
  for (double g : {1.0, 2.0, 0.5}) {
    const SynthScene scene = wall_scene(g);
    const SynthFrame f = render_analytic(scene, 0);
    int wall = 0;
    for (int v = 0; v < 48; ++v) {
      for (int u = 0; u < 64; ++u) {
        const int s = f.surface[static_cast<std::size_t>(v) * 64 + u];
        CHECK(s >= 0);
        // The +x wall is perpendicular to the optical axis: constant camera depth 5.
        const WorldPoint hit = scene.path[0].pose.center() +
                               (f.depth.at(u, v) / g) * (scene.path[0].pose.rotation().transpose() *
                                                         Eigen::Vector3d((u + 0.5 - 32.0) / 50.0, (v + 0.5 - 24.0) / 50.0, 1.0));
        if (std::abs(hit.x() - 10.0) < 1e-5) {
          CHECK(f.depth.at(u, v) == static_cast<float>(5.0 * g));
          ++wall;
        }
      }
    }
    // The wall spans 1.5 m below and above the eye: 30 of the 48 rows at fx 50.
    CHECK(wall == 64 * 30);
    CHECK(f.masks.empty());
  }
}

TEST_CASE("box silhouette is the convex hull of its projected corners") {
  const SynthScene scene = standard_fixture();
  const OrientedBox& box = scene.pois[0].box;
  for (std::size_t i = 0; i < scene.path.size(); ++i) {
    const SynthView& view = scene.path[i];
    const SynthFrame f = render_analytic(scene, i);
    std::vector<Eigen::Vector2d> corners;
    for (int k = 0; k < 8; ++k) corners.push_back(project_by_hand(view, box.corner(k)));
    std::size_t checked = 0, inside = 0;
    for (int v = 0; v < view.model.height(); ++v) {
      for (int u = 0; u < view.model.width(); ++u) {
        const bool center = oracle::inside_convex_hull(corners, {u + 0.5, v + 0.5});
        // Skip pixels the hull boundary passes through.
        bool agree = true;
        for (int c = 0; c < 4; ++c) {
          agree &= oracle::inside_convex_hull(corners, {u + (c & 1), v + (c >> 1)}) == center;
        }
        if (!agree) continue;
        ++checked;
        inside += center;
        CHECK(f.masks[0].at(u, v) == center);
      }
    }
    CHECK(inside > 1000);
    CHECK(checked > 300000);
  }
}

TEST_CASE("rendered depth back-projects onto the rendered surface") {
  const double g = 2.0;
  const SynthScene scene = standard_fixture(g);
  const OrientedBox& box = scene.pois[0].box;
  for (std::size_t i : {0, 3, 5}) {
    const SynthView& view = scene.path[i];
    const SynthFrame f = render_analytic(scene, i);
    for (int v = 0; v < 480; v += 7) {
      for (int u = 0; u < 640; u += 7) {
        const int s = f.surface[static_cast<std::size_t>(v) * 640 + u];
        REQUIRE(s >= 0);
        const WorldPoint p = back_project_pixel(view.model, view.pose, {u + 0.5, v + 0.5}, f.depth.at(u, v) / g);
        // Reprojects to the pixel center.
        const Eigen::Vector2d q = project_by_hand(view, p);
        CHECK(std::abs(q.x() - (u + 0.5)) < 1e-6);
        CHECK(std::abs(q.y() - (v + 0.5)) < 1e-6);
        // Lies on the surface the renderer reported (float depth, so relative 1e-6).
        const double tol = 1e-6 * f.depth.at(u, v);
        if (s == 6) {
          const Eigen::Vector3d local = (box.axes().transpose() * (p - box.center())).cwiseAbs();
          CHECK(std::abs(local.maxCoeff() - 0.5) < tol);
        } else {
          const int axis = (s / 2 + 2) % 3;  // floor/ceiling, x walls, y walls
          const double plane = s % 2 == 0 ? 0.0 : scene.room_size[axis];
          CHECK(std::abs(p[axis] - plane) < tol);
        }
      }
    }
  }
}

TEST_CASE("IoU scoring") {
  const OrientedBox unit(WorldPoint(0, 0, 0), Mat3::Identity(), Eigen::Vector3d::Constant(0.5));
  CHECK(std::abs(score_iou(unit, unit) - 1.0) <= 0.01);
  const Mat3 quarter = Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  CHECK(std::abs(score_iou(unit, OrientedBox(WorldPoint(0, 0, 0), quarter, Eigen::Vector3d::Constant(0.5))) - 1.0) <= 0.01);
  CHECK(score_iou(unit, OrientedBox(WorldPoint(3, 0, 0), Mat3::Identity(), Eigen::Vector3d::Constant(0.5))) == 0.0);
  // Overlap 0.5, union 1.5.
  const OrientedBox shifted(WorldPoint(0.5, 0, 0), Mat3::Identity(), Eigen::Vector3d::Constant(0.5));
  CHECK(std::abs(score_iou(unit, shifted) - 1.0 / 3.0) <= 0.01);
  CHECK(score_iou(unit, shifted) == score_iou(unit, shifted));
  // Nested: volume ratio 1/8.
  const OrientedBox small(WorldPoint(0, 0, 0), Mat3::Identity(), Eigen::Vector3d::Constant(0.25));
  CHECK(std::abs(score_iou(unit, small) - 0.125) <= 0.01);
}

TEST_CASE("hole selection and the holed mesh") {
  const SynthScene intact = standard_fixture();
  const std::size_t cells = shell_cell_count(intact);
  // 10 x 8 x 3 room in 0.5 m cells: two 20x16 faces, two 20x6, two 16x6.
  CHECK(cells == 2 * 320 + 2 * 120 + 2 * 96);
  const auto a = pick_removed_cells(intact, 0.2, 7);
  CHECK(a == pick_removed_cells(intact, 0.2, 7));
  CHECK(a.size() == static_cast<std::size_t>(std::llround(0.2 * cells)));
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  CHECK(a != pick_removed_cells(intact, 0.2, 8));

  const SynthScene holed = standard_fixture(1.0, 0.2);
  CHECK(holed.removed_cells == a);
  const TriMesh full = build_scene_mesh(intact);
  const TriMesh mesh = build_scene_mesh(holed);
  CHECK(full.triangles().size() == 2 * cells + 12);
  CHECK(mesh.triangles().size() == 2 * (cells - a.size()) + 12);

  // Some rays from inside the room escape through the holes, most do not.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  const WorldPoint origin(7, 6, 2.2);
  int escaped = 0, total = 0;
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Vector3d dir = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    if (!oracle::raycast(full.vertices(), full.triangles(), origin, dir)) continue;
    ++total;
    escaped += !oracle::raycast(mesh.vertices(), mesh.triangles(), origin, dir);
  }
  CHECK(total == 2000);
  CHECK(escaped > 0);
  CHECK(escaped < total / 2);
}

TEST_CASE("fixture files and truth") {
  const auto dir = oracle::scratch_dir("synth-fixture");
  FixtureOptions options;
  options.hidden_scale = 2.0;
  options.pose_missing = {4, 5};
  const Fixture fx = write_fixture(dir, options);
  for (const char* f : {"mesh.ply", "truth.json", "project.json", "colmap/cameras.txt", "colmap/images.txt"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(fx.project.frames.size() == 6);
  CHECK(fx.project.frames[0].pose);
  CHECK_FALSE(fx.project.frames[4].pose);
  CHECK_FALSE(fx.project.frames[5].pose);
  REQUIRE(fx.project.annotations.size() == 1);
  CHECK(fx.project.annotations[0].masks.size() == 3);

  const auto truth = load_truth(dir);
  REQUIRE(truth.size() == 1);
  CHECK(truth[0].label == "box");
  CHECK((truth[0].box.center() - WorldPoint(4, 3, 0.5)).norm() < 1e-12);
  CHECK((truth[0].box.half_extents() - Eigen::Vector3d::Constant(0.5)).norm() < 1e-12);

  const DepthMap d = load_depth_map(dir / fx.project.frames[0].depth_path->string());
  const SynthFrame f = render_analytic(fx.scene, 0);
  CHECK(d.at(320, 240) == f.depth.at(320, 240));

  // Scoring: a POI without a box has no IoU.
  Project p = fx.project;
  PoiInstance cast;
  cast.id = "box";
  cast.label = "box";
  cast.status = PoiStatus::Cast;
  cast.box = truth[0].box;
  PoiInstance failed;
  failed.id = "other";
  failed.label = "box";
  failed.status = PoiStatus::Failed;
  p.pois = {cast, failed};
  const auto rows = score_project(p, truth);
  REQUIRE(rows.size() == 2);
  CHECK(std::abs(*rows[0].iou - 1.0) <= 0.01);
  CHECK_FALSE(rows[1].iou);
  const std::string csv = score_csv(rows);
  CHECK(csv.rfind("poi_id,label,status,iou\n", 0) == 0);
  CHECK(csv.find("other,box,failed,\n") != std::string::npos);
  CHECK(score_json(rows)[1]["iou"].is_null());
}

}
