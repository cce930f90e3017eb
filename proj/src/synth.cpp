#include "flymethrough/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace flymethrough {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Color = std::array<std::uint8_t, 3>;

// Room faces: 0 floor, 1 ceiling, 2 wall x=0, 3 wall x=max, 4 wall y=0, 5 wall y=max.
constexpr Color kRoomColors[6] = {
    {110, 110, 110}, {235, 235, 235}, {170, 190, 215}, {200, 175, 140}, {150, 200, 160}, {190, 160, 200}};
constexpr Color kPoiColors[4] = {{220, 40, 40}, {40, 60, 220}, {230, 200, 30}, {30, 200, 200}};

struct ShellCell {
  int face;
  Eigen::Vector3d corner[4];
};

// Enumerates shell cells in a fixed order: face, then row, then column.
std::vector<ShellCell> shell_cells(const SynthScene& scene) {
  std::vector<ShellCell> cells;
  const Eigen::Vector3d& s = scene.room_size;
  // For each face: fixed axis, fixed value, and the two spanning axes.
  struct Face {
    int fixed;
    double value;
    int a;
    int b;
  };
  const Face faces[6] = {{2, 0.0, 0, 1}, {2, s.z(), 0, 1}, {0, 0.0, 1, 2},
                         {0, s.x(), 1, 2}, {1, 0.0, 0, 2}, {1, s.y(), 0, 2}};
  for (int f = 0; f < 6; ++f) {
    const Face& face = faces[f];
    const int na = static_cast<int>(std::llround(s(face.a) / scene.cell_size));
    const int nb = static_cast<int>(std::llround(s(face.b) / scene.cell_size));
    for (int j = 0; j < nb; ++j) {
      for (int i = 0; i < na; ++i) {
        ShellCell cell{f, {}};
        const double a0 = s(face.a) * i / na, a1 = s(face.a) * (i + 1) / na;
        const double b0 = s(face.b) * j / nb, b1 = s(face.b) * (j + 1) / nb;
        const double as[4] = {a0, a1, a1, a0};
        const double bs[4] = {b0, b0, b1, b1};
        for (int k = 0; k < 4; ++k) {
          cell.corner[k](face.fixed) = face.value;
          cell.corner[k](face.a) = as[k];
          cell.corner[k](face.b) = bs[k];
        }
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

// Slab test of a ray against an oriented box; returns entry distance or +inf.
double intersect_box(const OrientedBox& box, const Eigen::Vector3d& origin,
                     const Eigen::Vector3d& dir) {
  const Eigen::Vector3d o = box.axes().transpose() * (origin - box.center());
  const Eigen::Vector3d d = box.axes().transpose() * dir;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const double h = box.half_extents()(k);
    if (d(k) == 0.0) {
      if (std::abs(o(k)) > h) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (-h - o(k)) / d(k);
    double t1 = (h - o(k)) / d(k);
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_near <= 0.0) return std::numeric_limits<double>::infinity();
  return t_near;
}

// Exit point of a ray starting inside the room box [0, size].
std::pair<double, int> intersect_room(const Eigen::Vector3d& size, const Eigen::Vector3d& origin,
                                      const Eigen::Vector3d& dir) {
  double best = std::numeric_limits<double>::infinity();
  int face = -1;
  const int low_face[3] = {2, 4, 0};
  const int high_face[3] = {3, 5, 1};
  for (int k = 0; k < 3; ++k) {
    if (dir(k) > 0.0) {
      const double t = (size(k) - origin(k)) / dir(k);
      if (t < best) {
        best = t;
        face = high_face[k];
      }
    } else if (dir(k) < 0.0) {
      const double t = -origin(k) / dir(k);
      if (t < best) {
        best = t;
        face = low_face[k];
      }
    }
  }
  return {best, face};
}

double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base);
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

}  // namespace

CameraPose look_at(const WorldPoint& eye, const WorldPoint& target) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
  if (right.norm() < 1e-9) right = Eigen::Vector3d::UnitX();
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Mat3 rotation;
  rotation.row(0) = right;
  rotation.row(1) = down;
  rotation.row(2) = forward;
  return CameraPose(rotation, -rotation * eye);
}

SynthScene standard_fixture(double hidden_scale, double hole_fraction, std::uint64_t seed) {
  SynthScene scene;
  scene.hidden_depth_scale = hidden_scale;
  scene.seed = seed;
  const WorldPoint box_center(4.0, 3.0, 0.5);
  scene.pois.push_back({"box", OrientedBox(box_center, Mat3::Identity(), Eigen::Vector3d::Constant(0.5))});

  const CameraModel model(500.0, 500.0, 320.0, 240.0, 640, 480);
  const double radius = 4.4;
  const double eye_height = 0.7;
  for (int i = 0; i < 6; ++i) {
    const double phi = (-30.0 + 30.0 * i) * kPi / 180.0;
    const WorldPoint eye(box_center.x() + radius * std::cos(phi),
                         box_center.y() + radius * std::sin(phi), eye_height);
    scene.path.push_back({model, look_at(eye, box_center)});
  }
  if (hole_fraction > 0.0) scene.removed_cells = pick_removed_cells(scene, hole_fraction, seed);
  return scene;
}

std::size_t shell_cell_count(const SynthScene& scene) { return shell_cells(scene).size(); }

std::vector<std::size_t> pick_removed_cells(const SynthScene& scene, double fraction,
                                            std::uint64_t seed) {
  const std::size_t n = shell_cell_count(scene);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with raw engine output so the choice is portable.
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> removed(order.begin(), order.begin() + std::min(k, n));
  std::sort(removed.begin(), removed.end());
  return removed;
}

void append_box_mesh(const OrientedBox& box, std::vector<WorldPoint>& vertices,
                     std::vector<Triangle>& triangles) {
  const auto base = static_cast<std::uint32_t>(vertices.size());
  for (int i = 0; i < 8; ++i) vertices.push_back(box.corner(i));
  // Corner bits: 1 -> +x, 2 -> +y, 4 -> +z. Outward-facing quads.
  static constexpr std::uint32_t kQuads[6][4] = {{0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1},
                                                 {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}};
  for (const auto& q : kQuads) {
    triangles.push_back({base + q[0], base + q[1], base + q[2]});
    triangles.push_back({base + q[0], base + q[2], base + q[3]});
  }
}

TriMesh build_scene_mesh(const SynthScene& scene) {
  std::vector<WorldPoint> vertices;
  std::vector<Triangle> triangles;
  const std::vector<ShellCell> cells = shell_cells(scene);
  std::vector<char> removed(cells.size(), 0);
  for (std::size_t idx : scene.removed_cells) {
    if (idx < removed.size()) removed[idx] = 1;
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (removed[c]) continue;
    const auto base = static_cast<std::uint32_t>(vertices.size());
    for (const auto& corner : cells[c].corner) vertices.push_back(corner);
    triangles.push_back({base, base + 1, base + 2});
    triangles.push_back({base, base + 2, base + 3});
  }
  for (const SynthPoi& poi : scene.pois) append_box_mesh(poi.box, vertices, triangles);
  return TriMesh(std::move(vertices), std::move(triangles));
}

SynthFrame render_analytic(const SynthScene& scene, std::size_t frame_index) {
  const SynthView& view = scene.path.at(frame_index);
  const CameraModel& model = view.model;
  const int w = model.width();
  const int h = model.height();
  const Mat3 rt = view.pose.rotation().transpose();
  const WorldPoint eye = view.pose.center();

  SynthFrame frame;
  frame.depth = DepthMap(w, h, 0.0f);
  frame.image = RgbImage(w, h);
  frame.surface.assign(static_cast<std::size_t>(w) * h, -1);
  for (std::size_t k = 0; k < scene.pois.size(); ++k) {
    frame.masks.emplace_back(w, h, "");
  }

  std::mt19937_64 jitter_rng(scene.seed ^ (0x9e3779b97f4a7c15ull * (frame_index + 1)));
  std::normal_distribution<double> jitter(0.0, 1.0);

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      // Camera ray with unit z so the hit distance along it equals camera depth.
      const Eigen::Vector3d cam_dir((u + 0.5 - model.cx()) / model.fx(),
                                    (v + 0.5 - model.cy()) / model.fy(), 1.0);
      const Eigen::Vector3d dir = rt * cam_dir;
      auto [t_best, surface] = intersect_room(scene.room_size, eye, dir);
      for (std::size_t k = 0; k < scene.pois.size(); ++k) {
        const double t = intersect_box(scene.pois[k].box, eye, dir);
        if (t < t_best) {
          t_best = t;
          surface = 6 + static_cast<int>(k);
        }
      }
      const std::size_t idx = static_cast<std::size_t>(v) * w + u;
      frame.surface[idx] = surface;
      if (surface < 0 || !std::isfinite(t_best)) continue;

      double depth = t_best * scene.hidden_depth_scale;
      if (scene.depth_jitter > 0.0) depth *= std::max(0.05, 1.0 + scene.depth_jitter * jitter(jitter_rng));
      frame.depth.at(u, v) = static_cast<float>(depth);
      if (surface >= 6) {
        frame.masks[static_cast<std::size_t>(surface - 6)].set(u, v);
        frame.image.set(u, v, kPoiColors[(surface - 6) % 4]);
      } else {
        frame.image.set(u, v, kRoomColors[surface]);
      }
    }
  }
  return frame;
}

double score_iou(const OrientedBox& truth, const OrientedBox& predicted) {
  Eigen::AlignedBox3d bounds;
  bounds.setEmpty();
  for (int i = 0; i < 8; ++i) {
    bounds.extend(truth.corner(i));
    bounds.extend(predicted.corner(i));
  }
  const Eigen::Vector3d lo = bounds.min();
  const Eigen::Vector3d span = bounds.diagonal();

  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Vector3d shift(unit(rng), unit(rng), unit(rng));

  constexpr std::uint64_t kSamples = 100000;
  std::uint64_t both = 0, either = 0;
  for (std::uint64_t i = 1; i <= kSamples; ++i) {
    Eigen::Vector3d q(radical_inverse(i, 2), radical_inverse(i, 3), radical_inverse(i, 5));
    q = (q + shift).unaryExpr([](double x) { return x - std::floor(x); });
    const WorldPoint p = lo + span.cwiseProduct(q);
    const bool in_truth = truth.contains(p);
    const bool in_pred = predicted.contains(p);
    both += (in_truth && in_pred) ? 1 : 0;
    either += (in_truth || in_pred) ? 1 : 0;
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

}  // namespace flymethrough
