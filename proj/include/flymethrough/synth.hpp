#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flymethrough/image.hpp"
#include "flymethrough/mesh.hpp"
#include "flymethrough/project.hpp"
#include "flymethrough/projection.hpp"

namespace flymethrough {

struct SynthPoi {
  std::string label;
  OrientedBox box;
};

struct SynthView {
  CameraModel model;
  CameraPose pose;
};

/// Procedural indoor scene: an axis-aligned room shell [0, size] tessellated
/// into square cells, POI boxes inside it, and a scripted camera path.
/// The renderer always sees the intact room; removed_cells only punches holes
/// into the reconstructed mesh handed to the pipeline.
struct SynthScene {
  Eigen::Vector3d room_size{10.0, 8.0, 3.0};
  double cell_size = 0.5;
  std::vector<SynthPoi> pois;
  std::vector<SynthView> path;
  double hidden_depth_scale = 1.0;
  std::vector<std::size_t> removed_cells;
  /// Optional per-pixel multiplicative depth jitter (relative sigma); 0 disables it.
  double depth_jitter = 0.0;
  std::uint64_t seed = 7;
};

struct SynthFrame {
  DepthMap depth;              // relative depth: true camera z times hidden_depth_scale
  std::vector<SegMask> masks;  // one per POI, in scene order
  RgbImage image;              // flat per-surface colors
  std::vector<int> surface;    // per pixel: 0/1 floor/ceiling, 2/3 x walls, 4/5 y walls, 6+k POI k, -1 none
};

/// The in-repo standard fixture: 10 x 8 x 3 room, one 1 x 1 x 1 box on the
/// floor, six poses on an arc around the box, 640 x 480 pinhole with
/// fx = fy = 500. hole_fraction removes that share of shell cells.
SynthScene standard_fixture(double hidden_scale = 1.0, double hole_fraction = 0.0,
                            std::uint64_t seed = 7);

/// Camera at eye looking at target, z up, image v down.
CameraPose look_at(const WorldPoint& eye, const WorldPoint& target);

std::size_t shell_cell_count(const SynthScene& scene);
/// Deterministic choice of round(fraction * cells) shell cells.
std::vector<std::size_t> pick_removed_cells(const SynthScene& scene, double fraction,
                                            std::uint64_t seed);

/// Triangle mesh of the shell (minus removed cells) plus every POI box.
TriMesh build_scene_mesh(const SynthScene& scene);
/// 12-triangle box mesh; appended to vertices/triangles.
void append_box_mesh(const OrientedBox& box, std::vector<WorldPoint>& vertices,
                     std::vector<Triangle>& triangles);

/// Exact per-pixel ray casting against the room planes and box slabs.
SynthFrame render_analytic(const SynthScene& scene, std::size_t frame_index);

/// Monte Carlo 3D IoU with 100,000 Halton samples over the union's bounding
/// box (fixed Cranley-Patterson shift). Accuracy about +-0.01.
double score_iou(const OrientedBox& truth, const OrientedBox& predicted);

struct FixtureOptions {
  double hidden_scale = 1.0;
  double holes = 0.0;
  std::uint64_t seed = 7;
  /// Frame indices left out of images.txt.
  std::vector<std::size_t> pose_missing;
  /// Adds annotation "box" on frame 0 from two fallback-segmenter clicks,
  /// propagated over the first propagate_frames frames.
  bool annotate = true;
  std::size_t propagate_frames = 3;
};

struct Fixture {
  SynthScene scene;
  Project project;
};

/// Writes mesh.ply, frames/*.png, depths/*.pfm, colmap/{cameras,images}.txt,
/// truth.json, truth/masks/*.png and project.json into dir.
Fixture write_fixture(const std::filesystem::path& dir, const FixtureOptions& options = {});

/// Ground-truth boxes by label from a fixture's truth.json.
std::vector<SynthPoi> load_truth(const std::filesystem::path& fixture_dir);

struct ScoreRow {
  std::string poi_id;
  std::string label;
  std::string status;
  std::optional<double> iou;  // absent when the POI has no box or no truth
};

/// Scores each POI against the truth box with the same label.
std::vector<ScoreRow> score_project(const Project& project, const std::vector<SynthPoi>& truth);
std::string score_csv(const std::vector<ScoreRow>& rows);
nlohmann::json score_json(const std::vector<ScoreRow>& rows);

}  // namespace flymethrough
