#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flymethrough/depth_cast.hpp"
#include "flymethrough/poi.hpp"
#include "flymethrough/segmentation.hpp"

namespace flymethrough {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kManifestName = "project.json";

struct FrameRecord {
  std::string frame_id;
  std::filesystem::path image_path;  // relative to the project root
  std::optional<std::filesystem::path> depth_path;
  std::optional<CameraPose> pose;
  CameraModel model{1.0, 1.0, 0.0, 0.0, 1, 1};
  double timestamp_sec = 0.0;

  // Set at load time, never persisted.
  bool image_missing = false;
  bool depth_missing = false;
};

/// An annotation session plus what propagation produced for it.
struct AnnotationRecord {
  AnnotationSession session;
  /// Anchor first, then the propagated frames in order.
  std::vector<std::pair<std::string, SegMask>> masks;
  std::optional<std::string> termination_frame;
  std::optional<TerminationReason> termination_reason;
};

struct Project {
  int schema_version = kSchemaVersion;
  std::string id;
  std::string name;
  std::filesystem::path mesh_path;
  bool axis_flip = false;
  std::string created_at;
  std::string updated_at;
  CastConfig cast_config;
  ClusterConfig cluster_config;
  FallbackConfig segmenter_config;
  std::vector<FrameRecord> frames;
  std::vector<AnnotationRecord> annotations;
  std::vector<PoiInstance> pois;

  // Runtime only.
  std::filesystem::path root;
  std::vector<std::string> warnings;

  const FrameRecord* find_frame(const std::string& frame_id) const;
  std::optional<std::size_t> frame_index(const std::string& frame_id) const;
  AnnotationRecord* find_annotation(const std::string& id);
  const AnnotationRecord* find_annotation(const std::string& id) const;
  PoiInstance* find_poi(const std::string& id);
  std::filesystem::path resolve(const std::filesystem::path& relative) const;
  /// Frame ids without a camera pose, in frame order.
  std::vector<std::string> pose_missing() const;
};

std::string utc_now_iso8601();

// JSON conversions; field names are snake_case.
nlohmann::json to_json(const CastConfig& config);
CastConfig cast_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ClusterConfig& config);
ClusterConfig cluster_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OrientedBox& box);
OrientedBox box_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PoiInstance& poi);
PoiInstance poi_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CameraModel& model);
CameraModel camera_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CameraPose& pose);
CameraPose camera_pose_from_json(const nlohmann::json& j);

/// Manifest JSON. Mask payloads are referenced by path (masks/<annotation>/<frame>.png).
nlohmann::json manifest_json(const Project& project);
std::string manifest_text(const Project& project);

/// Writes mask PNGs and then the manifest (via a temporary file and rename).
/// Timestamps are written as they are.
void persist_project(const Project& project);

/// Accepts the project directory or the manifest file. Missing image or
/// depth files are flagged on the frame and listed in warnings.
/// Throws SchemaVersionMismatch, ParseError, IoError.
Project load_project(const std::filesystem::path& path);

// COLMAP text interchange.
struct ColmapImage {
  int image_id = 0;
  int camera_id = 0;
  std::string name;
  CameraPose pose = CameraPose::identity();
};

struct ColmapImport {
  std::map<int, CameraModel> cameras;
  std::vector<ColmapImage> images;
};

std::map<int, CameraModel> parse_colmap_cameras(std::istream& in);
std::vector<ColmapImage> parse_colmap_images(std::istream& in);
/// Reads cameras.txt and images.txt.
ColmapImport import_colmap_text(const std::filesystem::path& cameras_file,
                                const std::filesystem::path& images_file);
/// Frame ids (image name stems) absent from the images list.
std::vector<std::string> pose_missing_frames(const std::vector<std::string>& frame_ids,
                                             const ColmapImport& import);

/// Rotation applied to poses when the mesh is axis-flipped: R' = R F^T.
CameraPose flip_pose(const CameraPose& pose);

// Depth maps.
/// PFM ("Pf", one channel; both byte orders) or 16-bit PNG with a sidecar
/// <stem>.json {scale, offset}. Code 0 and non-finite values become invalid.
DepthMap load_depth_map(const std::filesystem::path& path);
DepthMap load_depth_map(const std::filesystem::path& path, int expected_width, int expected_height);
/// Little-endian PFM, rows stored bottom to top.
void write_pfm(const std::filesystem::path& path, const DepthMap& depth);

struct InitOptions {
  std::filesystem::path dir;
  std::filesystem::path mesh;
  std::filesystem::path frames_dir;
  std::optional<std::filesystem::path> colmap_dir;
  std::optional<std::filesystem::path> depths_dir;
  bool axis_flip = false;
  double fps = 2.0;
  std::string name;
};

/// Builds a project from loose inputs. Frames are the PNG files in
/// frames_dir sorted by name; timestamps follow fps. Warnings name every
/// pose-missing frame.
Project init_project(const InitOptions& options);

// Report.
struct PoiReport {
  nlohmann::json pois;     // array
  nlohmann::json summary;  // counts by status and success percentage
  std::string obj;
};

PoiReport build_poi_report(const Project& project);
/// Writes pois.json, summary.json and pois.obj.
void write_poi_report(const PoiReport& report, const std::filesystem::path& out_dir);

}  // namespace flymethrough
