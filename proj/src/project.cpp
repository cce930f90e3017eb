#include "flymethrough/project.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>

#include "flymethrough/image.hpp"
#include "flymethrough/mesh.hpp"

namespace flymethrough {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> number_or_null(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string generic(const std::filesystem::path& p) { return p.generic_string(); }

std::filesystem::path mask_file(const std::string& annotation_id, const std::string& frame_id) {
  return std::filesystem::path("masks") / annotation_id / (frame_id + ".png");
}

std::filesystem::path current_mask_file(const std::string& annotation_id) {
  return std::filesystem::path("masks") / annotation_id / "_current.png";
}

json frame_json(const FrameRecord& f) {
  return {{"frame_id", f.frame_id},
          {"image_path", generic(f.image_path)},
          {"depth_path", f.depth_path ? json(generic(*f.depth_path)) : json(nullptr)},
          {"timestamp_sec", f.timestamp_sec},
          {"camera", to_json(f.model)},
          {"pose", f.pose ? to_json(*f.pose) : json(nullptr)}};
}

FrameRecord frame_from_json(const json& j) {
  FrameRecord f;
  f.frame_id = j.at("frame_id").get<std::string>();
  f.image_path = j.at("image_path").get<std::string>();
  if (j.contains("depth_path") && !j.at("depth_path").is_null()) f.depth_path = j.at("depth_path").get<std::string>();
  f.timestamp_sec = j.value("timestamp_sec", 0.0);
  f.model = camera_model_from_json(j.at("camera"));
  if (j.contains("pose") && !j.at("pose").is_null()) f.pose = camera_pose_from_json(j.at("pose"));
  return f;
}

json prompt_json(const PromptPoint& p) {
  return {{"u", p.pixel.u}, {"v", p.pixel.v}, {"polarity", to_string(p.polarity)}};
}

json annotation_json(const AnnotationRecord& a) {
  const AnnotationSession& s = a.session;
  json prompts = json::array();
  for (const PromptPoint& p : s.prompts) prompts.push_back(prompt_json(p));
  json masks = json::array();
  for (const auto& [frame_id, mask] : a.masks) {
    masks.push_back({{"frame_id", frame_id}, {"mask_path", generic(mask_file(s.id, frame_id))}});
  }
  return {{"id", s.id},
          {"frame_id", s.frame_id},
          {"label", s.label},
          {"description", s.description},
          {"state", to_string(s.state)},
          {"prompts", prompts},
          {"mask_path", s.current_mask ? json(generic(current_mask_file(s.id))) : json(nullptr)},
          {"masks", masks},
          {"termination_frame", a.termination_frame ? json(*a.termination_frame) : json(nullptr)},
          {"termination_reason", a.termination_reason ? json(to_string(*a.termination_reason)) : json(nullptr)}};
}

AnnotationRecord annotation_from_json(const json& j, const std::filesystem::path& root) {
  AnnotationRecord a;
  AnnotationSession& s = a.session;
  s.id = j.at("id").get<std::string>();
  s.frame_id = j.at("frame_id").get<std::string>();
  s.label = j.value("label", std::string());
  s.description = j.value("description", std::string());
  s.state = parse_session_state(j.value("state", std::string("drafting")));
  for (const json& p : j.value("prompts", json::array())) {
    s.prompts.push_back({{p.at("u").get<double>(), p.at("v").get<double>()},
                         parse_polarity(p.at("polarity").get<std::string>())});
  }
  if (j.contains("mask_path") && !j.at("mask_path").is_null()) {
    s.current_mask = read_png_mask(root / j.at("mask_path").get<std::string>());
    s.current_mask->set_frame_id(s.frame_id);
  }
  for (const json& m : j.value("masks", json::array())) {
    const std::string frame_id = m.at("frame_id").get<std::string>();
    SegMask mask = read_png_mask(root / m.at("mask_path").get<std::string>());
    mask.set_frame_id(frame_id);
    a.masks.emplace_back(frame_id, std::move(mask));
  }
  if (j.contains("termination_frame") && !j.at("termination_frame").is_null()) {
    a.termination_frame = j.at("termination_frame").get<std::string>();
  }
  if (j.contains("termination_reason") && !j.at("termination_reason").is_null()) {
    a.termination_reason = parse_termination_reason(j.at("termination_reason").get<std::string>());
  }
  return a;
}

json cast_summary_json(const CastSummary& c) {
  return {{"frame_id", c.frame_id},
          {"accepted_scale", c.accepted_scale},
          {"iterations", c.iterations},
          {"contact_fraction", c.contact_fraction},
          {"contact_points", c.contact_points},
          {"failure", c.failure.empty() ? json(nullptr) : json(c.failure)}};
}

CastSummary cast_summary_from_json(const json& j) {
  CastSummary c;
  c.frame_id = j.at("frame_id").get<std::string>();
  c.accepted_scale = j.value("accepted_scale", 0.0);
  c.iterations = j.value("iterations", 0);
  c.contact_fraction = j.value("contact_fraction", 0.0);
  c.contact_points = j.value("contact_points", std::size_t{0});
  if (j.contains("failure") && !j.at("failure").is_null()) c.failure = j.at("failure").get<std::string>();
  return c;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

const FrameRecord* Project::find_frame(const std::string& frame_id) const {
  for (const FrameRecord& f : frames) {
    if (f.frame_id == frame_id) return &f;
  }
  return nullptr;
}

std::optional<std::size_t> Project::frame_index(const std::string& frame_id) const {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].frame_id == frame_id) return i;
  }
  return std::nullopt;
}

AnnotationRecord* Project::find_annotation(const std::string& annotation_id) {
  for (AnnotationRecord& a : annotations) {
    if (a.session.id == annotation_id) return &a;
  }
  return nullptr;
}

const AnnotationRecord* Project::find_annotation(const std::string& annotation_id) const {
  return const_cast<Project*>(this)->find_annotation(annotation_id);
}

PoiInstance* Project::find_poi(const std::string& poi_id) {
  for (PoiInstance& p : pois) {
    if (p.id == poi_id) return &p;
  }
  return nullptr;
}

std::filesystem::path Project::resolve(const std::filesystem::path& relative) const {
  return relative.is_absolute() ? relative : root / relative;
}

std::vector<std::string> Project::pose_missing() const {
  std::vector<std::string> ids;
  for (const FrameRecord& f : frames) {
    if (!f.pose) ids.push_back(f.frame_id);
  }
  return ids;
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const CastConfig& c) {
  return {{"growth_factor", c.growth_factor},
          {"contact_threshold", c.contact_threshold},
          {"contact_tolerance", c.contact_tolerance},
          {"initial_scale", optional_number(c.initial_scale)},
          {"max_scale", optional_number(c.max_scale)},
          {"downsample_min", c.downsample_min},
          {"downsample_max", c.downsample_max}};
}

CastConfig cast_config_from_json(const json& j) {
  CastConfig c;
  c.growth_factor = j.value("growth_factor", c.growth_factor);
  c.contact_threshold = j.value("contact_threshold", c.contact_threshold);
  c.contact_tolerance = j.value("contact_tolerance", c.contact_tolerance);
  c.initial_scale = number_or_null(j, "initial_scale");
  c.max_scale = number_or_null(j, "max_scale");
  c.downsample_min = j.value("downsample_min", c.downsample_min);
  c.downsample_max = j.value("downsample_max", c.downsample_max);
  c.validate();
  return c;
}

json to_json(const ClusterConfig& c) {
  return {{"epsilon", c.epsilon},
          {"min_pts", c.min_pts},
          {"selection", c.selection == ClusterSelection::Largest ? "largest" : "all"}};
}

ClusterConfig cluster_config_from_json(const json& j) {
  ClusterConfig c;
  c.epsilon = j.value("epsilon", c.epsilon);
  c.min_pts = j.value("min_pts", c.min_pts);
  const std::string selection = j.value("selection", std::string("largest"));
  if (selection == "largest") {
    c.selection = ClusterSelection::Largest;
  } else if (selection == "all") {
    c.selection = ClusterSelection::All;
  } else {
    throw Error(ErrorCode::ParseError, "unknown cluster selection '" + selection + "'");
  }
  c.validate();
  return c;
}

json to_json(const OrientedBox& box) {
  json axes = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) axes.push_back(box.axes()(r, c));
  }
  return {{"center", {box.center().x(), box.center().y(), box.center().z()}},
          {"axes", axes},
          {"half_extents", {box.half_extents().x(), box.half_extents().y(), box.half_extents().z()}}};
}

OrientedBox box_from_json(const json& j) {
  const auto center = j.at("center").get<std::vector<double>>();
  const auto axes = j.at("axes").get<std::vector<double>>();
  const auto half = j.at("half_extents").get<std::vector<double>>();
  if (center.size() != 3 || axes.size() != 9 || half.size() != 3) {
    throw Error(ErrorCode::ParseError, "box needs center[3], axes[9], half_extents[3]");
  }
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = axes[static_cast<std::size_t>(r * 3 + c)];
  }
  return OrientedBox(WorldPoint(center[0], center[1], center[2]), m, Eigen::Vector3d(half[0], half[1], half[2]));
}

json to_json(const PoiInstance& p) {
  json casts = json::array();
  for (const CastSummary& c : p.casts) casts.push_back(cast_summary_json(c));
  return {{"id", p.id},
          {"label", p.label},
          {"description", p.description},
          {"frame_ids", p.frame_ids},
          {"status", to_string(p.status)},
          {"failure", p.failure == FailureReason::None ? json(nullptr) : json(to_string(p.failure))},
          {"box", p.box ? to_json(*p.box) : json(nullptr)},
          {"support_count", p.support_count},
          {"cluster_sizes", p.cluster_sizes},
          {"noise_count", p.noise_count},
          {"casts", casts}};
}

PoiInstance poi_from_json(const json& j) {
  PoiInstance p;
  p.id = j.at("id").get<std::string>();
  p.label = j.value("label", std::string());
  p.description = j.value("description", std::string());
  p.frame_ids = j.value("frame_ids", std::vector<std::string>{});
  p.status = parse_poi_status(j.value("status", std::string("pending")));
  if (j.contains("failure") && !j.at("failure").is_null()) p.failure = parse_failure_reason(j.at("failure").get<std::string>());
  if (j.contains("box") && !j.at("box").is_null()) p.box = box_from_json(j.at("box"));
  p.support_count = j.value("support_count", std::size_t{0});
  p.cluster_sizes = j.value("cluster_sizes", std::vector<std::size_t>{});
  p.noise_count = j.value("noise_count", std::size_t{0});
  for (const json& c : j.value("casts", json::array())) p.casts.push_back(cast_summary_from_json(c));
  return p;
}

json to_json(const CameraModel& m) {
  return {{"fx", m.fx()}, {"fy", m.fy()}, {"cx", m.cx()}, {"cy", m.cy()}, {"width", m.width()}, {"height", m.height()}};
}

CameraModel camera_model_from_json(const json& j) {
  return CameraModel(j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                     j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>());
}

json to_json(const CameraPose& pose) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r.push_back(pose.rotation()(i, k));
  }
  const Eigen::Vector3d& t = pose.translation();
  return {{"rotation", r}, {"translation", {t.x(), t.y(), t.z()}}};
}

CameraPose camera_pose_from_json(const json& j) {
  const auto r = j.at("rotation").get<std::vector<double>>();
  const auto t = j.at("translation").get<std::vector<double>>();
  if (r.size() != 9 || t.size() != 3) throw Error(ErrorCode::ParseError, "pose needs rotation[9], translation[3]");
  Mat3 m;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) m(i, k) = r[static_cast<std::size_t>(i * 3 + k)];
  }
  return CameraPose(m, Eigen::Vector3d(t[0], t[1], t[2]));
}

json manifest_json(const Project& p) {
  json frames = json::array();
  for (const FrameRecord& f : p.frames) frames.push_back(frame_json(f));
  json annotations = json::array();
  for (const AnnotationRecord& a : p.annotations) annotations.push_back(annotation_json(a));
  json pois = json::array();
  for (const PoiInstance& poi : p.pois) pois.push_back(to_json(poi));
  return {{"schema_version", p.schema_version},
          {"id", p.id},
          {"name", p.name},
          {"mesh_path", generic(p.mesh_path)},
          {"axis_flip", p.axis_flip},
          {"created_at", p.created_at},
          {"updated_at", p.updated_at},
          {"cast_config", to_json(p.cast_config)},
          {"cluster_config", to_json(p.cluster_config)},
          {"segmenter_config", {{"tau", p.segmenter_config.tau}}},
          {"frames", frames},
          {"annotations", annotations},
          {"pois", pois}};
}

std::string manifest_text(const Project& project) { return manifest_json(project).dump(2) + "\n"; }

void persist_project(const Project& project) {
  if (project.root.empty()) throw Error(ErrorCode::InvalidArgument, "project has no root directory");
  std::filesystem::create_directories(project.root);
  for (const AnnotationRecord& a : project.annotations) {
    const std::string& id = a.session.id;
    if (a.session.current_mask || !a.masks.empty()) {
      std::filesystem::create_directories(project.root / "masks" / id);
    }
    if (a.session.current_mask) write_png_mask(project.root / current_mask_file(id), *a.session.current_mask);
    for (const auto& [frame_id, mask] : a.masks) write_png_mask(project.root / mask_file(id, frame_id), mask);
  }
  write_text_atomic(project.root / kManifestName, manifest_text(project));
}

Project load_project(const std::filesystem::path& path) {
  const std::filesystem::path manifest =
      std::filesystem::is_directory(path) ? path / kManifestName : path;
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + manifest.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, manifest.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("schema_version")) {
    throw Error(ErrorCode::ParseError, manifest.string() + ": schema_version is required");
  }
  const int version = j.at("schema_version").get<int>();
  if (version != kSchemaVersion) {
    throw Error(ErrorCode::SchemaVersionMismatch, manifest.string() + ": schema_version " +
                                                      std::to_string(version) + ", expected " +
                                                      std::to_string(kSchemaVersion));
  }
  Project p;
  p.root = manifest.parent_path();
  if (p.root.empty()) p.root = ".";
  try {
    p.schema_version = version;
    p.id = j.at("id").get<std::string>();
    p.name = j.value("name", p.id);
    p.mesh_path = j.at("mesh_path").get<std::string>();
    p.axis_flip = j.value("axis_flip", false);
    p.created_at = j.value("created_at", std::string());
    p.updated_at = j.value("updated_at", std::string());
    p.cast_config = cast_config_from_json(j.value("cast_config", json::object()));
    p.cluster_config = cluster_config_from_json(j.value("cluster_config", json::object()));
    p.segmenter_config.tau = j.value("segmenter_config", json::object()).value("tau", p.segmenter_config.tau);
    for (const json& f : j.value("frames", json::array())) p.frames.push_back(frame_from_json(f));
    for (const json& a : j.value("annotations", json::array())) p.annotations.push_back(annotation_from_json(a, p.root));
    for (const json& poi : j.value("pois", json::array())) p.pois.push_back(poi_from_json(poi));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, manifest.string() + ": " + e.what());
  }

  std::set<std::string> ids;
  double last_time = -std::numeric_limits<double>::infinity();
  for (FrameRecord& f : p.frames) {
    if (!ids.insert(f.frame_id).second) throw Error(ErrorCode::ParseError, "duplicate frame id " + f.frame_id);
    if (f.timestamp_sec < last_time) {
      throw Error(ErrorCode::ParseError, "frame " + f.frame_id + " has a timestamp earlier than the frame before it");
    }
    last_time = f.timestamp_sec;
    f.image_missing = !std::filesystem::exists(p.resolve(f.image_path));
    if (f.image_missing) p.warnings.push_back("frame " + f.frame_id + ": image missing: " + generic(f.image_path));
    f.depth_missing = !f.depth_path || !std::filesystem::exists(p.resolve(*f.depth_path));
    if (f.depth_path && f.depth_missing) {
      p.warnings.push_back("frame " + f.frame_id + ": depth missing: " + generic(*f.depth_path));
    }
  }
  for (const PoiInstance& poi : p.pois) {
    for (const std::string& fid : poi.frame_ids) {
      if (!ids.count(fid)) throw Error(ErrorCode::ParseError, "poi " + poi.id + " references unknown frame " + fid);
    }
  }
  if (!std::filesystem::exists(p.resolve(p.mesh_path))) p.warnings.push_back("mesh missing: " + generic(p.mesh_path));
  return p;
}

Project init_project(const InitOptions& o) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(o.frames_dir)) throw Error(ErrorCode::IoError, "frames directory not found: " + o.frames_dir.string());
  if (!fs::exists(o.mesh)) throw Error(ErrorCode::IoError, "mesh not found: " + o.mesh.string());
  fs::create_directories(o.dir);
  const fs::path root = fs::absolute(o.dir);
  auto rel = [&](const fs::path& p) { return fs::relative(fs::absolute(p), root); };

  Project p;
  p.root = o.dir;
  p.name = o.name.empty() ? root.filename().string() : o.name;
  p.id = p.name;
  p.mesh_path = rel(o.mesh);
  p.axis_flip = o.axis_flip;
  p.created_at = p.updated_at = utc_now_iso8601();

  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(o.frames_dir)) {
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (entry.is_regular_file() && ext == ".png") images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  if (images.empty()) throw Error(ErrorCode::IoError, "no PNG frames in " + o.frames_dir.string());

  std::optional<ColmapImport> colmap;
  if (o.colmap_dir) colmap = import_colmap_text(*o.colmap_dir / "cameras.txt", *o.colmap_dir / "images.txt");

  for (std::size_t i = 0; i < images.size(); ++i) {
    FrameRecord f;
    f.frame_id = images[i].stem().string();
    f.image_path = rel(images[i]);
    f.timestamp_sec = static_cast<double>(i) / o.fps;
    const ColmapImage* match = nullptr;
    if (colmap) {
      for (const ColmapImage& img : colmap->images) {
        if (fs::path(img.name).stem().string() == f.frame_id) match = &img;
      }
    }
    if (match) {
      f.model = colmap->cameras.at(match->camera_id);
      f.pose = o.axis_flip ? flip_pose(match->pose) : match->pose;
    } else {
      const RgbImage img = read_png_rgb(images[i]);
      // Placeholder intrinsics; the frame cannot be cast without a pose anyway.
      const double focal = std::max(img.width, img.height);
      f.model = CameraModel(focal, focal, img.width / 2.0, img.height / 2.0, img.width, img.height);
      p.warnings.push_back("frame " + f.frame_id + ": pose missing");
    }
    if (o.depths_dir) {
      for (const char* ext : {".pfm", ".png"}) {
        const fs::path candidate = *o.depths_dir / (f.frame_id + ext);
        if (fs::exists(candidate)) {
          f.depth_path = rel(candidate);
          break;
        }
      }
      if (!f.depth_path) p.warnings.push_back("frame " + f.frame_id + ": depth missing");
    }
    p.frames.push_back(std::move(f));
  }
  return p;
}

}  // namespace flymethrough
