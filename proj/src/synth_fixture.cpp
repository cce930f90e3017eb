#include <Eigen/Geometry>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "flymethrough/segmentation.hpp"
#include "flymethrough/synth.hpp"

namespace flymethrough {

using nlohmann::json;

namespace {

std::string frame_name(std::size_t i) {
  std::ostringstream s;
  s << "frame_" << std::setw(3) << std::setfill('0') << i;
  return s.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

}  // namespace

Fixture write_fixture(const std::filesystem::path& dir, const FixtureOptions& options) {
  namespace fs = std::filesystem;
  Fixture fx;
  fx.scene = standard_fixture(options.hidden_scale, options.holes, options.seed);
  const SynthScene& scene = fx.scene;
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "depths");
  fs::create_directories(dir / "colmap");
  fs::create_directories(dir / "truth" / "masks");

  write_ply(dir / "mesh.ply", build_scene_mesh(scene));

  std::ostringstream cameras, images;
  cameras.precision(17);
  images.precision(17);
  cameras << "# CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]\n";
  images << "# IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME\n# POINTS2D[] as (X, Y, POINT3D_ID)\n";
  std::vector<SynthFrame> rendered;
  for (std::size_t i = 0; i < scene.path.size(); ++i) {
    const SynthView& view = scene.path[i];
    const std::string name = frame_name(i);
    SynthFrame frame = render_analytic(scene, i);
    write_png_rgb(dir / "frames" / (name + ".png"), frame.image);
    write_pfm(dir / "depths" / (name + ".pfm"), frame.depth);
    for (std::size_t k = 0; k < frame.masks.size(); ++k) {
      write_png_mask(dir / "truth" / "masks" / (name + "_poi" + std::to_string(k) + ".png"), frame.masks[k]);
    }
    const CameraModel& m = view.model;
    cameras << i + 1 << " PINHOLE " << m.width() << " " << m.height() << " " << m.fx() << " " << m.fy() << " "
            << m.cx() << " " << m.cy() << "\n";
    const bool drop = std::find(options.pose_missing.begin(), options.pose_missing.end(), i) != options.pose_missing.end();
    if (!drop) {
      const Eigen::Quaterniond q(view.pose.rotation());
      const Eigen::Vector3d& t = view.pose.translation();
      images << i + 1 << " " << q.w() << " " << q.x() << " " << q.y() << " " << q.z() << " " << t.x() << " "
             << t.y() << " " << t.z() << " " << i + 1 << " " << name << ".png\n\n";
    }
    rendered.push_back(std::move(frame));
  }
  write_text(dir / "colmap" / "cameras.txt", cameras.str());
  write_text(dir / "colmap" / "images.txt", images.str());

  json truth_pois = json::array();
  for (const SynthPoi& poi : scene.pois) truth_pois.push_back({{"label", poi.label}, {"box", to_json(poi.box)}});
  const json truth = {{"hidden_scale", scene.hidden_depth_scale},
                      {"holes", options.holes},
                      {"seed", scene.seed},
                      {"removed_cells", scene.removed_cells},
                      {"pois", truth_pois}};
  write_text(dir / "truth.json", truth.dump(2) + "\n");

  InitOptions init;
  init.dir = dir;
  init.mesh = dir / "mesh.ply";
  init.frames_dir = dir / "frames";
  init.colmap_dir = dir / "colmap";
  init.depths_dir = dir / "depths";
  init.name = "synthetic-room";
  fx.project = init_project(init);
  // Fixed timestamps keep fixture manifests reproducible.
  fx.project.created_at = fx.project.updated_at = "2025-01-01T00:00:00Z";

  if (options.annotate && !scene.pois.empty()) {
    const SegMask& truth_mask = rendered[0].masks[0];
    const auto c = truth_mask.centroid();
    if (!c) throw Error(ErrorCode::InvalidArgument, "POI not visible in frame 0");
    // Second click a quarter of the way to the mask's left edge.
    int left = static_cast<int>(c->u);
    while (left > 0 && truth_mask.at(left - 1, static_cast<int>(c->v))) --left;
    const double u2 = c->u - (c->u - left) / 2.0;

    AnnotationRecord record;
    AnnotationSession& session = record.session;
    session.id = "box";
    session.frame_id = frame_name(0);
    session.label = scene.pois[0].label;
    session.description = "synthetic floor box";
    session.prompts = {{{c->u, c->v}, Polarity::Positive}, {{u2, c->v}, Polarity::Positive}};

    FallbackSegmenter segmenter(fx.project.segmenter_config);
    std::vector<FrameInput> frames;
    for (std::size_t i = 0; i < std::min(options.propagate_frames, rendered.size()); ++i) {
      frames.push_back({frame_name(i), dir / "frames" / (frame_name(i) + ".png"),
                        std::make_shared<RgbImage>(rendered[i].image)});
    }
    session.current_mask = segmenter.segment(frames[0], session.prompts);
    session.state = SessionState::Confirmed;
    const PropagationResult result = propagate(session, frames, segmenter);
    record.masks = result.masks;
    record.termination_frame = result.termination_frame;
    record.termination_reason = result.termination_reason;
    session.state = SessionState::Propagated;
    fx.project.annotations.push_back(std::move(record));
  }
  persist_project(fx.project);
  return fx;
}

std::vector<SynthPoi> load_truth(const std::filesystem::path& fixture_dir) {
  std::ifstream in(fixture_dir / "truth.json");
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + (fixture_dir / "truth.json").string());
  std::vector<SynthPoi> pois;
  try {
    const json j = json::parse(in);
    for (const json& p : j.at("pois")) pois.push_back({p.at("label").get<std::string>(), box_from_json(p.at("box"))});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("truth.json: ") + e.what());
  }
  return pois;
}

std::vector<ScoreRow> score_project(const Project& project, const std::vector<SynthPoi>& truth) {
  std::vector<ScoreRow> rows;
  for (const PoiInstance& poi : project.pois) {
    ScoreRow row{poi.id, poi.label, to_string(poi.status), std::nullopt};
    for (const SynthPoi& t : truth) {
      if (t.label == poi.label && poi.box) {
        row.iou = score_iou(t.box, *poi.box);
        break;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::string score_csv(const std::vector<ScoreRow>& rows) {
  std::ostringstream out;
  out << "poi_id,label,status,iou\n";
  out << std::fixed << std::setprecision(4);
  for (const ScoreRow& r : rows) {
    out << r.poi_id << "," << r.label << "," << r.status << ",";
    if (r.iou) out << *r.iou;
    out << "\n";
  }
  return out.str();
}

json score_json(const std::vector<ScoreRow>& rows) {
  json out = json::array();
  for (const ScoreRow& r : rows) {
    out.push_back({{"poi_id", r.poi_id}, {"label", r.label}, {"status", r.status},
                   {"iou", r.iou ? json(*r.iou) : json(nullptr)}});
  }
  return out;
}

}  // namespace flymethrough
