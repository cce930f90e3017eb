// flymethrough command line: project setup, batch localization, export,
// the REST service and synthetic fixtures.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "flymethrough/config_file.hpp"
#include "flymethrough/pipeline.hpp"
#include "flymethrough/project.hpp"
#include "flymethrough/service.hpp"
#include "flymethrough/synth.hpp"

namespace fs = std::filesystem;
using namespace flymethrough;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitFailedAnnotation = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::NotFound: return kExitUsage;
    default: return kExitIo;
  }
}

Project open_project(const fs::path& path) {
  Project project = load_project(path);
  apply_settings(load_settings(project.root / kConfigName), project);
  for (const std::string& w : project.warnings) std::cerr << "warning: " << w << "\n";
  return project;
}

// Init --------------------------------------------------------------------

struct InitArgs {
  InitOptions options;
  std::string mesh, frames, colmap, depths, dir;
};

int run_init(InitArgs& a) {
  InitOptions o = a.options;
  o.dir = a.dir;
  o.mesh = a.mesh;
  o.frames_dir = a.frames;
  if (!a.colmap.empty()) o.colmap_dir = fs::path(a.colmap);
  if (!a.depths.empty()) o.depths_dir = fs::path(a.depths);
  Project project = init_project(o);
  apply_settings(load_settings(project.root / kConfigName), project);
  persist_project(project);
  for (const std::string& w : project.warnings) std::cout << "warning: " << w << "\n";
  std::cout << "initialized project " << project.id << ": " << project.frames.size() << " frames, "
            << project.pose_missing().size() << " without pose\n";
  return 0;
}

// Localize ----------------------------------------------------------------

struct LocalizeArgs {
  std::string project;
  std::vector<std::string> annotations;
  bool all = false;
  std::optional<double> threshold;
  std::optional<double> growth;
  int jobs = 1;
  bool json = false;
};

void print_poi(const PoiInstance& poi) {
  std::printf("%s  status=%s", poi.id.c_str(), to_string(poi.status).c_str());
  if (poi.status == PoiStatus::Failed) std::printf("  reason=%s", to_string(poi.failure).c_str());
  std::printf("  support_count=%zu\n", poi.support_count);
  for (const CastSummary& c : poi.casts) {
    if (c.failure.empty()) {
      std::printf("  %s  accepted_scale=%.6f  iterations=%d  contact_fraction=%.4f\n", c.frame_id.c_str(),
                  c.accepted_scale, c.iterations, c.contact_fraction);
    } else {
      std::printf("  %s  failed=%s\n", c.frame_id.c_str(), c.failure.c_str());
    }
  }
}

int run_localize(const LocalizeArgs& a) {
  if (a.all && !a.annotations.empty()) throw UsageError("--annotation and --all are exclusive");
  Project project = open_project(a.project);
  if (a.threshold) project.cast_config.contact_threshold = *a.threshold;
  if (a.growth) project.cast_config.growth_factor = *a.growth;
  project.cast_config.validate();
  if (a.jobs < 1) throw UsageError("--jobs must be at least 1");
  for (const std::string& id : a.annotations) {
    if (!project.find_annotation(id)) throw UsageError("unknown annotation '" + id + "'");
  }

  const TriMesh mesh = load_project_mesh(project);
  const std::vector<PoiInstance> pois = localize_project(project, a.annotations, mesh, a.jobs);
  project.updated_at = utc_now_iso8601();
  persist_project(project);

  if (a.json) {
    nlohmann::json out = nlohmann::json::array();
    for (const PoiInstance& poi : pois) out.push_back(to_json(poi));
    std::cout << out.dump(2) << "\n";
  } else {
    for (const PoiInstance& poi : pois) print_poi(poi);
  }
  std::cout.flush();
  bool failed = false;
  for (const PoiInstance& poi : pois) {
    if (poi.status != PoiStatus::Failed) continue;
    failed = true;
    std::cerr << "error: " << poi.id << ": " << to_string(poi.failure);
    for (const CastSummary& c : poi.casts) {
      if (!c.failure.empty()) std::cerr << "; " << c.frame_id << " " << c.failure;
    }
    std::cerr << "\n";
  }
  return failed ? kExitFailedAnnotation : 0;
}

// Export ------------------------------------------------------------------

int run_export(const std::string& project_path, const std::string& out) {
  const Project project = load_project(project_path);
  const PoiReport report = build_poi_report(project);
  write_poi_report(report, out);
  std::cout << "wrote " << report.pois.size() << " POIs to " << out << " (success rate "
            << report.summary["success_rate_text"].get<std::string>() << ")\n";
  return 0;
}

// Serve -------------------------------------------------------------------

struct ServeArgs {
  std::vector<std::string> projects;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string provider;
  std::optional<int> workers;
};

int run_serve(const ServeArgs& a) {
  ServiceOptions options;
  for (const std::string& p : a.projects) options.projects.emplace_back(p);
  const fs::path first = fs::is_directory(a.projects.front()) ? fs::path(a.projects.front())
                                                              : fs::path(a.projects.front()).parent_path();
  const ServiceSettings settings = service_settings(load_settings(first / kConfigName));
  const std::string provider = a.provider.empty() ? settings.provider : a.provider;
  options.provider_url = provider == "fallback" ? std::string() : provider;
  options.workers = a.workers.value_or(settings.workers);
  Service service(options);
  std::cout << "serving " << a.projects.size() << " project(s) on http://" << a.host << ":" << a.port
            << " with " << (options.provider_url.empty() ? "fallback segmenter" : options.provider_url)
            << std::endl;
  service.listen(a.host, a.port);
  return 0;
}

// Synth -------------------------------------------------------------------

int run_make_fixture(const std::string& dir, const FixtureOptions& options) {
  const Fixture fixture = write_fixture(dir, options);
  std::cout << "fixture written to " << dir << ": " << fixture.project.frames.size() << " frames, "
            << fixture.scene.removed_cells.size() << " mesh cells removed, hidden scale "
            << options.hidden_scale << "\n";
  return 0;
}

int run_score(const std::string& project_path, const std::string& truth, const std::string& format,
              const std::string& out) {
  const Project project = load_project(project_path);
  const std::vector<ScoreRow> rows = score_project(project, load_truth(truth));
  const std::string text = format == "json" ? score_json(rows).dump(2) + "\n" : score_csv(rows);
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!(f << text)) throw Error(ErrorCode::IoError, "cannot write " + out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FlyMeThrough localization back end"};
  app.require_subcommand(1);

  InitArgs init;
  auto* init_cmd = app.add_subcommand("init", "Create a project from a mesh and frames");
  init_cmd->add_option("dir", init.dir, "Project directory")->required();
  init_cmd->add_option("--mesh", init.mesh, "Mesh file (PLY or OBJ)")->required();
  init_cmd->add_option("--frames", init.frames, "Directory of PNG frames")->required();
  init_cmd->add_option("--colmap", init.colmap, "COLMAP text model directory");
  init_cmd->add_option("--depths", init.depths, "Directory of depth maps (PFM or 16-bit PNG)");
  init_cmd->add_flag("--axis-flip", init.options.axis_flip, "Swap the mesh Y and Z axes");
  init_cmd->add_option("--fps", init.options.fps, "Frame rate for timestamps")->check(CLI::PositiveNumber);
  init_cmd->add_option("--name", init.options.name, "Project id (defaults to the directory name)");

  LocalizeArgs loc;
  auto* loc_cmd = app.add_subcommand("localize", "Cast annotations into 3D boxes");
  loc_cmd->add_option("project", loc.project, "Project directory")->required();
  loc_cmd->add_option("--annotation", loc.annotations, "Annotation id (repeatable)");
  loc_cmd->add_flag("--all", loc.all, "All annotations (the default)");
  loc_cmd->add_option("--threshold", loc.threshold, "Contact threshold");
  loc_cmd->add_option("--growth", loc.growth, "Scale growth factor");
  loc_cmd->add_option("--jobs", loc.jobs, "Worker threads");
  loc_cmd->add_flag("--json", loc.json, "Print POIs as JSON");

  std::string export_project, export_out;
  auto* export_cmd = app.add_subcommand("export", "Write pois.json, summary.json and pois.obj");
  export_cmd->add_option("project", export_project, "Project directory")->required();
  export_cmd->add_option("--out", export_out, "Output directory")->required();

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the REST service");
  serve_cmd->add_option("project", serve.projects, "Project directories")->required();
  serve_cmd->add_option("--port", serve.port, "Port");
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--provider", serve.provider, "Segmentation provider URL or 'fallback'");
  serve_cmd->add_option("--workers", serve.workers, "Job worker threads");

  auto* synth_cmd = app.add_subcommand("synth", "Synthetic fixtures");
  synth_cmd->require_subcommand(1);
  std::string fixture_dir;
  FixtureOptions fixture;
  bool no_annotate = false;
  auto* make_cmd = synth_cmd->add_subcommand("make-fixture", "Write a synthetic project");
  make_cmd->add_option("dir", fixture_dir, "Output directory")->required();
  make_cmd->add_option("--hidden-scale", fixture.hidden_scale, "Depth scale factor")->check(CLI::PositiveNumber);
  make_cmd->add_option("--holes", fixture.holes, "Fraction of mesh cells removed")->check(CLI::Range(0.0, 0.95));
  make_cmd->add_option("--seed", fixture.seed, "Hole selection seed");
  make_cmd->add_option("--pose-missing", fixture.pose_missing, "Frame indices left out of the COLMAP model");
  make_cmd->add_flag("--no-annotate", no_annotate, "Skip the seeded annotation");

  std::string score_project_path, score_truth, score_format = "csv", score_out;
  auto* score_cmd = synth_cmd->add_subcommand("score", "Score POIs against fixture truth");
  score_cmd->add_option("project", score_project_path, "Project directory")->required();
  score_cmd->add_option("--truth", score_truth, "Fixture directory")->required();
  score_cmd->add_option("--format", score_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  score_cmd->add_option("--out", score_out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*init_cmd) return run_init(init);
    if (*loc_cmd) return run_localize(loc);
    if (*export_cmd) return run_export(export_project, export_out);
    if (*serve_cmd) return run_serve(serve);
    if (*make_cmd) {
      fixture.annotate = !no_annotate;
      return run_make_fixture(fixture_dir, fixture);
    }
    if (*score_cmd) return run_score(score_project_path, score_truth, score_format, score_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
