#include "flymethrough/service.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "flymethrough/mask_rle.hpp"
#include "flymethrough/pipeline.hpp"
#include "flymethrough/project.hpp"
#include "flymethrough/remote_provider.hpp"

namespace flymethrough {

using nlohmann::json;

namespace {

enum class JobKind { Propagate, Localize };
enum class JobState { Queued, Running, Done, Failed };

const char* to_string(JobKind k) { return k == JobKind::Propagate ? "propagate" : "localize"; }

const char* to_string(JobState s) {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "queued";
}

struct Job {
  std::string id;
  JobKind kind = JobKind::Propagate;
  std::string project_id;
  std::string session_id;
  JobState state = JobState::Queued;
  std::string reason;
  std::string created_at;
  std::string started_at;
  std::string finished_at;
  double progress = 0.0;
  std::string next_job_id;
};

json job_json(const Job& j) {
  auto opt = [](const std::string& s) { return s.empty() ? json(nullptr) : json(s); };
  return {{"id", j.id},
          {"kind", to_string(j.kind)},
          {"project_id", j.project_id},
          {"session_id", j.session_id},
          {"poi_id", j.kind == JobKind::Localize ? json(j.session_id) : json(nullptr)},
          {"state", to_string(j.state)},
          {"reason", opt(j.reason)},
          {"created_at", j.created_at},
          {"started_at", opt(j.started_at)},
          {"finished_at", opt(j.finished_at)},
          {"progress", j.progress},
          {"next_job_id", opt(j.next_job_id)}};
}

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::InvalidPrompt:
    case ErrorCode::NoPositivePrompt:
    case ErrorCode::ParseError:
    case ErrorCode::InvalidArgument: return 422;
    case ErrorCode::ProviderUnavailable: return 503;
    default: return 500;
  }
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  try {
    json body = json::parse(req.body.empty() ? std::string("{}") : req.body);
    if (!body.is_object()) throw HttpError{422, "InvalidArgument", "request body must be a JSON object"};
    return body;
  } catch (const json::exception& e) {
    throw HttpError{422, "ParseError", std::string("malformed JSON: ") + e.what()};
  }
}

json bbox_json(const SegMask& mask) {
  int u0 = mask.width(), v0 = mask.height(), u1 = -1, v1 = -1;
  for (int v = 0; v < mask.height(); ++v) {
    for (int u = 0; u < mask.width(); ++u) {
      if (!mask.at(u, v)) continue;
      u0 = std::min(u0, u);
      v0 = std::min(v0, v);
      u1 = std::max(u1, u);
      v1 = std::max(v1, v);
    }
  }
  if (u1 < 0) return nullptr;
  return {u0, v0, u1 + 1, v1 + 1};
}

}  // namespace

struct Service::Impl {
  struct ProjectState {
    std::mutex mu;  // single writer for the manifest
    Project project;
    std::mutex mesh_mu;
    std::shared_ptr<const TriMesh> mesh;
  };

  ServiceOptions options;
  std::shared_ptr<SegmentationProvider> provider;
  std::map<std::string, std::unique_ptr<ProjectState>> projects;

  std::mutex jobs_mu;
  std::condition_variable jobs_cv;
  std::map<std::string, Job> jobs;
  std::map<std::string, std::string> confirm_jobs;  // session id -> propagate job id
  std::deque<std::string> queue;
  std::size_t job_counter = 0;
  bool stopping = false;
  std::vector<std::thread> workers;

  httplib::Server server;
  std::thread listener;

  Impl(ServiceOptions o, std::shared_ptr<SegmentationProvider> p) : options(std::move(o)), provider(std::move(p)) {
    if (!provider && !options.provider_url.empty() && options.provider_url != "fallback") {
      provider = std::make_shared<RemoteProvider>(RemoteConfig{options.provider_url});
    }
    for (const auto& path : options.projects) {
      auto state = std::make_unique<ProjectState>();
      state->project = load_project(path);
      const std::string id = state->project.id;
      if (projects.count(id)) throw Error(ErrorCode::InvalidArgument, "duplicate project id " + id);
      projects.emplace(id, std::move(state));
    }
    for (int i = 0; i < std::max(1, options.workers); ++i) workers.emplace_back([this] { worker_loop(); });
    routes();
  }

  ~Impl() {
    server.stop();
    if (listener.joinable()) listener.join();
    {
      std::lock_guard lock(jobs_mu);
      stopping = true;
    }
    jobs_cv.notify_all();
    for (auto& w : workers) w.join();
  }

  // Lookups -----------------------------------------------------------------

  ProjectState& project_state(const std::string& id) {
    auto it = projects.find(id);
    if (it == projects.end()) throw HttpError{404, "NotFound", "unknown project '" + id + "'"};
    return *it->second;
  }

  // Returns the project holding the session; the caller locks it.
  ProjectState& session_owner(const std::string& session_id) {
    for (auto& [id, state] : projects) {
      std::lock_guard lock(state->mu);
      if (state->project.find_annotation(session_id)) return *state;
    }
    throw HttpError{404, "NotFound", "unknown session '" + session_id + "'"};
  }

  static AnnotationRecord& annotation(Project& p, const std::string& session_id) {
    AnnotationRecord* a = p.find_annotation(session_id);
    if (!a) throw HttpError{404, "NotFound", "unknown session '" + session_id + "'"};
    return *a;
  }

  std::shared_ptr<const TriMesh> mesh_for(ProjectState& state, const Project& snapshot) {
    std::lock_guard lock(state.mesh_mu);
    if (!state.mesh) state.mesh = std::make_shared<const TriMesh>(load_project_mesh(snapshot));
    return state.mesh;
  }

  SegmentationProvider& provider_for(const Project& p, std::unique_ptr<FallbackSegmenter>& local) {
    if (provider) return *provider;
    local = std::make_unique<FallbackSegmenter>(p.segmenter_config);
    return *local;
  }

  static FrameInput frame_input(const Project& p, const FrameRecord& f) {
    return {f.frame_id, p.resolve(f.image_path), nullptr};
  }

  static void commit(Project& p) {
    p.updated_at = utc_now_iso8601();
    persist_project(p);
  }

  json session_json(const std::string& project_id, const AnnotationRecord& a) {
    const AnnotationSession& s = a.session;
    json prompts = json::array();
    for (const PromptPoint& p : s.prompts) {
      prompts.push_back({{"u", p.pixel.u}, {"v", p.pixel.v}, {"polarity", flymethrough::to_string(p.polarity)}});
    }
    json masks = json::array();
    for (const auto& [frame_id, mask] : a.masks) {
      masks.push_back({{"frame_id", frame_id}, {"area", mask.count()}, {"bbox", bbox_json(mask)}});
    }
    json out = {{"id", s.id},
                {"project_id", project_id},
                {"frame_id", s.frame_id},
                {"label", s.label},
                {"description", s.description},
                {"state", flymethrough::to_string(s.state)},
                {"prompts", prompts},
                {"mask_rle", s.current_mask ? rle_to_json(*s.current_mask) : json(nullptr)},
                {"width", s.current_mask ? json(s.current_mask->width()) : json(nullptr)},
                {"height", s.current_mask ? json(s.current_mask->height()) : json(nullptr)},
                {"masks", masks},
                {"termination_frame", a.termination_frame ? json(*a.termination_frame) : json(nullptr)},
                {"termination_reason",
                 a.termination_reason ? json(flymethrough::to_string(*a.termination_reason)) : json(nullptr)}};
    std::lock_guard lock(jobs_mu);
    auto it = confirm_jobs.find(s.id);
    out["job_id"] = it == confirm_jobs.end() ? json(nullptr) : json(it->second);
    return out;
  }

  // Jobs --------------------------------------------------------------------

  std::string enqueue(JobKind kind, const std::string& project_id, const std::string& session_id) {
    std::lock_guard lock(jobs_mu);
    Job job;
    job.id = "job-" + std::to_string(++job_counter);
    job.kind = kind;
    job.project_id = project_id;
    job.session_id = session_id;
    job.created_at = utc_now_iso8601();
    jobs.emplace(job.id, job);
    queue.push_back(job.id);
    jobs_cv.notify_one();
    return job.id;
  }

  void update_job(const std::string& id, const std::function<void(Job&)>& fn) {
    std::lock_guard lock(jobs_mu);
    fn(jobs.at(id));
  }

  void finish_job(const std::string& id, bool ok, const std::string& reason, const std::string& next = {}) {
    update_job(id, [&](Job& j) {
      j.state = ok ? JobState::Done : JobState::Failed;
      j.reason = reason;
      j.next_job_id = next;
      j.progress = 1.0;
      j.finished_at = utc_now_iso8601();
    });
  }

  void worker_loop() {
    for (;;) {
      Job job;
      {
        std::unique_lock lock(jobs_mu);
        jobs_cv.wait(lock, [this] { return stopping || !queue.empty(); });
        if (stopping) return;
        const std::string id = queue.front();
        queue.pop_front();
        Job& j = jobs.at(id);
        j.state = JobState::Running;
        j.started_at = utc_now_iso8601();
        job = j;
      }
      try {
        if (job.kind == JobKind::Propagate) {
          run_propagate(job);
        } else {
          run_localize(job);
        }
      } catch (const std::exception& e) {
        finish_job(job.id, false, e.what());
      } catch (const HttpError& e) {
        finish_job(job.id, false, e.message);
      }
    }
  }

  void run_propagate(const Job& job) {
    ProjectState& state = project_state(job.project_id);
    AnnotationSession session;
    std::vector<FrameInput> frames;
    Project config_snapshot;
    {
      std::lock_guard lock(state.mu);
      const Project& p = state.project;
      session = annotation(state.project, job.session_id).session;
      const auto start = p.frame_index(session.frame_id);
      if (!start) throw Error(ErrorCode::NotFound, "anchor frame " + session.frame_id + " not in project");
      for (std::size_t i = *start; i < p.frames.size(); ++i) frames.push_back(frame_input(p, p.frames[i]));
      config_snapshot.segmenter_config = p.segmenter_config;
    }
    std::unique_ptr<FallbackSegmenter> local;
    const PropagationResult result = propagate(session, frames, provider_for(config_snapshot, local));

    std::string next;
    {
      std::lock_guard lock(state.mu);
      AnnotationRecord* a = state.project.find_annotation(job.session_id);
      if (!a) {
        finish_job(job.id, false, "session deleted");
        return;
      }
      a->masks = result.masks;
      a->termination_frame = result.termination_frame;
      a->termination_reason = result.termination_reason;
      a->session.state = result.termination_reason == TerminationReason::ProviderError ? SessionState::Failed
                                                                                       : SessionState::Propagated;
      commit(state.project);
    }
    if (result.termination_reason == TerminationReason::ProviderError) {
      finish_job(job.id, false, "providerError: " + result.detail);
      return;
    }
    next = enqueue(JobKind::Localize, job.project_id, job.session_id);
    finish_job(job.id, true, {}, next);
  }

  void run_localize(const Job& job) {
    ProjectState& state = project_state(job.project_id);
    Project snapshot;
    {
      std::lock_guard lock(state.mu);
      snapshot = state.project;
    }
    const AnnotationRecord& record = annotation(snapshot, job.session_id);
    // Anchor without a pose fails before the mesh is even loaded.
    PoiInstance poi;
    const FrameRecord* anchor = snapshot.find_frame(record.session.frame_id);
    if (!anchor || !anchor->pose) {
      poi = localize_annotation(snapshot, record, TriMesh({}, {}));
    } else {
      const auto mesh = mesh_for(state, snapshot);
      poi = localize_annotation(snapshot, record, *mesh, [&](double f) {
        update_job(job.id, [f](Job& j) { j.progress = f; });
      });
    }
    const bool ok = poi.status == PoiStatus::Cast;
    const std::string reason = ok ? std::string() : flymethrough::to_string(poi.failure);
    {
      std::lock_guard lock(state.mu);
      if (!state.project.find_annotation(job.session_id)) {
        finish_job(job.id, false, "session deleted");
        return;
      }
      upsert_poi(state.project.pois, std::move(poi));
      commit(state.project);
    }
    finish_job(job.id, ok, reason);
  }

  // Routes ------------------------------------------------------------------

  template <typename Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const HttpError& e) {
        reply(res, e.status, {{"error", e.code}, {"message", e.message}});
      } catch (const Error& e) {
        reply(res, status_for(e.code()), {{"error", std::string(flymethrough::to_string(e.code()))}, {"message", e.what()}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", "Internal"}, {"message", e.what()}});
      }
    };
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    for (auto& [id, state] : projects) {
      server.set_mount_point("/files/" + id, state->project.root.string());
    }

    server.Get("/projects", guarded([this](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (auto& [id, state] : projects) {
        std::lock_guard lock(state->mu);
        const Project& p = state->project;
        out.push_back({{"id", p.id},
                       {"name", p.name},
                       {"frame_count", p.frames.size()},
                       {"annotation_count", p.annotations.size()},
                       {"poi_count", p.pois.size()},
                       {"pose_missing", p.pose_missing()},
                       {"mesh_url", "/files/" + p.id + "/" + p.mesh_path.generic_string()},
                       {"updated_at", p.updated_at}});
      }
      reply(res, 200, out);
    }));

    server.Get(R"(/projects/([^/]+)/frames)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      ProjectState& state = project_state(req.matches[1]);
      std::lock_guard lock(state.mu);
      const Project& p = state.project;
      json out = json::array();
      for (const FrameRecord& f : p.frames) {
        out.push_back({{"frame_id", f.frame_id},
                       {"timestamp_sec", f.timestamp_sec},
                       {"image_url", "/files/" + p.id + "/" + f.image_path.generic_string()},
                       {"width", f.model.width()},
                       {"height", f.model.height()},
                       {"has_pose", f.pose.has_value()},
                       {"has_depth", f.depth_path.has_value() && !f.depth_missing}});
      }
      reply(res, 200, out);
    }));

    server.Get(R"(/projects/([^/]+)/pois)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      ProjectState& state = project_state(req.matches[1]);
      std::lock_guard lock(state.mu);
      json out = json::array();
      for (const PoiInstance& p : state.project.pois) out.push_back(to_json(p));
      reply(res, 200, out);
    }));

    server.Post(R"(/projects/([^/]+)/sessions)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string pid = req.matches[1];
      ProjectState& state = project_state(pid);
      const json body = parse_body(req);
      if (!body.contains("frame_id") || !body["frame_id"].is_string()) {
        throw HttpError{422, "InvalidArgument", "frame_id is required"};
      }
      std::lock_guard lock(state.mu);
      Project& p = state.project;
      const std::string frame_id = body["frame_id"];
      if (!p.find_frame(frame_id)) throw HttpError{404, "NotFound", "unknown frame '" + frame_id + "'"};
      AnnotationRecord record;
      AnnotationSession& s = record.session;
      std::size_t n = p.annotations.size() + 1;
      do {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "ann-%03zu", n++);
        s.id = buf;
      } while (session_exists(s.id));
      s.frame_id = frame_id;
      s.label = body.value("label", std::string());
      s.description = body.value("description", std::string());
      p.annotations.push_back(record);
      commit(p);
      reply(res, 201, session_json(pid, p.annotations.back()));
    }));

    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string sid = req.matches[1];
      ProjectState& state = session_owner(sid);
      std::lock_guard lock(state.mu);
      reply(res, 200, session_json(state.project.id, annotation(state.project, sid)));
    }));

    server.Post(R"(/sessions/([^/]+)/prompts)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string sid = req.matches[1];
      const json body = parse_body(req);
      if (!body.contains("u") || !body.contains("v") || !body["u"].is_number() || !body["v"].is_number()) {
        throw HttpError{422, "InvalidPrompt", "prompt needs numeric u and v"};
      }
      PromptPoint prompt{{body["u"].get<double>(), body["v"].get<double>()},
                         parse_polarity(body.value("polarity", std::string("positive")))};
      ProjectState& state = session_owner(sid);
      std::vector<PromptPoint> prompts;
      FrameInput frame;
      Project config_snapshot;
      {
        std::lock_guard lock(state.mu);
        const AnnotationRecord& a = annotation(state.project, sid);
        if (a.session.state != SessionState::Drafting) throw HttpError{409, "Conflict", "session is already confirmed"};
        const FrameRecord* f = state.project.find_frame(a.session.frame_id);
        prompts = a.session.prompts;
        prompts.push_back(prompt);
        validate_prompts(prompts, f->model.width(), f->model.height());
        frame = frame_input(state.project, *f);
        config_snapshot.segmenter_config = state.project.segmenter_config;
      }
      std::unique_ptr<FallbackSegmenter> local;
      SegMask mask = provider_for(config_snapshot, local).segment(frame, prompts);
      std::lock_guard lock(state.mu);
      AnnotationRecord& a = annotation(state.project, sid);
      if (a.session.state != SessionState::Drafting || a.session.prompts.size() + 1 != prompts.size()) {
        throw HttpError{409, "Conflict", "session changed while segmenting"};
      }
      a.session.prompts = prompts;
      a.session.current_mask = std::move(mask);
      commit(state.project);
      reply(res, 200, session_json(state.project.id, a));
    }));

    server.Post(R"(/sessions/([^/]+)/clear)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string sid = req.matches[1];
      ProjectState& state = session_owner(sid);
      std::lock_guard lock(state.mu);
      AnnotationRecord& a = annotation(state.project, sid);
      if (a.session.state != SessionState::Drafting) throw HttpError{409, "Conflict", "session is already confirmed"};
      a.session.prompts.clear();
      a.session.current_mask.reset();
      commit(state.project);
      reply(res, 200, session_json(state.project.id, a));
    }));

    server.Post(R"(/sessions/([^/]+)/confirm)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string sid = req.matches[1];
      ProjectState& state = session_owner(sid);
      std::lock_guard lock(state.mu);
      AnnotationRecord& a = annotation(state.project, sid);
      {
        std::lock_guard jobs_lock(jobs_mu);
        auto it = confirm_jobs.find(sid);
        if (it != confirm_jobs.end()) {
          reply(res, 200, {{"job_id", it->second}, {"session_id", sid}});
          return;
        }
      }
      if (a.session.state != SessionState::Drafting) {
        throw HttpError{409, "Conflict", "session was confirmed before this service started"};
      }
      if (!a.session.current_mask || a.session.current_mask->empty()) {
        throw HttpError{409, "Conflict", "cannot confirm an empty mask"};
      }
      a.session.state = SessionState::Confirmed;
      commit(state.project);
      const std::string job_id = enqueue(JobKind::Propagate, state.project.id, sid);
      {
        std::lock_guard jobs_lock(jobs_mu);
        confirm_jobs[sid] = job_id;
      }
      reply(res, 202, {{"job_id", job_id}, {"session_id", sid}});
    }));

    server.Delete(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string sid = req.matches[1];
      ProjectState& state = session_owner(sid);
      std::lock_guard lock(state.mu);
      Project& p = state.project;
      annotation(p, sid);
      std::erase_if(p.annotations, [&](const AnnotationRecord& a) { return a.session.id == sid; });
      std::erase_if(p.pois, [&](const PoiInstance& poi) { return poi.id == sid; });
      std::error_code ec;
      std::filesystem::remove_all(p.root / "masks" / sid, ec);
      commit(p);
      reply(res, 200, {{"deleted", sid}});
    }));

    server.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(jobs_mu);
      auto it = jobs.find(req.matches[1]);
      if (it == jobs.end()) throw HttpError{404, "NotFound", "unknown job '" + std::string(req.matches[1]) + "'"};
      reply(res, 200, job_json(it->second));
    }));
  }

  // Caller holds the lock of the project being modified.
  bool session_exists(const std::string& id) {
    for (auto& [pid, state] : projects) {
      if (state->project.find_annotation(id)) return true;
    }
    return false;
  }
};

Service::Service(ServiceOptions options) : Service(std::move(options), nullptr) {}

Service::Service(ServiceOptions options, std::shared_ptr<SegmentationProvider> provider)
    : impl_(std::make_unique<Impl>(std::move(options), std::move(provider))) {}

Service::~Service() = default;

int Service::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void Service::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
}

void Service::stop() {
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

}  // namespace flymethrough
