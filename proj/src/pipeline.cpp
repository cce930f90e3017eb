#include "flymethrough/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

namespace flymethrough {

namespace {

FailureReason reason_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCloud:
    case ErrorCode::EmptyInput: return FailureReason::EmptyCloud;
    case ErrorCode::NoContact: return FailureReason::NoContact;
    default: return FailureReason::MissingDepth;
  }
}

// When no frame produced a cast, the most specific per-frame failure wins.
FailureReason overall_failure(const std::vector<CastSummary>& casts) {
  const FailureReason order[] = {FailureReason::NoContact, FailureReason::EmptyCloud,
                                 FailureReason::MissingDepth, FailureReason::MissingPose};
  for (FailureReason r : order) {
    for (const CastSummary& c : casts) {
      if (c.failure == to_string(r)) return r;
    }
  }
  return FailureReason::NoResults;
}

}  // namespace

TriMesh load_project_mesh(const Project& project) {
  return load_mesh(project.resolve(project.mesh_path), project.axis_flip);
}

PoiInstance localize_annotation(const Project& project, const AnnotationRecord& annotation,
                                const TriMesh& mesh, const ProgressFn& progress) {
  const AnnotationSession& session = annotation.session;
  PoiInstance poi;
  poi.id = session.id;
  poi.label = session.label;
  poi.description = session.description;

  std::vector<std::pair<std::string, SegMask>> masks = annotation.masks;
  if (masks.empty() && session.current_mask) masks.emplace_back(session.frame_id, *session.current_mask);
  for (const auto& m : masks) poi.frame_ids.push_back(m.first);

  auto fail = [&](FailureReason reason) {
    poi.status = PoiStatus::Failed;
    poi.failure = reason;
    return poi;
  };
  const FrameRecord* anchor = project.find_frame(session.frame_id);
  if (!anchor || !anchor->pose) return fail(FailureReason::MissingPose);
  if (masks.empty()) return fail(FailureReason::MissingMask);

  const double diag = mesh.bbox_diagonal();
  std::vector<CastResult> results;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto& [frame_id, mask] = masks[i];
    CastSummary summary;
    summary.frame_id = frame_id;
    const FrameRecord* frame = project.find_frame(frame_id);
    if (!frame || !frame->pose) {
      summary.failure = to_string(FailureReason::MissingPose);
    } else if (!frame->depth_path || frame->depth_missing) {
      summary.failure = to_string(FailureReason::MissingDepth);
    } else {
      try {
        const DepthMap depth =
            load_depth_map(project.resolve(*frame->depth_path), frame->model.width(), frame->model.height());
        SegMask m = mask;
        m.set_frame_id(frame_id);
        const SegmentCloud cloud = mask_to_cloud(frame->model, *frame->pose, m, depth);
        const SegmentCloud sampled = adaptive_downsample(cloud, project.cast_config);
        CastResult r = cast_cloud(mesh, sampled, project.cast_config);
        summary.accepted_scale = r.accepted_scale;
        summary.iterations = r.iterations;
        summary.contact_fraction = r.contact_fraction;
        summary.contact_points = r.contact_points.size();
        results.push_back(std::move(r));
      } catch (const Error& e) {
        summary.failure = to_string(reason_for(e.code()));
      }
    }
    poi.casts.push_back(summary);
    if (progress) progress(static_cast<double>(i + 1) / static_cast<double>(masks.size() + 1));
  }

  if (progress) progress(1.0);
  if (results.empty()) return fail(overall_failure(poi.casts));
  return extract_poi(std::move(poi), results, project.cluster_config, diag);
}

void upsert_poi(std::vector<PoiInstance>& pois, PoiInstance poi) {
  auto it = std::lower_bound(pois.begin(), pois.end(), poi.id,
                             [](const PoiInstance& p, const std::string& id) { return p.id < id; });
  if (it != pois.end() && it->id == poi.id) {
    *it = std::move(poi);
  } else {
    pois.insert(it, std::move(poi));
  }
}

std::vector<PoiInstance> localize_project(Project& project, const std::vector<std::string>& ids,
                                          const TriMesh& mesh, int jobs) {
  std::vector<const AnnotationRecord*> todo;
  if (ids.empty()) {
    for (const AnnotationRecord& a : project.annotations) todo.push_back(&a);
  } else {
    for (const std::string& id : ids) {
      const AnnotationRecord* a = project.find_annotation(id);
      if (!a) throw Error(ErrorCode::NotFound, "no annotation with id '" + id + "'");
      todo.push_back(a);
    }
  }
  std::sort(todo.begin(), todo.end(),
            [](const AnnotationRecord* a, const AnnotationRecord* b) { return a->session.id < b->session.id; });
  todo.erase(std::unique(todo.begin(), todo.end()), todo.end());

  std::vector<PoiInstance> results(todo.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      results[i] = localize_annotation(project, *todo[i], mesh);
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(todo.size(), 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const PoiInstance& p : results) upsert_poi(project.pois, p);
  return results;
}

}  // namespace flymethrough
