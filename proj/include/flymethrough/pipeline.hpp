#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flymethrough/project.hpp"

namespace flymethrough {

using ProgressFn = std::function<void(double fraction)>;

/// Loads the project mesh, applying the recorded axis flip.
TriMesh load_project_mesh(const Project& project);

/// Runs mask -> cloud -> downsample -> cast for every mask of the
/// annotation and extracts the POI box. Never throws for data problems;
/// they end up as a failed POI with the reason and per-frame summaries.
/// An anchor frame without a pose fails with MissingPose before any work.
PoiInstance localize_annotation(const Project& project, const AnnotationRecord& annotation,
                                const TriMesh& mesh, const ProgressFn& progress = {});

/// Localizes the given annotations (all when ids is empty) using up to jobs
/// threads. Results are ordered by annotation id and replace same-id POIs
/// in project.pois, which stays sorted by id. Throws NotFound for an
/// unknown id.
std::vector<PoiInstance> localize_project(Project& project, const std::vector<std::string>& ids,
                                          const TriMesh& mesh, int jobs = 1);

/// Inserts or replaces by id, keeping the list sorted.
void upsert_poi(std::vector<PoiInstance>& pois, PoiInstance poi);

}  // namespace flymethrough
