#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flymethrough/depth_cast.hpp"
#include "flymethrough/geometry.hpp"

namespace flymethrough {

enum class ClusterSelection { Largest, All };

struct ClusterConfig {
  /// Neighborhood radius as a fraction of the scene diagonal.
  double epsilon = 0.01;
  std::size_t min_pts = 8;
  ClusterSelection selection = ClusterSelection::Largest;

  void validate() const;
  bool operator==(const ClusterConfig&) const = default;
};

enum class PoiStatus { Pending, Cast, Failed };

enum class FailureReason {
  None,
  NoResults,
  MissingPose,
  MissingDepth,
  MissingMask,
  EmptyCloud,
  NoContact,
  AllNoise,
};

std::string to_string(PoiStatus status);
std::string to_string(FailureReason reason);
PoiStatus parse_poi_status(const std::string& text);
FailureReason parse_failure_reason(const std::string& text);

/// Per-frame cast summary kept alongside a POI for provenance.
struct CastSummary {
  std::string frame_id;
  double accepted_scale = 0.0;
  int iterations = 0;
  double contact_fraction = 0.0;
  std::size_t contact_points = 0;
  std::string failure;  // empty on success
};

struct PoiInstance {
  std::string id;
  std::string label;
  std::string description;
  std::vector<std::string> frame_ids;
  std::optional<OrientedBox> box;
  std::size_t support_count = 0;
  PoiStatus status = PoiStatus::Pending;
  FailureReason failure = FailureReason::None;

  std::vector<CastSummary> casts;
  std::vector<std::size_t> cluster_sizes;
  std::size_t noise_count = 0;
};

/// DBSCAN labeling. Clusters are sorted by size (descending), ties broken by
/// the lexicographically smallest member point; members and noise are sorted
/// by input index. labels[i] is the cluster rank or -1 for noise.
struct Clustering {
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> noise;
  std::vector<int> labels;
};

/// Concatenates contact points ordered by frame id, then point order.
std::vector<WorldPoint> aggregate_casts(const std::vector<CastResult>& results);

/// DBSCAN with radius epsilon * scene_diagonal. Core components are the
/// connected components of the core-core neighbor graph; a border point joins
/// the component of its nearest core neighbor, so the labeling does not
/// depend on input order.
Clustering dbscan(const std::vector<WorldPoint>& points, const ClusterConfig& config,
                  double scene_diagonal);

/// PCA approximation of the minimum-volume box. Axes are covariance
/// eigenvectors by descending eigenvalue, right-handed. Within tied
/// eigenvalues the basis closest to the world axes is used. Extents are
/// floored at 1e-4 * scene_diagonal.
OrientedBox pca_box(const std::vector<WorldPoint>& points, double scene_diagonal);

/// aggregate -> dbscan -> cluster selection -> pca_box. Failures are reported
/// through the returned status rather than thrown.
PoiInstance extract_poi(PoiInstance annotation, const std::vector<CastResult>& results,
                        const ClusterConfig& config, double scene_diagonal);

}  // namespace flymethrough
