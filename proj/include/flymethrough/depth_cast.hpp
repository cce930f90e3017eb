#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flymethrough/mesh.hpp"
#include "flymethrough/projection.hpp"

namespace flymethrough {

/// Parameters of the unified cloud cast. Scale bounds left unset are derived
/// from each cloud (see resolve_scale_bounds).
struct CastConfig {
  double growth_factor = 1.01;
  double contact_threshold = 0.22;
  /// Contact radius as a fraction of the mesh bounding-box diagonal.
  double contact_tolerance = 0.002;
  std::optional<double> initial_scale;
  std::optional<double> max_scale;
  std::size_t downsample_min = 200;
  std::size_t downsample_max = 2000;

  void validate() const;
  bool operator==(const CastConfig&) const = default;
};

struct CastResult {
  std::vector<WorldPoint> contact_points;
  double accepted_scale = 0.0;
  int iterations = 0;
  double contact_fraction = 0.0;
  double initial_scale = 0.0;
  std::string frame_id;
};

struct ScaleBounds {
  double initial = 0.0;
  double max = 0.0;
};

/// Number of points adaptive_downsample aims to keep for a mask of this size.
std::size_t downsample_target(std::size_t source_pixel_count, const CastConfig& config);

/// Voxel-grid subsample keeping about downsample_target() points, one per
/// occupied voxel (the point nearest the voxel center). The per-axis extreme
/// points are always retained so the axis-aligned bounds are unchanged.
/// Output keeps the input's point order.
SegmentCloud adaptive_downsample(const SegmentCloud& cloud, const CastConfig& config);

/// Points scaled about the camera center: c + s (p - c).
std::vector<WorldPoint> scale_cloud(const SegmentCloud& cloud, double scale);

/// Initial scale puts the 95th-percentile camera distance at 1% of the scene
/// diagonal; max scale is where the 5th-percentile distance reaches the diagonal.
ScaleBounds resolve_scale_bounds(const SegmentCloud& cloud, double scene_diagonal,
                                 const CastConfig& config);

/// Fraction of scaled points lying within tolerance_abs of the mesh.
double contact_fraction(const TriMesh& mesh, const SegmentCloud& cloud, double scale,
                        double tolerance_abs);

/// Grows the cloud by growth_factor per iteration from the initial scale and
/// returns the first scale whose contact fraction meets the threshold.
/// Throws NoContact once the scale passes the maximum, EmptyCloud for an
/// empty cloud, EmptyMesh for an empty mesh.
CastResult cast_cloud(const TriMesh& mesh, const SegmentCloud& cloud, const CastConfig& config);

}  // namespace flymethrough
