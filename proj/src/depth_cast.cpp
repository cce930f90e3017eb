#include "flymethrough/depth_cast.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "flymethrough/parallel.hpp"

namespace flymethrough {

namespace {

constexpr std::int64_t kMaxVoxelsPerAxis = 1 << 20;

struct VoxelGrid {
  Eigen::Vector3d origin;
  double edge = 0.0;

  std::uint64_t key(const WorldPoint& p) const {
    const Eigen::Vector3d rel = (p - origin) / edge;
    const auto ix = static_cast<std::uint64_t>(std::floor(rel.x()));
    const auto iy = static_cast<std::uint64_t>(std::floor(rel.y()));
    const auto iz = static_cast<std::uint64_t>(std::floor(rel.z()));
    return (ix << 42) | (iy << 21) | iz;
  }

  WorldPoint voxel_center(const WorldPoint& p) const {
    const Eigen::Vector3d rel = (p - origin) / edge;
    return origin + edge * (rel.array().floor() + 0.5).matrix();
  }
};

// Origin sits half a voxel below the minimum so the outermost voxels are
// centered on the cloud bounds.
VoxelGrid make_grid(const Eigen::AlignedBox3d& bounds, double edge) {
  return {bounds.min() - Eigen::Vector3d::Constant(edge / 2.0), edge};
}

std::size_t occupied_voxels(const std::vector<WorldPoint>& points, const VoxelGrid& grid) {
  std::unordered_map<std::uint64_t, char> seen;
  seen.reserve(points.size());
  for (const WorldPoint& p : points) seen.emplace(grid.key(p), 0);
  return seen.size();
}

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

}  // namespace

void CastConfig::validate() const {
  if (!(growth_factor > 1.0)) throw Error(ErrorCode::InvalidArgument, "growth_factor must exceed 1");
  if (!(contact_threshold > 0.0 && contact_threshold < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "contact_threshold must lie in (0, 1)");
  }
  if (!(contact_tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "contact_tolerance must be positive");
  if (initial_scale && !(*initial_scale > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "initial_scale must be positive");
  }
  if (initial_scale && max_scale && !(*initial_scale < *max_scale)) {
    throw Error(ErrorCode::InvalidArgument, "initial_scale must be below max_scale");
  }
  if (downsample_min == 0 || downsample_min > downsample_max) {
    throw Error(ErrorCode::InvalidArgument, "downsample bounds invalid");
  }
}

std::size_t downsample_target(std::size_t source_pixel_count, const CastConfig& config) {
  const double raw = std::round(std::sqrt(static_cast<double>(source_pixel_count)) * 4.0);
  return std::clamp(static_cast<std::size_t>(raw), config.downsample_min, config.downsample_max);
}

SegmentCloud adaptive_downsample(const SegmentCloud& cloud, const CastConfig& config) {
  const std::size_t target = downsample_target(cloud.source_pixel_count, config);
  const auto& points = cloud.points;
  if (points.size() <= target) return cloud;

  Eigen::AlignedBox3d bounds;
  bounds.setEmpty();
  for (const WorldPoint& p : points) bounds.extend(p);
  const double extent = std::max(bounds.diagonal().maxCoeff(), 1e-12);

  // Bisection on log(edge): occupied count falls as the edge grows.
  double lo = extent / static_cast<double>(kMaxVoxelsPerAxis / 2);
  double hi = 2.0 * extent;
  double best_edge = hi;
  std::size_t best_count = 1;
  auto better = [&](std::size_t count) {
    const bool in_bounds = count >= config.downsample_min && count <= config.downsample_max;
    const bool best_in_bounds =
        best_count >= config.downsample_min && best_count <= config.downsample_max;
    if (in_bounds != best_in_bounds) return in_bounds;
    const auto diff = [&](std::size_t c) {
      return c > target ? c - target : target - c;
    };
    return diff(count) < diff(best_count);
  };
  for (int iter = 0; iter < 40; ++iter) {
    const double edge = std::sqrt(lo * hi);
    const std::size_t count = occupied_voxels(points, make_grid(bounds, edge));
    if (better(count)) {
      best_edge = edge;
      best_count = count;
    }
    if (count == target) break;
    if (count > target) {
      lo = edge;
    } else {
      hi = edge;
    }
    if (static_cast<double>(best_count) >= 0.98 * static_cast<double>(target) &&
        static_cast<double>(best_count) <= 1.02 * static_cast<double>(target)) {
      break;
    }
  }

  const VoxelGrid grid = make_grid(bounds, best_edge);
  std::unordered_map<std::uint64_t, std::size_t> representative;
  representative.reserve(best_count * 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::uint64_t key = grid.key(points[i]);
    auto [it, inserted] = representative.emplace(key, i);
    if (inserted) continue;
    const WorldPoint center = grid.voxel_center(points[i]);
    if ((points[i] - center).squaredNorm() < (points[it->second] - center).squaredNorm()) {
      it->second = i;
    }
  }

  std::vector<std::size_t> selected;
  selected.reserve(representative.size() + 6);
  for (const auto& [key, idx] : representative) selected.push_back(idx);

  // Pin the axis extremes; an extreme replaces its voxel's representative.
  std::vector<std::size_t> extremes;
  for (int axis = 0; axis < 3; ++axis) {
    std::size_t lo_idx = 0, hi_idx = 0;
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (points[i][axis] < points[lo_idx][axis]) lo_idx = i;
      if (points[i][axis] > points[hi_idx][axis]) hi_idx = i;
    }
    extremes.push_back(lo_idx);
    extremes.push_back(hi_idx);
  }
  std::unordered_map<std::uint64_t, bool> pinned;
  for (std::size_t idx : extremes) {
    const std::uint64_t key = grid.key(points[idx]);
    auto rep = representative.find(key);
    if (rep->second == idx) {
      pinned[key] = true;
      continue;
    }
    if (!pinned[key]) {
      std::replace(selected.begin(), selected.end(), rep->second, idx);
      rep->second = idx;
      pinned[key] = true;
    } else if (std::find(selected.begin(), selected.end(), idx) == selected.end()) {
      selected.push_back(idx);
    }
  }

  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());

  SegmentCloud out;
  out.camera_center = cloud.camera_center;
  out.frame_id = cloud.frame_id;
  out.source_pixel_count = cloud.source_pixel_count;
  out.points.reserve(selected.size());
  const bool has_pixels = cloud.pixels.size() == points.size();
  for (std::size_t idx : selected) {
    out.points.push_back(points[idx]);
    if (has_pixels) out.pixels.push_back(cloud.pixels[idx]);
  }
  return out;
}

std::vector<WorldPoint> scale_cloud(const SegmentCloud& cloud, double scale) {
  std::vector<WorldPoint> out;
  out.reserve(cloud.points.size());
  for (const WorldPoint& p : cloud.points) {
    out.push_back(cloud.camera_center + scale * (p - cloud.camera_center));
  }
  return out;
}

ScaleBounds resolve_scale_bounds(const SegmentCloud& cloud, double scene_diagonal,
                                 const CastConfig& config) {
  if (cloud.points.empty()) throw Error(ErrorCode::EmptyCloud, "cloud has no points");
  std::vector<double> distances;
  distances.reserve(cloud.points.size());
  for (const WorldPoint& p : cloud.points) distances.push_back((p - cloud.camera_center).norm());
  ScaleBounds bounds;
  bounds.initial = config.initial_scale.value_or(0.01 * scene_diagonal / percentile(distances, 0.95));
  bounds.max = config.max_scale.value_or(scene_diagonal / percentile(distances, 0.05));
  if (!(bounds.initial > 0.0) || !(bounds.initial < bounds.max) || !std::isfinite(bounds.max)) {
    throw Error(ErrorCode::InvalidArgument, "scale search bounds are empty");
  }
  return bounds;
}

double contact_fraction(const TriMesh& mesh, const SegmentCloud& cloud, double scale,
                        double tolerance_abs) {
  if (cloud.points.empty()) throw Error(ErrorCode::EmptyCloud, "cloud has no points");
  std::vector<std::uint8_t> hit(cloud.points.size(), 0);
  parallel_for(cloud.points.size(), [&](std::size_t i) {
    const WorldPoint q = cloud.camera_center + scale * (cloud.points[i] - cloud.camera_center);
    hit[i] = mesh.within(q, tolerance_abs) ? 1 : 0;
  });
  const auto n = std::accumulate(hit.begin(), hit.end(), std::size_t{0});
  return static_cast<double>(n) / static_cast<double>(cloud.points.size());
}

CastResult cast_cloud(const TriMesh& mesh, const SegmentCloud& cloud, const CastConfig& config) {
  config.validate();
  if (cloud.points.empty()) throw Error(ErrorCode::EmptyCloud, "cloud has no points");
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no triangles");

  const double diagonal = mesh.bbox_diagonal();
  const double tolerance = config.contact_tolerance * diagonal;
  const ScaleBounds bounds = resolve_scale_bounds(cloud, diagonal, config);

  const std::size_t n = cloud.points.size();
  std::vector<std::uint8_t> hit(n, 0);
  for (int k = 0;; ++k) {
    const double scale = bounds.initial * std::pow(config.growth_factor, k);
    if (scale > bounds.max) {
      throw Error(ErrorCode::NoContact, "frame " + cloud.frame_id + ": no contact up to scale " +
                                            std::to_string(bounds.max));
    }
    parallel_for(n, [&](std::size_t i) {
      const WorldPoint q = cloud.camera_center + scale * (cloud.points[i] - cloud.camera_center);
      hit[i] = mesh.within(q, tolerance) ? 1 : 0;
    });
    const auto touching = std::accumulate(hit.begin(), hit.end(), std::size_t{0});
    const double fraction = static_cast<double>(touching) / static_cast<double>(n);
    if (fraction >= config.contact_threshold) {
      CastResult result;
      result.accepted_scale = scale;
      result.iterations = k;
      result.contact_fraction = fraction;
      result.initial_scale = bounds.initial;
      result.frame_id = cloud.frame_id;
      result.contact_points.reserve(touching);
      for (std::size_t i = 0; i < n; ++i) {
        if (hit[i]) {
          result.contact_points.push_back(cloud.camera_center +
                                          scale * (cloud.points[i] - cloud.camera_center));
        }
      }
      return result;
    }
  }
}

}  // namespace flymethrough
