#pragma once

// Slow, independent reference implementations used as test oracles. None of
// these call into the production geometry code beyond the shared types.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "flymethrough/geometry.hpp"
#include "flymethrough/mesh.hpp"

namespace oracle {

using flymethrough::WorldPoint;

/// Point-triangle distance via plane projection and the three edge segments.
double point_triangle_distance(const WorldPoint& p, const WorldPoint& a, const WorldPoint& b,
                               const WorldPoint& c);

/// Minimum over every triangle, no acceleration.
double brute_mesh_distance(const std::vector<WorldPoint>& vertices,
                           const std::vector<flymethrough::Triangle>& triangles, const WorldPoint& p);

/// Textbook DBSCAN by breadth-first expansion over an O(n^2) distance table.
/// Neighborhoods are closed (d <= radius) and include the point itself.
/// Border points join the cluster of their nearest core neighbor, ties to
/// the lexicographically smallest core point. Returns a label per point,
/// -1 for noise; label values are arbitrary.
std::vector<int> brute_dbscan(const std::vector<WorldPoint>& points, double radius, std::size_t min_pts);

/// Partition as sorted member lists, sorted; noise listed separately.
struct Partition {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> noise;
  bool operator==(const Partition&) const = default;
};
Partition canonical_partition(const std::vector<int>& labels);

/// Nearest ray/triangle hit (Moller-Trumbore) over all triangles.
std::optional<WorldPoint> raycast(const std::vector<WorldPoint>& vertices,
                                  const std::vector<flymethrough::Triangle>& triangles,
                                  const WorldPoint& origin, const Eigen::Vector3d& direction);

/// Random DBSCAN instance: a few Gaussian blobs plus uniform clutter in the
/// unit cube, at most max_points points in total.
std::vector<WorldPoint> random_cluster_instance(std::mt19937_64& rng, std::size_t max_points);

/// Random rotation from a normalized Gaussian quaternion.
flymethrough::Mat3 random_rotation(std::mt19937_64& rng);

/// 2D convex hull containment for the silhouette of projected box corners.
bool inside_convex_hull(std::vector<Eigen::Vector2d> points, const Eigen::Vector2d& q);

/// A loopback TCP port that was free a moment ago and has no listener.
int closed_port();

/// Fresh scratch directory under the build tree's temp area.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace oracle
