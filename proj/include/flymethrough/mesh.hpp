#pragma once

#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "flymethrough/geometry.hpp"

namespace flymethrough {

using Triangle = std::array<std::uint32_t, 3>;

/// Immutable triangle mesh with an axis-aligned BVH built at construction.
///
/// Construction strips non-finite vertices (and every triangle touching
/// them), drops zero-area triangles, and rejects out-of-range indices.
/// All queries are const and safe to run concurrently.
class TriMesh {
public:
  TriMesh() = default;
  TriMesh(std::vector<WorldPoint> vertices, std::vector<Triangle> triangles);

  const std::vector<WorldPoint>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  bool empty() const { return triangles_.empty(); }
  const Eigen::AlignedBox3d& bounds() const { return bounds_; }
  double bbox_diagonal() const { return bbox_diagonal_; }
  std::size_t dropped_degenerate() const { return dropped_degenerate_; }
  std::size_t dropped_non_finite() const { return dropped_non_finite_; }

  /// Exact Euclidean distance from p to the closest triangle.
  double distance(const WorldPoint& p) const;
  /// True when some triangle lies within radius of p. Cheaper than distance().
  bool within(const WorldPoint& p, double radius) const;
  /// Closest point on the surface to p.
  WorldPoint closest_point(const WorldPoint& p) const;

  /// Returns a copy with every vertex mapped through x -> rotation * x.
  TriMesh transformed(const Mat3& rotation, const Eigen::Vector3d& translation) const;

private:
  struct Node {
    Eigen::AlignedBox3d box;
    std::uint32_t first = 0;  // leaf: first primitive; inner: left child
    std::uint32_t count = 0;  // leaf: primitive count; inner: 0
    std::uint32_t right = 0;
  };

  void build_bvh();
  std::uint32_t build_node(std::uint32_t begin, std::uint32_t end,
                           std::vector<Eigen::Vector3d>& centroids);
  double closest_squared(const WorldPoint& p, WorldPoint* closest, double cutoff_sq) const;

  std::vector<WorldPoint> vertices_;
  std::vector<Triangle> triangles_;
  Eigen::AlignedBox3d bounds_;
  double bbox_diagonal_ = 0.0;
  std::size_t dropped_degenerate_ = 0;
  std::size_t dropped_non_finite_ = 0;

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;         // primitive order in leaves
  std::vector<std::array<WorldPoint, 3>> corners_;  // triangle corners in leaf order
};

/// Minimum distance from p to any triangle. Throws EmptyMesh on an empty mesh.
double mesh_distance(const TriMesh& mesh, const WorldPoint& p);

/// Closest point on triangle abc to p.
WorldPoint closest_point_on_triangle(const WorldPoint& p, const WorldPoint& a,
                                     const WorldPoint& b, const WorldPoint& c);

/// Rotation mapping a Y-up frame to a Z-up frame: (x, y, z) -> (x, -z, y).
Mat3 axis_flip_rotation();

// Loaders. OBJ: ASCII v/f records, polygons fan-triangulated. PLY: ASCII or
// binary_little_endian with vertex x/y/z and face vertex_indices. Unknown
// records and properties are skipped.
TriMesh load_obj(const std::filesystem::path& path);
TriMesh load_ply(const std::filesystem::path& path);
TriMesh load_mesh(const std::filesystem::path& path, bool axis_flip = false);

void write_ply(const std::filesystem::path& path, const TriMesh& mesh);

}  // namespace flymethrough
