#include "flymethrough/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace flymethrough {

namespace {

constexpr std::uint32_t kLeafSize = 4;

double box_squared_distance(const Eigen::AlignedBox3d& box, const WorldPoint& p) {
  const Eigen::Vector3d d =
      (box.min() - p).cwiseMax(Eigen::Vector3d::Zero()).cwiseMax(p - box.max());
  return d.squaredNorm();
}

}  // namespace

WorldPoint closest_point_on_triangle(const WorldPoint& p, const WorldPoint& a,
                                     const WorldPoint& b, const WorldPoint& c) {
  // Voronoi-region walk over vertices, edges and face.
  const Eigen::Vector3d ab = b - a;
  const Eigen::Vector3d ac = c - a;
  const Eigen::Vector3d ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return a + v * ab;
  }

  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return a + w * ac;
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + w * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return a + ab * v + ac * w;
}

TriMesh::TriMesh(std::vector<WorldPoint> vertices, std::vector<Triangle> triangles) {
  std::vector<std::int64_t> remap(vertices.size(), -1);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (vertices[i].allFinite()) {
      remap[i] = static_cast<std::int64_t>(vertices_.size());
      vertices_.push_back(vertices[i]);
    }
  }

  triangles_.reserve(triangles.size());
  for (const Triangle& t : triangles) {
    for (std::uint32_t idx : t) {
      if (idx >= vertices.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    "triangle index " + std::to_string(idx) + " out of range");
      }
    }
    if (remap[t[0]] < 0 || remap[t[1]] < 0 || remap[t[2]] < 0) {
      ++dropped_non_finite_;
      continue;
    }
    const Triangle mapped{static_cast<std::uint32_t>(remap[t[0]]),
                          static_cast<std::uint32_t>(remap[t[1]]),
                          static_cast<std::uint32_t>(remap[t[2]])};
    const WorldPoint& a = vertices_[mapped[0]];
    const WorldPoint& b = vertices_[mapped[1]];
    const WorldPoint& c = vertices_[mapped[2]];
    if ((b - a).cross(c - a).squaredNorm() == 0.0) {
      ++dropped_degenerate_;
      continue;
    }
    triangles_.push_back(mapped);
  }

  bounds_.setEmpty();
  for (const WorldPoint& v : vertices_) bounds_.extend(v);
  bbox_diagonal_ = vertices_.empty() ? 0.0 : bounds_.diagonal().norm();
  build_bvh();
}

void TriMesh::build_bvh() {
  nodes_.clear();
  order_.resize(triangles_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (triangles_.empty()) return;

  std::vector<Eigen::Vector3d> centroids(triangles_.size());
  for (std::size_t i = 0; i < triangles_.size(); ++i) {
    const Triangle& t = triangles_[i];
    centroids[i] = (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0;
  }
  nodes_.reserve(2 * triangles_.size() / kLeafSize + 1);
  build_node(0, static_cast<std::uint32_t>(triangles_.size()), centroids);

  corners_.resize(triangles_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const Triangle& t = triangles_[order_[i]];
    corners_[i] = {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
  }
}

std::uint32_t TriMesh::build_node(std::uint32_t begin, std::uint32_t end,
                                  std::vector<Eigen::Vector3d>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();

  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  box.setEmpty();
  centroid_box.setEmpty();
  for (std::uint32_t i = begin; i < end; ++i) {
    const Triangle& t = triangles_[order_[i]];
    box.extend(vertices_[t[0]]).extend(vertices_[t[1]]).extend(vertices_[t[2]]);
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[index].box = box;

  if (end - begin <= kLeafSize) {
    nodes_[index].first = begin;
    nodes_[index].count = end - begin;
    return index;
  }

  int axis = 0;
  centroid_box.diagonal().maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (centroids[a][axis] != centroids[b][axis]) {
                       return centroids[a][axis] < centroids[b][axis];
                     }
                     return a < b;
                   });

  const std::uint32_t left = build_node(begin, mid, centroids);
  const std::uint32_t right = build_node(mid, end, centroids);
  nodes_[index].first = left;
  nodes_[index].count = 0;
  nodes_[index].right = right;
  return index;
}

double TriMesh::closest_squared(const WorldPoint& p, WorldPoint* closest,
                                double cutoff_sq) const {
  double best = cutoff_sq;
  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_squared_distance(node.box, p) > best) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto& tri = corners_[i];
        const WorldPoint q = closest_point_on_triangle(p, tri[0], tri[1], tri[2]);
        const double d = (q - p).squaredNorm();
        if (d <= best) {
          best = d;
          if (closest) *closest = q;
        }
      }
      continue;
    }
    const std::uint32_t left = node.first;
    const std::uint32_t right = node.right;
    const double dl = box_squared_distance(nodes_[left].box, p);
    const double dr = box_squared_distance(nodes_[right].box, p);
    // Push the farther child first so the nearer one is visited next.
    if (dl <= dr) {
      if (dr <= best) stack[top++] = right;
      if (dl <= best) stack[top++] = left;
    } else {
      if (dl <= best) stack[top++] = left;
      if (dr <= best) stack[top++] = right;
    }
  }
  return best;
}

double TriMesh::distance(const WorldPoint& p) const {
  if (empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no triangles");
  return std::sqrt(closest_squared(p, nullptr, std::numeric_limits<double>::infinity()));
}

bool TriMesh::within(const WorldPoint& p, double radius) const {
  if (empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no triangles");
  const double r2 = radius * radius;
  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_squared_distance(node.box, p) > r2) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto& tri = corners_[i];
        if ((closest_point_on_triangle(p, tri[0], tri[1], tri[2]) - p).squaredNorm() <= r2) {
          return true;
        }
      }
      continue;
    }
    stack[top++] = node.right;
    stack[top++] = node.first;
  }
  return false;
}

WorldPoint TriMesh::closest_point(const WorldPoint& p) const {
  if (empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no triangles");
  WorldPoint q = p;
  closest_squared(p, &q, std::numeric_limits<double>::infinity());
  return q;
}

TriMesh TriMesh::transformed(const Mat3& rotation, const Eigen::Vector3d& translation) const {
  std::vector<WorldPoint> moved;
  moved.reserve(vertices_.size());
  for (const WorldPoint& v : vertices_) moved.push_back(rotation * v + translation);
  return TriMesh(std::move(moved), triangles_);
}

double mesh_distance(const TriMesh& mesh, const WorldPoint& p) { return mesh.distance(p); }

Mat3 axis_flip_rotation() {
  Mat3 r;
  r << 1, 0, 0,
       0, 0, -1,
       0, 1, 0;
  return r;
}

}  // namespace flymethrough
