#include "flymethrough/poi.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

namespace flymethrough {

namespace {

using Cell = std::array<std::int64_t, 3>;

struct CellHash {
  std::size_t operator()(const Cell& c) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t v : c) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

bool lex_less(const WorldPoint& a, const WorldPoint& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

class DisjointSets {
public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

private:
  std::vector<std::size_t> parent_;
};

class NeighborGrid {
public:
  NeighborGrid(const std::vector<WorldPoint>& points, double radius)
      : points_(points), radius_(radius) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[cell_of(points[i])].push_back(i);
  }

  template <typename Fn>
  void for_each_neighbor(std::size_t i, Fn&& fn) const {
    const double r2 = radius_ * radius_;
    const Cell c = cell_of(points_[i]);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == cells_.end()) continue;
          for (std::size_t j : it->second) {
            const double d2 = (points_[i] - points_[j]).squaredNorm();
            if (d2 <= r2) fn(j, d2);
          }
        }
      }
    }
  }

private:
  Cell cell_of(const WorldPoint& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / radius_)),
            static_cast<std::int64_t>(std::floor(p.y() / radius_)),
            static_cast<std::int64_t>(std::floor(p.z() / radius_))};
  }

  const std::vector<WorldPoint>& points_;
  double radius_;
  std::unordered_map<Cell, std::vector<std::size_t>, CellHash> cells_;
};

// Picks an orthonormal basis of span(vectors) whose columns best match the
// world axes at the given column slots (maximizes sum |axes(k, k)|).
void align_tied_group(Mat3& axes, const std::vector<int>& slots) {
  if (slots.size() == 3) {
    axes.setIdentity();
    return;
  }
  if (slots.size() != 2) return;
  int fixed = 3 - slots[0] - slots[1];
  const Eigen::Vector3d normal = axes.col(fixed).normalized();

  double best_score = -1.0;
  Mat3 best = axes;
  for (int world = 0; world < 3; ++world) {
    Eigen::Vector3d a = Eigen::Vector3d::Unit(world) - normal * normal(world);
    if (a.norm() < 1e-9) continue;
    a.normalize();
    const Eigen::Vector3d b = normal.cross(a).normalized();
    for (int swap = 0; swap < 2; ++swap) {
      Mat3 candidate = axes;
      candidate.col(slots[0]) = swap ? b : a;
      candidate.col(slots[1]) = swap ? a : b;
      const double score = candidate.diagonal().cwiseAbs().sum();
      if (score > best_score + 1e-12) {
        best_score = score;
        best = candidate;
      }
    }
  }
  axes = best;
}

}  // namespace

void ClusterConfig::validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  if (min_pts < 1) throw Error(ErrorCode::InvalidArgument, "min_pts must be at least 1");
}

std::string to_string(PoiStatus status) {
  switch (status) {
    case PoiStatus::Pending: return "pending";
    case PoiStatus::Cast: return "cast";
    case PoiStatus::Failed: return "failed";
  }
  return "pending";
}

std::string to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::None: return "";
    case FailureReason::NoResults: return "NoResults";
    case FailureReason::MissingPose: return "MissingPose";
    case FailureReason::MissingDepth: return "MissingDepth";
    case FailureReason::MissingMask: return "MissingMask";
    case FailureReason::EmptyCloud: return "EmptyCloud";
    case FailureReason::NoContact: return "NoContact";
    case FailureReason::AllNoise: return "AllNoise";
  }
  return "";
}

PoiStatus parse_poi_status(const std::string& text) {
  if (text == "pending") return PoiStatus::Pending;
  if (text == "cast") return PoiStatus::Cast;
  if (text == "failed") return PoiStatus::Failed;
  throw Error(ErrorCode::ParseError, "unknown POI status " + text);
}

FailureReason parse_failure_reason(const std::string& text) {
  for (FailureReason r :
       {FailureReason::None, FailureReason::NoResults, FailureReason::MissingPose,
        FailureReason::MissingDepth, FailureReason::MissingMask, FailureReason::EmptyCloud,
        FailureReason::NoContact, FailureReason::AllNoise}) {
    if (to_string(r) == text) return r;
  }
  throw Error(ErrorCode::ParseError, "unknown failure reason " + text);
}

std::vector<WorldPoint> aggregate_casts(const std::vector<CastResult>& results) {
  if (results.empty()) throw Error(ErrorCode::NoResults, "no cast results to aggregate");
  std::vector<const CastResult*> ordered;
  for (const CastResult& r : results) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const CastResult* a, const CastResult* b) { return a->frame_id < b->frame_id; });
  std::vector<WorldPoint> out;
  for (const CastResult* r : ordered) {
    out.insert(out.end(), r->contact_points.begin(), r->contact_points.end());
  }
  return out;
}

Clustering dbscan(const std::vector<WorldPoint>& points, const ClusterConfig& config,
                  double scene_diagonal) {
  config.validate();
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "dbscan needs at least one point");
  const double radius = config.epsilon * scene_diagonal;
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "dbscan radius must be positive");

  const std::size_t n = points.size();
  const NeighborGrid grid(points, radius);

  std::vector<std::uint8_t> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    grid.for_each_neighbor(i, [&](std::size_t, double) { ++count; });
    core[i] = count >= config.min_pts ? 1 : 0;
  }

  DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    grid.for_each_neighbor(i, [&](std::size_t j, double) {
      if (core[j]) sets.unite(i, j);
    });
  }

  // root[i]: representative core point whose component i belongs to.
  std::vector<std::int64_t> root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      root[i] = static_cast<std::int64_t>(sets.find(i));
      continue;
    }
    std::int64_t best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    grid.for_each_neighbor(i, [&](std::size_t j, double d2) {
      if (!core[j]) return;
      if (best < 0 || d2 < best_d2 ||
          (d2 == best_d2 && lex_less(points[j], points[static_cast<std::size_t>(best)]))) {
        best = static_cast<std::int64_t>(j);
        best_d2 = d2;
      }
    });
    if (best >= 0) root[i] = static_cast<std::int64_t>(sets.find(static_cast<std::size_t>(best)));
  }

  std::map<std::int64_t, std::vector<std::size_t>> groups;
  Clustering result;
  for (std::size_t i = 0; i < n; ++i) {
    if (root[i] < 0) {
      result.noise.push_back(i);
    } else {
      groups[root[i]].push_back(i);
    }
  }

  struct Ranked {
    std::vector<std::size_t> members;
    WorldPoint smallest;
  };
  std::vector<Ranked> ranked;
  for (auto& [key, members] : groups) {
    WorldPoint smallest = points[members.front()];
    for (std::size_t m : members) {
      if (lex_less(points[m], smallest)) smallest = points[m];
    }
    ranked.push_back({std::move(members), smallest});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return lex_less(a.smallest, b.smallest);
  });

  result.labels.assign(n, -1);
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    for (std::size_t m : ranked[k].members) result.labels[m] = static_cast<int>(k);
    result.clusters.push_back(std::move(ranked[k].members));
  }
  return result;
}

OrientedBox pca_box(const std::vector<WorldPoint>& points, double scene_diagonal) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "pca_box needs at least one point");

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const WorldPoint& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Mat3 covariance = Mat3::Zero();
  for (const WorldPoint& p : points) {
    const Eigen::Vector3d d = p - mean;
    covariance += d * d.transpose();
  }
  covariance /= static_cast<double>(points.size());

  const Eigen::SelfAdjointEigenSolver<Mat3> solver(covariance);
  // Eigen sorts ascending; reorder to descending.
  Eigen::Vector3d values;
  Mat3 axes;
  for (int k = 0; k < 3; ++k) {
    values(k) = solver.eigenvalues()(2 - k);
    axes.col(k) = solver.eigenvectors().col(2 - k).normalized();
  }

  const double tie = 1e-9 * std::max(values(0), 0.0);
  std::vector<int> tied;
  if (std::abs(values(0) - values(2)) <= tie) {
    tied = {0, 1, 2};
  } else if (std::abs(values(0) - values(1)) <= tie) {
    tied = {0, 1};
  } else if (std::abs(values(1) - values(2)) <= tie) {
    tied = {1, 2};
  }
  align_tied_group(axes, tied);

  // Canonical signs: largest-magnitude component positive on the first two
  // axes, third completes a right-handed frame.
  for (int k = 0; k < 2; ++k) {
    Eigen::Index idx = 0;
    axes.col(k).cwiseAbs().maxCoeff(&idx);
    if (axes(idx, k) < 0.0) axes.col(k) = -axes.col(k);
  }
  axes.col(1) = (axes.col(1) - axes.col(0) * axes.col(0).dot(axes.col(1))).normalized();
  axes.col(2) = axes.col(0).cross(axes.col(1));

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (const WorldPoint& p : points) {
    const Eigen::Vector3d local = axes.transpose() * (p - mean);
    lo = lo.cwiseMin(local);
    hi = hi.cwiseMax(local);
  }
  const Eigen::Vector3d center_local = 0.5 * (lo + hi);
  const double floor = 1e-4 * scene_diagonal;
  Eigen::Vector3d half = 0.5 * (hi - lo);
  for (int k = 0; k < 3; ++k) half(k) = std::max(half(k), floor > 0.0 ? floor : 1e-12);
  return OrientedBox(mean + axes * center_local, axes, half);
}

PoiInstance extract_poi(PoiInstance annotation, const std::vector<CastResult>& results,
                        const ClusterConfig& config, double scene_diagonal) {
  PoiInstance poi = std::move(annotation);
  poi.box.reset();
  poi.support_count = 0;
  poi.cluster_sizes.clear();
  poi.noise_count = 0;
  if (results.empty()) {
    poi.status = PoiStatus::Failed;
    poi.failure = FailureReason::NoResults;
    return poi;
  }

  const std::vector<WorldPoint> points = aggregate_casts(results);
  if (points.empty()) {
    poi.status = PoiStatus::Failed;
    poi.failure = FailureReason::NoResults;
    return poi;
  }
  const Clustering clustering = dbscan(points, config, scene_diagonal);
  for (const auto& c : clustering.clusters) poi.cluster_sizes.push_back(c.size());
  poi.noise_count = clustering.noise.size();

  std::vector<WorldPoint> selected;
  if (!clustering.clusters.empty()) {
    const std::size_t take =
        config.selection == ClusterSelection::Largest ? 1 : clustering.clusters.size();
    for (std::size_t k = 0; k < take; ++k) {
      for (std::size_t idx : clustering.clusters[k]) selected.push_back(points[idx]);
    }
  }
  if (selected.size() < config.min_pts) {
    poi.status = PoiStatus::Failed;
    poi.failure = FailureReason::AllNoise;
    return poi;
  }

  poi.box = pca_box(selected, scene_diagonal);
  poi.support_count = selected.size();
  poi.status = PoiStatus::Cast;
  poi.failure = FailureReason::None;
  return poi;
}

}  // namespace flymethrough
