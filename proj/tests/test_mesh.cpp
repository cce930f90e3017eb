#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <thread>

#include "flymethrough/mesh.hpp"
#include "support/oracles.hpp"

using namespace flymethrough;

namespace {

TriMesh unit_square() {
  return TriMesh({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, {{0, 1, 2}, {0, 2, 3}});
}

// Bumpy height field; 2 * (n-1)^2 triangles.
void height_field(int n, std::vector<WorldPoint>& v, std::vector<Triangle>& t) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> h(-0.3, 0.3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) v.emplace_back(x * 0.25, y * 0.25, h(rng));
  }
  for (int y = 0; y + 1 < n; ++y) {
    for (int x = 0; x + 1 < n; ++x) {
      const auto i = static_cast<std::uint32_t>(y * n + x);
      const auto w = static_cast<std::uint32_t>(n);
      t.push_back({i, i + 1, i + w + 1});
      t.push_back({i, i + w + 1, i + w});
    }
  }
}

}  // namespace

TEST_SUITE("mesh") {

TEST_CASE("distance examples") {
  const TriMesh mesh = unit_square();
  CHECK(mesh_distance(mesh, {0.5, 0.5, 2.0}) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(mesh_distance(mesh, {1, 1, 0}) == 0.0);
  CHECK(mesh_distance(mesh, {2, 0.5, 0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(mesh_distance(TriMesh(), {0, 0, 0}), Error);
}

TEST_CASE("distance matches the brute-force oracle on a 500-triangle mesh") {
  std::vector<WorldPoint> v;
  std::vector<Triangle> t;
  height_field(17, v, t);
  REQUIRE(t.size() == 512);
  const TriMesh mesh(v, t);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> xy(-1.0, 5.0), z(-2.0, 2.0);
  for (int i = 0; i < 2000; ++i) {
    const WorldPoint p(xy(rng), xy(rng), z(rng));
    const double expected = oracle::brute_mesh_distance(v, t, p);
    CHECK(std::abs(mesh.distance(p) - expected) < 1e-9);
    CHECK((mesh.closest_point(p) - p).norm() == doctest::Approx(expected).epsilon(1e-9));
    CHECK(mesh.within(p, expected + 1e-9));
    CHECK_FALSE(mesh.within(p, expected * 0.999 - 1e-9));
  }
}

TEST_CASE("distance is invariant under rigid transforms") {
  std::vector<WorldPoint> v;
  std::vector<Triangle> t;
  height_field(9, v, t);
  const TriMesh mesh(v, t);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat3 r = oracle::random_rotation(rng);
    const Eigen::Vector3d tr(u(rng), u(rng), u(rng));
    const TriMesh moved = mesh.transformed(r, tr);
    for (int i = 0; i < 50; ++i) {
      const WorldPoint p(u(rng), u(rng), u(rng));
      CHECK(std::abs(moved.distance(r * p + tr) - mesh.distance(p)) < 1e-6);
    }
  }
}

TEST_CASE("concurrent queries agree with serial ones") {
  std::vector<WorldPoint> v;
  std::vector<Triangle> t;
  height_field(20, v, t);
  const TriMesh mesh(v, t);
  std::vector<WorldPoint> queries;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 6.0);
  for (int i = 0; i < 4000; ++i) queries.emplace_back(u(rng), u(rng), u(rng) * 0.2);
  std::vector<double> serial(queries.size()), parallel(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) serial[i] = mesh.distance(queries[i]);
  {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < 4; ++w) {
      threads.emplace_back([&, w] {
        for (std::size_t i = w; i < queries.size(); i += 4) parallel[i] = mesh.distance(queries[i]);
      });
    }
  }
  CHECK(serial == parallel);
}

TEST_CASE("construction strips bad input") {
  const TriMesh mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {NAN, 0, 0}, {2, 0, 0}},
                     {{0, 1, 2}, {0, 1, 3}, {0, 1, 4}});
  CHECK(mesh.triangles().size() == 1);
  CHECK(mesh.dropped_non_finite() == 1);
  CHECK(mesh.dropped_degenerate() == 1);
  for (const WorldPoint& p : mesh.vertices()) CHECK(p.allFinite());
  for (const Triangle& tri : mesh.triangles()) {
    for (auto idx : tri) CHECK(idx < mesh.vertices().size());
  }
  CHECK(mesh.bbox_diagonal() > 0.0);
  CHECK_THROWS_AS(TriMesh({{0, 0, 0}}, {{0, 1, 2}}), Error);
}

TEST_CASE("OBJ loader fan-triangulates polygons and skips unknown records") {
  const auto dir = oracle::scratch_dir("mesh-obj");
  {
    std::ofstream f(dir / "quad.obj");
    f << "# comment\nmtllib x.mtl\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\n"
         "usemtl m\nf 1/1/1 2/2/1 3/3/1 -1/4/1\n";
  }
  const TriMesh mesh = load_mesh(dir / "quad.obj");
  CHECK(mesh.triangles().size() == 2);
  CHECK(mesh.distance({0.25, 0.75, 1.0}) == doctest::Approx(1.0));

  {
    std::ofstream f(dir / "bad.obj");
    f << "v 0 0 0\nf 1 2 9\n";
  }
  CHECK_THROWS_AS(load_mesh(dir / "bad.obj"), Error);
}

TEST_CASE("PLY loader reads ASCII and binary little-endian") {
  const auto dir = oracle::scratch_dir("mesh-ply");
  {
    std::ofstream f(dir / "a.ply");
    f << "ply\nformat ascii 1.0\ncomment test\nelement vertex 4\nproperty float x\nproperty float y\n"
         "property float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\n"
         "end_header\n0 0 0 1\n1 0 0 2\n1 1 0 3\n0 1 0 4\n4 0 1 2 3\n";
  }
  const TriMesh ascii = load_mesh(dir / "a.ply");
  CHECK(ascii.triangles().size() == 2);

  {
    std::ofstream f(dir / "b.ply", std::ios::binary);
    f << "ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
         "property float z\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n";
    const float xyz[9] = {0, 0, 0, 2, 0, 0, 0, 2, 0};
    f.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    const unsigned char n = 3;
    const std::uint32_t idx[3] = {0, 1, 2};
    f.write(reinterpret_cast<const char*>(&n), 1);
    f.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
  const TriMesh binary = load_mesh(dir / "b.ply");
  REQUIRE(binary.triangles().size() == 1);
  CHECK(binary.vertices()[1] == WorldPoint(2, 0, 0));

  write_ply(dir / "c.ply", ascii);
  const TriMesh again = load_mesh(dir / "c.ply");
  CHECK(again.vertices() == ascii.vertices());
  CHECK(again.triangles() == ascii.triangles());

  {
    std::ofstream f(dir / "d.ply");
    f << "ply\nformat binary_big_endian 1.0\nend_header\n";
  }
  CHECK_THROWS_AS(load_mesh(dir / "d.ply"), Error);
}

TEST_CASE("axis flip maps Y-up to Z-up") {
  const Mat3 f = axis_flip_rotation();
  CHECK((f * Eigen::Vector3d(0, 1, 0) - Eigen::Vector3d(0, 0, 1)).norm() < 1e-15);
  CHECK((f * Eigen::Vector3d(1, 0, 0) - Eigen::Vector3d(1, 0, 0)).norm() < 1e-15);
  CHECK(is_rotation(f));
}

}
