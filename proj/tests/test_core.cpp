#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "piperecon/error.hpp"
#include "piperecon/kdtree.hpp"
#include "piperecon/types.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

using namespace piperecon;

TEST_CASE("polyline length of unit segments") {
  CHECK(polyline_length(Polyline({{0, 0, 0}, {1, 0, 0}})) == doctest::Approx(1.0));
  CHECK(polyline_length(Polyline({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}})) == doctest::Approx(2.0));
}

TEST_CASE("closed 100-gon inscribed in the unit circle") {
  // 2 * 100 * sin(pi / 100)
  constexpr double kPerimeter = 6.282151815625658;
  std::vector<Point3> pts;
  for (int i = 0; i <= 100; ++i) {
    const double a = 2 * std::numbers::pi * i / 100;
    pts.emplace_back(std::cos(a), std::sin(a), 0);
  }
  CHECK(polyline_length(Polyline(pts)) == doctest::Approx(kPerimeter).epsilon(1e-12));
}

TEST_CASE("polyline length is rigid invariant and reversal invariant") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<Point3> pts;
  for (int i = 0; i < 50; ++i) pts.emplace_back(g(rng), g(rng), g(rng));
  const Polyline p(pts);
  const double len = polyline_length(p);
  const Polyline moved(fixtures::transformed(pts, fixtures::some_rigid_motion()));
  CHECK(std::abs(polyline_length(moved) - len) <= 1e-9 * len);
  CHECK(polyline_length(p.reversed()) == doctest::Approx(len).epsilon(1e-14));
}

TEST_CASE("tangents") {
  SUBCASE("straight line") {
    for (const auto& t : polyline_tangents(fixtures::line_x(0, 1, 7))) CHECK((t - Vec3::UnitX()).norm() < 1e-12);
  }
  SUBCASE("L shape corner uses the central difference") {
    const auto t = polyline_tangents(Polyline({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}));
    CHECK((t[1] - Vec3(std::sqrt(0.5), std::sqrt(0.5), 0)).norm() < 1e-12);
  }
  SUBCASE("quarter circle within 2 degrees of the analytic tangent") {
    std::vector<Point3> pts;
    for (int i = 0; i < 90; ++i) {
      const double a = 0.5 * std::numbers::pi * i / 89;
      pts.emplace_back(std::cos(a), std::sin(a), 0);
    }
    const auto t = polyline_tangents(Polyline(pts));
    for (int i = 0; i < 90; ++i) {
      const double a = 0.5 * std::numbers::pi * i / 89;
      const Vec3 exact(-std::sin(a), std::cos(a), 0);
      CHECK(std::acos(std::clamp(t[i].dot(exact), -1.0, 1.0)) < 2.0 * std::numbers::pi / 180);
      CHECK(std::abs(t[i].norm() - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("polyline rejects degenerate input") {
  CHECK_THROWS_AS(Polyline({{0, 0, 0}}), PipeError);
  CHECK_THROWS_AS(Polyline({{0, 0, 0}, {0, 0, 0}}), PipeError);
  CHECK_THROWS_AS(Polyline({{0, 0, 0}, {std::nan(""), 0, 0}}), PipeError);
  const Polyline d = Polyline::dedup(std::vector<Point3>{{0, 0, 0}, {0, 0, 0}, {1, 0, 0}});
  CHECK(d.size() == 2);
}

TEST_CASE("skeleton graph validation") {
  const std::vector<Point3> nodes{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  CHECK_NOTHROW(SkeletonGraph(nodes, {{0, 1}, {1, 2}}));
  CHECK_THROWS_AS(SkeletonGraph(nodes, {{0, 0}}), PipeError);
  CHECK_THROWS_AS(SkeletonGraph(nodes, {{0, 1}, {1, 0}}), PipeError);
  CHECK_THROWS_AS(SkeletonGraph(nodes, {{0, 3}}), PipeError);
}

TEST_CASE("point cloud finiteness") {
  PointCloud c{{{0, 0, 0}, {1, 2, 3}}, "a"};
  CHECK_NOTHROW(require_finite(c));
  c.points.emplace_back(0, std::numeric_limits<double>::infinity(), 0);
  CHECK_THROWS_AS(require_finite(c), PipeError);
}

TEST_CASE("voxel grid layout") {
  const auto g = VoxelGrid::covering(Aabb{{0, 0, 0}, {1, 0.5, 0.25}}, 0.1, VoxelGrid::Mode::occupancy);
  CHECK(g.dims() == std::array<int, 3>{10, 5, 3});
  CHECK(g.cell_count() == 150);
  CHECK_THROWS_AS(VoxelGrid(Point3::Zero(), 0.0, {1, 1, 1}, VoxelGrid::Mode::occupancy), PipeError);
}

TEST_CASE("kd-tree agrees with brute force") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Point3> pts;
  for (int i = 0; i < 2000; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  const KdTree tree(pts);
  for (int q = 0; q < 50; ++q) {
    const Point3 c(u(rng), u(rng), u(rng));
    auto found = tree.radius(c, 0.3);
    std::sort(found.begin(), found.end());
    std::vector<int> brute;
    for (int i = 0; i < 2000; ++i) {
      if ((pts[i] - c).norm() <= 0.3) brute.push_back(i);
    }
    CHECK(found == brute);

    std::vector<int> order(2000);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return (pts[a] - c).norm() < (pts[b] - c).norm(); });
    order.resize(8);
    CHECK(tree.knn(c, 8) == order);
  }
}

TEST_CASE("mesh volume and watertightness of a tetrahedron") {
  TriMesh m{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}}};
  CHECK(is_watertight(m));
  CHECK(mesh_volume(m) == doctest::Approx(1.0 / 6.0));
  m.triangles.pop_back();
  CHECK_FALSE(is_watertight(m));
}
