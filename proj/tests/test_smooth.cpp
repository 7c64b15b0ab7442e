#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "piperecon/error.hpp"
#include "piperecon/smooth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

using namespace piperecon;
using namespace piperecon::smooth;

namespace {

Polyline zigzag(double amplitude, double period, double length) {
  std::vector<Point3> pts;
  const int n = static_cast<int>(std::round(length / (0.5 * period)));
  for (int i = 0; i <= n; ++i) {
    const double y = (i == 0 || i == n) ? 0.0 : (i % 2 ? amplitude : -amplitude);
    pts.emplace_back(0.5 * period * i, y, 0.0);
  }
  return Polyline(std::move(pts));
}

double max_lateral(const Polyline& p) {
  double m = 0.0;
  for (const auto& q : p) m = std::max(m, fixtures::axis_distance_x(q));
  return m;
}

// Energy summed directly: trapezoid arc-length weights times the sampled
// distance, plus the length term.
double energy_by_hand(const Polyline& c, const VoxelGrid& field, double length_weight) {
  const auto& p = c.points();
  double e = 0.0, len = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double seg = (p[i + 1] - p[i]).norm();
    e += 0.5 * seg * (sample_distance(field, p[i]) + sample_distance(field, p[i + 1]));
    len += seg;
  }
  return e + length_weight * len;
}

double max_deviation(const Polyline& input, const Polyline& simplified) {
  double worst = 0.0;
  for (const auto& p : input) worst = std::max(worst, point_polyline_distance(p, simplified));
  return worst;
}

}  // namespace

TEST_CASE("reparameterize a segment") {
  const Polyline p = reparameterize(Polyline({{0, 0, 0}, {1, 0, 0}}), 0.25);
  REQUIRE(p.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK((p[i] - Point3(0.25 * i, 0, 0)).norm() < 1e-12);
}

TEST_CASE("reparameterize an unevenly sampled quarter circle") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> angles{0.0, 0.5 * std::numbers::pi};
  for (int i = 0; i < 38; ++i) angles.push_back(0.5 * std::numbers::pi * u(rng));
  std::sort(angles.begin(), angles.end());
  std::vector<Point3> pts;
  for (double a : angles) pts.emplace_back(std::cos(a), std::sin(a), 0);
  const Polyline in = Polyline::dedup(pts);
  const double spacing = 0.01;
  const Polyline out = reparameterize(in, spacing);
  CHECK(out.front() == in.front());
  CHECK(out.back() == in.back());
  CHECK(std::abs(polyline_length(out) - polyline_length(in)) <= spacing);
  for (std::size_t i = 1; i + 1 < out.size(); ++i) {
    CHECK(std::abs((out[i] - out[i - 1]).norm() - spacing) <= 0.01 * spacing);
  }
  // Every resampled point lies on the input polyline.
  for (const auto& q : out) CHECK(point_polyline_distance(q, in) < 1e-12);
}

TEST_CASE("voxelized straight segment") {
  const double h = 0.01;
  const Polyline seg({{0.003, 0.002, 0.001}, {0.4, 0.13, 0.07}});
  const VoxelGrid g = voxelize_curve(seg, h, 8);
  std::vector<std::array<int, 3>> cells;
  const auto& d = g.dims();
  for (int k = 0; k < d[2]; ++k) {
    for (int j = 0; j < d[1]; ++j) {
      for (int i = 0; i < d[0]; ++i) {
        if (g.occupancy()[g.index(i, j, k)]) cells.push_back({i, j, k});
      }
    }
  }
  REQUIRE(cells.size() > 10);
  // Connectivity through 26-neighborhoods.
  std::set<std::array<int, 3>> left(cells.begin(), cells.end()), seen;
  std::vector<std::array<int, 3>> stack{cells.front()};
  seen.insert(cells.front());
  while (!stack.empty()) {
    const auto c = stack.back();
    stack.pop_back();
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const std::array<int, 3> nb{c[0] + dx, c[1] + dy, c[2] + dz};
          if (left.count(nb) && !seen.count(nb)) {
            seen.insert(nb);
            stack.push_back(nb);
          }
        }
      }
    }
  }
  CHECK(seen.size() == cells.size());

  float lowest = 1e9f;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    lowest = std::min(lowest, g.distances()[i]);
    if (g.occupancy()[i]) {
      CHECK(g.distances()[i] == 0.0f);
    } else {
      CHECK(g.distances()[i] > 0.0f);
    }
  }
  CHECK(lowest == 0.0f);
}

TEST_CASE("distance five cells from a straight curve") {
  const double h = 0.01;
  const Polyline line({{0.005, 0.005, 0.005}, {0.305, 0.005, 0.005}});
  const VoxelGrid g = voxelize_curve(line, h, 8);
  const auto c = g.cell_of(Point3(0.155, 0.005 + 5 * h, 0.005));
  const Point3 center = g.center(c[0], c[1], c[2]);
  const double exact = point_segment_distance(center, line.front(), line.back());
  CHECK(exact == doctest::Approx(5 * h).epsilon(1e-9));
  CHECK(std::abs(g.distances()[g.index(c[0], c[1], c[2])] - exact) <= 0.1 * exact);
}

TEST_CASE("voxel budget") {
  CHECK_THROWS_AS(voxelize_curve(Polyline({{0, 0, 0}, {100, 100, 100}}), 1e-4, 8), PipeError);
}

TEST_CASE("a straight line is already smooth") {
  const SmoothingParams params;
  const Polyline in = fixtures::line_x(0.0, 0.5, 26);
  const SmoothResult out = smooth_curve(in, params);
  for (const auto& p : out.curve) CHECK(point_polyline_distance(p, in) < params.voxel_size);
  CHECK(out.curve.front() == in.front());
  CHECK(out.curve.back() == in.back());
}

TEST_CASE("a zigzag is flattened") {
  SmoothingParams params;
  const double h = params.voxel_size;
  const Polyline in = zigzag(4 * h, 8 * h, 0.4);
  const SmoothResult out = smooth_curve(in, params);
  CHECK(max_lateral(out.curve) < max_lateral(in));
  CHECK(out.curve.front() == in.front());
  CHECK(out.curve.back() == in.back());

  const VoxelGrid field = voxelize_curve(in, h, params.band_voxels);
  const double w = params.weight * h;
  const double before = curve_energy(in, field, w);
  const double after = curve_energy(out.curve, field, w);
  CHECK(after < before);
  CHECK(before == doctest::Approx(energy_by_hand(in, field, w)).epsilon(1e-12));
  CHECK(after == doctest::Approx(energy_by_hand(out.curve, field, w)).epsilon(1e-12));

  REQUIRE(out.energy_log.size() >= 2);
  for (std::size_t i = 1; i < out.energy_log.size(); ++i) CHECK(out.energy_log[i] <= out.energy_log[i - 1]);
}

TEST_CASE("a larger weight shortens the curve") {
  SmoothingParams params;
  const double h = params.voxel_size;
  const Polyline in = zigzag(4 * h, 8 * h, 0.4);
  const double len_w = polyline_length(smooth_curve(in, params).curve);
  params.weight *= 2;
  const double len_2w = polyline_length(smooth_curve(in, params).curve);
  CHECK(len_2w <= len_w + h);
}

TEST_CASE("smoothing is rigid equivariant up to the voxel grid") {
  SmoothingParams params;
  const Polyline in = zigzag(4 * params.voxel_size, 8 * params.voxel_size, 0.3);
  const auto t = fixtures::some_rigid_motion();
  const Polyline a = smooth_curve(in, params).curve;
  const Polyline b = smooth_curve(Polyline(fixtures::transformed(in.points(), t)), params).curve;
  const Polyline a_moved(fixtures::transformed(a.points(), t));
  for (const auto& p : b) CHECK(point_polyline_distance(p, a_moved) < 2 * params.voxel_size);
}

TEST_CASE("rdp fixtures") {
  std::vector<Point3> line;
  for (int i = 0; i < 100; ++i) line.emplace_back(0.01 * i, 0, 0);
  CHECK(rdp_simplify_epsilon(Polyline(line), 0.01).size() == 2);

  const Polyline corner({{0, 0, 0}, {0.5, 0, 0}, {1, 0, 0}, {1, 0.5, 0}, {1, 1, 0}});
  const Polyline c = rdp_simplify_epsilon(corner, 0.06);
  REQUIRE(c.size() == 3);
  CHECK(c[1] == Point3(1, 0, 0));

  CHECK(rdp_simplify(corner, 0.1).size() == 3);
  CHECK(rdp_simplify(corner, 10.0).size() == 2);
}

TEST_CASE("rdp on a sine hump") {
  const double a = 0.1;
  std::vector<Point3> pts;
  for (int i = 0; i <= 40; ++i) pts.emplace_back(i / 40.0, a * std::sin(std::numbers::pi * i / 40.0), 0);
  const Polyline hump(pts);
  CHECK(rdp_simplify_epsilon(hump, a * 1.01).size() == 2);
  const Polyline kept = rdp_simplify_epsilon(hump, a * 0.99);
  CHECK(std::find(kept.begin(), kept.end(), pts[20]) != kept.end());
  CHECK(max_deviation(hump, kept) <= a * 0.99);
}

TEST_CASE("rdp limits") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0, 0.05);
  std::vector<Point3> pts;
  for (int i = 0; i < 60; ++i) pts.emplace_back(0.02 * i, g(rng), g(rng));
  const Polyline p(pts);
  CHECK(rdp_simplify_epsilon(p, 0.0).points() == p.points());
  const Polyline ends = rdp_simplify_epsilon(p, std::numeric_limits<double>::infinity());
  REQUIRE(ends.size() == 2);
  CHECK(ends.front() == p.front());
  CHECK(ends.back() == p.back());
}

TEST_CASE("rdp deviation bound, exhaustive over random curves") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Point3> pts{Point3::Zero()};
    for (int i = 1; i < 30; ++i) pts.push_back(pts.back() + Vec3(g(rng), g(rng), g(rng)) * 0.1);
    const Polyline p = Polyline::dedup(pts);
    const double eps = 0.02 + 0.3 * std::abs(g(rng));
    const Polyline s = rdp_simplify_epsilon(p, eps);
    CHECK(max_deviation(p, s) <= eps + 1e-12);
    CHECK(s.front() == p.front());
    CHECK(s.back() == p.back());
  }
}
