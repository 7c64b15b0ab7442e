#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "piperecon/dataset.hpp"
#include "piperecon/error.hpp"
#include "piperecon/synth.hpp"

#include <algorithm>
#include <numbers>
#include <set>

using namespace piperecon;
using namespace piperecon::synth;

TEST_CASE("straight spline resampling") {
  const Polyline p = interpolate_spline(fixtures::straight_spec(1.0, 0.1), 0.1);
  REQUIRE(p.size() == 11);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK((p[i] - Point3(0.1 * i, 0, 0)).norm() < 1e-9);
  }
}

TEST_CASE("quarter bend stays on the circular arc") {
  const double R = 0.5;
  const auto spec = fixtures::quarter_bend_spec(R, 0.1);
  const Polyline p = interpolate_spline(spec, 0.005);
  CHECK(p.front() == spec.control_points().front());
  CHECK(p.back() == spec.control_points().back());
  double worst = 0.0;
  for (const auto& q : p) worst = std::max(worst, std::abs((q - Point3(0, R, 0)).norm() - R));
  CHECK(worst < 0.01 * R);
}

TEST_CASE("ground truth lengths") {
  CHECK(make_ground_truth("s", fixtures::straight_spec(1.0, 0.1)).axis_length == doctest::Approx(1.0).epsilon(1e-9));
  const GroundTruth bend = make_ground_truth("b", fixtures::quarter_bend_spec(0.5, 0.1));
  CHECK(std::abs(bend.axis_length - std::numbers::pi * 0.5 / 2) < 0.005 * std::numbers::pi * 0.5 / 2);
  CHECK(bend.outer_radius == 0.1);
}

TEST_CASE("pipe spec validation") {
  CHECK_THROWS_AS(PipeSpec({Point3::Zero()}, {Vec3::UnitX()}, 0.1), PipeError);
  CHECK_THROWS_AS(PipeSpec({Point3::Zero(), Point3::Zero()}, {Vec3::UnitX(), Vec3::UnitX()}, 0.1), PipeError);
  CHECK_THROWS_AS(fixtures::straight_spec(1.0, 0.0), PipeError);
}

TEST_CASE("surface sampling") {
  const auto cloud = sample_pipe_surface(fixtures::straight_spec(1.0, 0.1), 1e4, 5);
  CHECK(cloud.size() == 6283);
  std::vector<double> xs;
  for (const auto& p : cloud.points) {
    CHECK(std::abs(fixtures::axis_distance_x(p) - 0.1) < 1e-6);
    xs.push_back(p.x());
  }
  std::sort(xs.begin(), xs.end());
  double gap = std::max(xs.front(), 1.0 - xs.back());
  for (std::size_t i = 1; i < xs.size(); ++i) gap = std::max(gap, xs[i] - xs[i - 1]);
  CHECK(gap <= 5.0 / std::sqrt(1e4));
}

namespace {

Scene single_pipe_scene(std::vector<Point3> stations, double pipe_y = 1.5) {
  Scene scene;
  scene.pipes.push_back(
      {"p", PipeSpec({{-2, pipe_y, 0}, {2, pipe_y, 0}}, {Vec3::UnitX(), Vec3::UnitX()}, 0.1), false, false});
  for (const auto& s : stations) {
    ScanStation st;
    st.position = s;
    scene.stations.push_back(st);
  }
  return scene;
}

}  // namespace

TEST_CASE("single station sees only the front half") {
  const Scene scene = single_pipe_scene({Point3::Zero()});
  const ScanResult scan = virtual_scan(scene);
  REQUIRE(scan.clouds.size() == 1);
  REQUIRE(scan.clouds[0].size() > 100);
  for (const auto& p : scan.clouds[0].points) {
    const Vec3 normal = Vec3(0, p.y() - 1.5, p.z()).normalized();
    const Vec3 ray = p.normalized();
    CHECK(normal.dot(ray) <= 1e-6);
    CHECK(std::abs(std::hypot(p.y() - 1.5, p.z()) - 0.1) < 1e-6);
  }
}

TEST_CASE("opposite stations cover the circumference") {
  const Scene scene = single_pipe_scene({{0, 0, 0}, {0, 3, 0}});
  const ScanResult scan = virtual_scan(scene);
  std::set<int> bins;
  for (const auto& p : scan.clouds[0].points) {
    if (std::abs(p.x()) > 0.2) continue;
    const double a = std::atan2(p.z(), p.y() - 1.5) + std::numbers::pi;
    bins.insert(std::min(35, static_cast<int>(a / (2 * std::numbers::pi) * 36)));
  }
  CHECK(bins.size() > 0.9 * 36);
}

TEST_CASE("adding a station never loses points") {
  const auto one = virtual_scan(single_pipe_scene({{0, 0, 0}}));
  const auto two = virtual_scan(single_pipe_scene({{0, 0, 0}, {1, 3, 0.5}}));
  CHECK(two.clouds[0].size() >= one.clouds[0].size());
}

TEST_CASE("a pipe hidden behind another returns no points") {
  Scene scene;
  scene.pipes.push_back(
      {"front", PipeSpec({{-0.5, 1, 0}, {0.5, 1, 0}}, {Vec3::UnitX(), Vec3::UnitX()}, 0.2), false, false});
  scene.pipes.push_back(
      {"back", PipeSpec({{-0.1, 3, 0}, {0.1, 3, 0}}, {Vec3::UnitX(), Vec3::UnitX()}, 0.1), false, false});
  scene.stations.push_back(ScanStation{});
  const ScanResult scan = virtual_scan(scene);
  CHECK_FALSE(scan.empty[0]);
  CHECK(scan.empty[1]);
  CHECK(scan.clouds[1].empty());
}

TEST_CASE("occluders cast shadows but produce no cloud") {
  Scene scene = single_pipe_scene({Point3::Zero()});
  scene.pipes.push_back(
      {"wall", PipeSpec({{-0.5, 0.7, 0}, {0.5, 0.7, 0}}, {Vec3::UnitX(), Vec3::UnitX()}, 0.1), false, true});
  const auto shadowed = virtual_scan(scene);
  const auto open = virtual_scan(single_pipe_scene({Point3::Zero()}));
  CHECK(shadowed.clouds.size() == 1);
  CHECK(shadowed.clouds[0].size() < open.clouds[0].size());
}

TEST_CASE("station validation") {
  ScanStation st;
  st.yaw_step_deg = 7.0;
  CHECK_THROWS_AS(st.validate(), PipeError);
  st.yaw_step_deg = 10.0;
  st.width = 1;
  CHECK_THROWS_AS(st.validate(), PipeError);
}

TEST_CASE("scan is deterministic under jitter seed") {
  ScanOptions opt;
  opt.jitter_sigma = 0.002;
  opt.seed = 9;
  const auto a = virtual_scan(single_pipe_scene({Point3::Zero()}), opt);
  const auto b = virtual_scan(single_pipe_scene({Point3::Zero()}), opt);
  REQUIRE(a.clouds[0].size() == b.clouds[0].size());
  CHECK(std::equal(a.clouds[0].points.begin(), a.clouds[0].points.end(), b.clouds[0].points.begin()));
}

TEST_CASE("hall dataset shape") {
  const Scene scene = hall_dataset({});
  CHECK(scene.pipes.size() == 51);
  CHECK(std::count_if(scene.pipes.begin(), scene.pipes.end(), [](const ScenePipe& p) { return p.bend; }) == 15);
  for (const auto& p : scene.pipes) {
    CHECK(p.spec.radius() >= 0.06);
    CHECK(p.spec.radius() <= 0.25);
    const double len = make_ground_truth(p.id, p.spec).axis_length;
    CHECK(len >= 0.5);
    CHECK(len <= 22.5 + 1e-9);
  }
}
