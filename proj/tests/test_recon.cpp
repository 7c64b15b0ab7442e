#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "piperecon/error.hpp"
#include "piperecon/recon.hpp"
#include "piperecon/synth.hpp"

#include <cmath>
#include <numbers>

using namespace piperecon;
using namespace piperecon::recon;

namespace {

// Cross-section area ratio of a regular s-gon inscribed in its circle.
double prism_ratio(int s) { return s / (2 * std::numbers::pi) * std::sin(2 * std::numbers::pi / s); }

}  // namespace

TEST_CASE("assemble a straight model") {
  const std::vector<double> radii{0.1, 0.1, 0.1};
  const PipeModel m = assemble_model(fixtures::line_x(0, 1, 11), radii);
  CHECK(m.axis_length == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.mean_radius == doctest::Approx(0.1));
  CHECK(std::abs(m.axis_length - polyline_length(m.spline)) < 1e-9);
  CHECK(m.tangents.size() == m.spline.size());
  CHECK_THROWS_AS(model_with_radius(fixtures::line_x(0, 1, 2), 0.0), PipeError);
}

TEST_CASE("capped straight hull volume") {
  const PipeModel m = model_with_radius(fixtures::line_x(0, 1, 21), 0.1);
  HullParams p;
  p.circumferential_segments = 64;
  const TriMesh mesh = extrude_hull(m, p);
  CHECK_NOTHROW(validate_mesh(mesh));
  CHECK(is_watertight(mesh));
  const double cylinder = std::numbers::pi * 0.01;
  CHECK(std::abs(mesh_volume(mesh) - cylinder) < 0.01 * cylinder);
}

TEST_CASE("hull volume converges with the segment count") {
  // Frozen from the closed form (s / 2 pi) sin(2 pi / s).
  const std::pair<int, double> expected[] = {{8, 0.9003163161571061},
                                             {16, 0.9744953584044327},
                                             {32, 0.9935868511442058},
                                             {64, 0.9983943930356184},
                                             {128, 0.9995984531496791}};
  const PipeModel m = model_with_radius(fixtures::line_x(0, 2, 5), 0.15);
  const double cylinder = std::numbers::pi * 0.15 * 0.15 * 2;
  double prev_error = 1.0;
  for (const auto& [s, ratio] : expected) {
    CHECK(prism_ratio(s) == doctest::Approx(ratio).epsilon(1e-14));
    HullParams p;
    p.circumferential_segments = s;
    const double v = mesh_volume(extrude_hull(m, p));
    CHECK(v / cylinder == doctest::Approx(ratio).epsilon(1e-10));
    CHECK(1.0 - v / cylinder < prev_error);
    prev_error = 1.0 - v / cylinder;
  }
}

TEST_CASE("hull vertices sit on their rings") {
  const auto spec = fixtures::quarter_bend_spec(0.5, 0.1);
  const Polyline axis = synth::interpolate_spline(spec, 0.02);
  const PipeModel m = model_with_radius(axis, 0.1);
  const HullParams p;
  const TriMesh mesh = extrude_hull(m, p);
  CHECK(is_watertight(mesh));
  CHECK(mesh_volume(mesh) > 0.0);
  const int segs = p.circumferential_segments;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    for (int s = 0; s < segs; ++s) {
      const Vec3 d = mesh.vertices[i * segs + s] - axis[i];
      CHECK(std::abs(d.norm() - 0.1) < 1e-9);
      CHECK(std::abs(d.dot(m.tangents[i])) < 1e-9);
    }
  }
  // No two non-adjacent rings touch when the bend radius exceeds the pipe radius.
  double closest = 1e9;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    for (std::size_t j = i + 2; j < axis.size(); ++j) {
      for (int s = 0; s < segs; ++s) {
        for (int t = 0; t < segs; ++t) {
          closest = std::min(closest, (mesh.vertices[i * segs + s] - mesh.vertices[j * segs + t]).norm());
        }
      }
    }
  }
  CHECK(closest > 0.0);
}

TEST_CASE("uncapped hulls are open") {
  HullParams p;
  p.cap_ends = false;
  CHECK_FALSE(is_watertight(extrude_hull(model_with_radius(fixtures::line_x(0, 1, 3), 0.1), p)));
}

TEST_CASE("extrusion is rigid equivariant") {
  const auto t = fixtures::some_rigid_motion();
  const Polyline axis = synth::interpolate_spline(fixtures::quarter_bend_spec(0.5, 0.1), 0.05);
  const PipeModel a = model_with_radius(axis, 0.1);
  const PipeModel b = model_with_radius(Polyline(fixtures::transformed(axis.points(), t)), 0.1);
  const TriMesh ma = extrude_hull(a), mb = extrude_hull(b);
  CHECK(mesh_volume(mb) == doctest::Approx(mesh_volume(ma)).epsilon(1e-9));
  const int segs = HullParams{}.circumferential_segments;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    for (int s = 0; s < segs; ++s) {
      CHECK(std::abs((mb.vertices[i * segs + s] - b.spline[i]).norm() - 0.1) < 1e-9);
    }
  }
}

TEST_CASE("hull parameters are validated") {
  HullParams p;
  p.circumferential_segments = 2;
  CHECK_THROWS_AS(extrude_hull(model_with_radius(fixtures::line_x(0, 1, 3), 0.1), p), PipeError);
}
