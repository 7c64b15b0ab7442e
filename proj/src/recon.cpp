#include "piperecon/recon.hpp"

#include "piperecon/error.hpp"
#include "piperecon/refine.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace piperecon::recon {

void HullParams::validate() const {
  if (circumferential_segments < 8) throw invalid_input("hull needs at least 8 segments");
}

PipeModel model_with_radius(const Polyline& spline, double radius) {
  if (!(radius > 0.0)) throw invalid_input("pipe model radius must be positive");
  return PipeModel{spline, polyline_tangents(spline), radius, polyline_length(spline)};
}

PipeModel assemble_model(const Polyline& spline, std::span<const double> radii) {
  return model_with_radius(spline, refine::mean_radius(radii));
}

TriMesh extrude_hull(const PipeModel& model, const HullParams& params) {
  params.validate();
  const auto& pts = model.spline.points();
  const auto& tan = model.tangents;
  const std::size_t n = pts.size();
  if (tan.size() != n) throw invalid_input("pipe model needs one tangent per spline point");
  const int segs = params.circumferential_segments;
  const double r = model.mean_radius;

  for (std::size_t i = 1; i < n; ++i) {
    if (tan[i].dot(tan[i - 1]) < -1.0 + 1e-6) {
      throw invalid_input("cusp in spline at point " + std::to_string(i));
    }
  }

  // Parallel transport: rotate the previous normal by the minimal rotation
  // taking the previous tangent onto the current one.
  std::vector<Vec3> normal(n);
  {
    const Vec3& t0 = tan[0];
    const Vec3 ref = std::abs(t0.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    normal[0] = (ref - ref.dot(t0) * t0).normalized();
  }
  for (std::size_t i = 1; i < n; ++i) {
    const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(tan[i - 1], tan[i]);
    Vec3 m = q * normal[i - 1];
    m = (m - m.dot(tan[i]) * tan[i]).normalized();
    normal[i] = m;
  }

  TriMesh mesh;
  mesh.vertices.reserve(n * segs + 2);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 b = tan[i].cross(normal[i]);
    for (int s = 0; s < segs; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / segs;
      mesh.vertices.push_back(pts[i] + r * (std::cos(phi) * normal[i] + std::sin(phi) * b));
    }
  }
  auto vid = [segs](std::size_t ring, int s) {
    return static_cast<int>(ring * segs + ((s % segs) + segs) % segs);
  };
  // (n, b, t) is right-handed, so increasing phi runs counter-clockwise seen
  // from the tip of t; this winding gives outward normals on the side wall.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (int s = 0; s < segs; ++s) {
      const int a = vid(i, s), b = vid(i, s + 1), c = vid(i + 1, s + 1), d = vid(i + 1, s);
      mesh.triangles.push_back({a, b, c});
      mesh.triangles.push_back({a, c, d});
    }
  }
  if (params.cap_ends) {
    const int start = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(pts.front());
    const int finish = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(pts.back());
    for (int s = 0; s < segs; ++s) {
      mesh.triangles.push_back({start, vid(0, s + 1), vid(0, s)});
      mesh.triangles.push_back({finish, vid(n - 1, s), vid(n - 1, s + 1)});
    }
  }
  return mesh;
}

}  // namespace piperecon::recon
