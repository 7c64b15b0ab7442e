#pragma once

#include "piperecon/synth.hpp"
#include "piperecon/types.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

using piperecon::Point3;
using piperecon::Polyline;
using piperecon::Vec3;

inline piperecon::synth::PipeSpec straight_spec(double length, double radius) {
  return {{Point3::Zero(), Point3(length, 0, 0)}, {Vec3::UnitX(), Vec3::UnitX()}, radius};
}

/// Quarter circle of bend radius R in the xy plane, from (0,0,0) heading +x to (R,R,0) heading +y.
inline piperecon::synth::PipeSpec quarter_bend_spec(double bend_radius, double radius) {
  const double c = std::cos(std::numbers::pi / 4), s = std::sin(std::numbers::pi / 4);
  const double R = bend_radius;
  return {{Point3::Zero(), Point3(R * s, R * (1 - c), 0), Point3(R, R, 0)},
          {Vec3::UnitX(), Vec3(c, s, 0), Vec3::UnitY()},
          radius};
}

/// Points on a cylinder around the x axis on a regular (axial, angular) lattice
/// with a small deterministic shuffle. Angles cover [a0, a1).
inline std::vector<Point3> cylinder_lattice(double length, double radius, int axial, int around,
                                            double a0 = 0.0, double a1 = 2 * std::numbers::pi,
                                            std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);
  std::vector<Point3> pts;
  for (int i = 0; i < axial; ++i) {
    for (int j = 0; j < around; ++j) {
      const double x = (i + 0.5 + jitter(rng)) * length / axial;
      const double a = a0 + (j + 0.5 + jitter(rng)) * (a1 - a0) / around;
      pts.emplace_back(x, radius * std::cos(a), radius * std::sin(a));
    }
  }
  return pts;
}

/// One-sided scan of a cylinder around the x axis: only the half facing -z.
inline std::vector<Point3> half_cylinder(double length, double radius, int axial, int around,
                                         std::uint64_t seed = 1) {
  return cylinder_lattice(length, radius, axial, around, std::numbers::pi, 2 * std::numbers::pi, seed);
}

inline Polyline line_x(double x0, double x1, int n, double y = 0.0, double z = 0.0) {
  std::vector<Point3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(x0 + (x1 - x0) * i / (n - 1), y, z);
  return Polyline(std::move(pts));
}

inline double axis_distance_x(const Point3& p) { return std::hypot(p.y(), p.z()); }

inline Eigen::Isometry3d some_rigid_motion() {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.rotate(Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()));
  t.pretranslate(Vec3(3.0, -1.5, 0.25));
  return t;
}

inline std::vector<Point3> transformed(const std::vector<Point3>& pts, const Eigen::Isometry3d& t) {
  std::vector<Point3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(t * p);
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("piperecon_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
