#pragma once

#include "piperecon/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace piperecon::synth {

/// Pipe defined the way a game engine defines spline meshes: control points,
/// unit tangents at each control point, and an outer radius.
class PipeSpec {
 public:
  /// Tangents are normalized; a zero tangent falls back to the local chord.
  /// Throws invalid_input for < 2 points, radius <= 0, or zero total length.
  PipeSpec(std::vector<Point3> control_points, std::vector<Vec3> tangents, double radius);

  const std::vector<Point3>& control_points() const { return control_points_; }
  const std::vector<Vec3>& tangents() const { return tangents_; }
  double radius() const { return radius_; }

 private:
  std::vector<Point3> control_points_;
  std::vector<Vec3> tangents_;
  double radius_;
};

/// Piecewise cubic Hermite curve through the control points of a PipeSpec,
/// with an arc-length table for uniform resampling.
///
/// Each segment scales its unit end tangents by c * 2 tan(theta/4) / sin(theta/2),
/// c the chord and theta the turn between the tangents. That magnitude
/// reproduces a circular arc when the tangents are symmetric and reduces to
/// the chord for straight segments.
class HermiteSpline {
 public:
  explicit HermiteSpline(const PipeSpec& spec);

  double length() const { return arc_.back(); }
  Point3 point_at(double s) const;
  /// Unit tangent at arc length s.
  Vec3 tangent_at(double s) const;

 private:
  struct Segment {
    Point3 p0, p1;
    Vec3 m0, m1;
    Point3 eval(double u) const;
    Vec3 deriv(double u) const;
  };
  std::pair<int, double> locate(double s) const;

  std::vector<Segment> segments_;
  // Dense samples: segment index, local parameter, cumulative arc length.
  std::vector<int> seg_;
  std::vector<double> u_;
  std::vector<double> arc_;
};

/// Uniform arc-length resampling of the spline; n = ceil(length / spacing) intervals.
Polyline interpolate_spline(const PipeSpec& spec, double spacing);

/// Random points on the tube surface, count ~ density * 2 pi r L.
PointCloud sample_pipe_surface(const PipeSpec& spec, double areal_density, std::uint64_t seed);

struct ScanStation {
  Point3 position = Point3::Zero();
  double yaw_step_deg = 10.0;
  int width = 256;
  int height = 192;
  /// No camera intrinsics are claimed for the original rig; this is a free knob.
  double vfov_deg = 60.0;

  void validate() const;
};

struct ScenePipe {
  std::string id;
  PipeSpec spec;
  bool bend = false;      // classification for aggregate reports
  bool occluder = false;  // participates in occlusion but produces no output cloud
};

struct Scene {
  std::vector<ScenePipe> pipes;
  std::vector<ScanStation> stations;
};

struct ScanOptions {
  /// Spacing of the polyline that carries the analytic tube.
  double tube_spacing = 0.01;
  /// Isotropic Gaussian jitter on returned points; off by default.
  double jitter_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct ScanResult {
  /// One cloud per non-occluder pipe, in scene order.
  std::vector<PointCloud> clouds;
  std::vector<bool> empty;
  std::size_t rays_cast = 0;
  std::size_t hits = 0;
};

/// Pinhole-camera ray casting against the analytic tubes of all scene pipes.
/// Each ray keeps only its nearest hit, so back faces and occluded surface
/// never appear.
ScanResult virtual_scan(const Scene& scene, const ScanOptions& options = {});

/// Dense arc-length spline with analytic tangents; axis length is its polyline length.
GroundTruth make_ground_truth(const std::string& id, const PipeSpec& spec,
                              double spacing = 0.02);

/// Polyline carrying the tube used by the scanner for this spec.
Polyline tube_axis(const PipeSpec& spec, double tube_spacing);

}  // namespace piperecon::synth
