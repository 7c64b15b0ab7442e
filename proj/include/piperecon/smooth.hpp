#pragma once

#include "piperecon/types.hpp"

#include <string>
#include <vector>

namespace piperecon::smooth {

struct SmoothingParams {
  /// Smoothing weight w. The length term of the energy is w * voxel_size * length,
  /// so w = 1 lets the curve keep bends down to one voxel of curvature radius.
  double weight = 1.0;
  double voxel_size = 0.01;
  int max_outer_iterations = 500;
  /// Initial step, as a fraction of voxel_size; further capped by the explicit
  /// stability limit of the curvature term.
  double step_size = 0.25;
  /// Convergence threshold relative to the initial energy.
  double convergence_delta = 1e-6;
  /// Reparameterization spacing, as a fraction of voxel_size.
  double point_spacing = 0.25;
  /// Distance-field margin around the curve, in voxels.
  int band_voxels = 8;

  void validate() const;
};

/// Points at uniform arc-length intervals along the polyline. Endpoints are
/// kept; the final gap absorbs the remainder and lies in [0.5, 1.5) * spacing.
Polyline reparameterize(const Polyline& curve, double spacing);

/// Distance-mode grid: cells crossed by the curve are occupied (distance 0);
/// other cells hold the 26-neighbor Dijkstra distance to the nearest occupied
/// cell, with Euclidean step costs. Cells beyond the band hold the band limit.
VoxelGrid voxelize_curve(const Polyline& curve, double voxel_size, int margin_voxels = 8);

/// Trilinear interpolation of the distance field at p (clamped to the grid).
double sample_distance(const VoxelGrid& field, const Point3& p);

/// Trilinear interpolation of central-difference gradients at the cell centers.
Vec3 distance_gradient(const VoxelGrid& field, const Point3& p);

/// E = sum d(p_i) ds_i + length_weight * length, with trapezoid ds_i.
double curve_energy(const Polyline& curve, const VoxelGrid& field, double length_weight);

struct SmoothResult {
  Polyline curve;
  std::vector<double> energy_log;  // energy of every accepted iterate, initial first
  int iterations = 0;
  bool diverged = false;
  std::string warning;
};

/// Explicit gradient descent on the curve energy: interior points move by
/// step * (-grad d + w k N) and the curve is reparameterized after each step.
/// Endpoints never move. Steps that raise the energy are halved and retried.
SmoothResult smooth_curve(const Polyline& curve, const SmoothingParams& params);

/// Douglas-Peucker with epsilon = factor * mean_radius.
Polyline rdp_simplify(const Polyline& curve, double mean_radius, double factor = 0.6);

/// Douglas-Peucker with an explicit tolerance; points farther than epsilon
/// from the current chord segment are kept.
Polyline rdp_simplify_epsilon(const Polyline& curve, double epsilon);

}  // namespace piperecon::smooth
