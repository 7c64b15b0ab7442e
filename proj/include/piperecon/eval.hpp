#pragma once

#include "piperecon/recon.hpp"
#include "piperecon/types.hpp"

#include <span>
#include <string>

namespace piperecon::eval {

struct MetricsReport {
  std::string id;
  std::string stage;
  double iou = 0.0;
  double radius_ratio = 0.0;  // r_mean / r_gt
  double length_ratio = 0.0;  // l / l_gt, both clipped to the visible bounds
  double point_ratio = 0.0;   // N_RDP / N
  bool union_empty = false;
};

using VisibleBounds = Aabb;

VisibleBounds visible_bounds(std::span<const Point3> cloud, double margin);

/// Occupancy grid over `bounds`: a cell is set when its center is inside the
/// (watertight) mesh by ray parity along +z.
VoxelGrid voxelize_solid(const TriMesh& mesh, const VisibleBounds& bounds, double voxel_size);

struct IouResult {
  double iou = 0.0;
  bool union_empty = false;
};

/// |a and b| / |a or b| over grids with identical layout; 0 (flagged) for an empty union.
IouResult iou(const VoxelGrid& a, const VoxelGrid& b);

/// Loss of IoU between two equal circles whose centers are d apart:
/// 1 - lens / union with x = d / 2r,
///   lens  = acos(x) - x sqrt(1 - x^2)
///   union = pi - acos(x) + x sqrt(1 - x^2)   (both scaled by 2 r^2).
/// d > 2r clamps to 1 and sets `warning` when given.
double analytic_iou_eccentric(double d, double r, std::string* warning = nullptr);

/// The same expression with the union written as pi - acos(x) - x sqrt(1 - x^2).
/// Kept to document the sign difference; it disagrees with the true overlap
/// for all 0 < d < 2r.
double analytic_iou_eccentric_sign_variant(double d, double r);

/// First-order IoU loss predictions.
double radius_sensitivity(double delta_r, double r);
double length_sensitivity(double delta_h, double h);

/// Arc length of the part of the polyline inside the box.
double clipped_length(const Polyline& line, const Aabb& box);

struct EvalParams {
  double voxel_size = 0.01;
  double margin_voxels = 2.0;
  recon::HullParams hull{};
};

MetricsReport evaluate(const PipeModel& model, const GroundTruth& gt,
                       std::span<const Point3> cloud, std::size_t n_before_rdp,
                       const EvalParams& params = {});

}  // namespace piperecon::eval
