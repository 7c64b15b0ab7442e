#pragma once

#include "piperecon/types.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace piperecon::refine {

/// Shortest paths between every pair of degree-1 nodes; returns the longest of
/// them. Equal lengths resolve to the lexicographically smallest endpoint pair.
/// Leaves in different components are never paired.
Polyline longest_path(const SkeletonGraph& graph);

struct ElongationParams {
  double search_distance = 0.5;
  double spacing = 0.02;
  /// Lateral tube half-width as a multiple of the radius estimate.
  double tube_factor = 1.5;
};

/// Extend both ends along the direction of their last two points, as far as
/// the farthest cloud point inside the search ball, the forward half-space and
/// the lateral tube.
Polyline elongate(const Polyline& skeleton, std::span<const Point3> cloud, double radius_estimate,
                  const ElongationParams& params = {});

struct RollingSphereParams {
  int min_inlier_points = 20;  // m
  int max_growth_iterations = 10;
  double growth_factor = 1.2;
  int ransac_iterations = 200;
  double ransac_inlier_threshold = 0.005;
  double initial_radius = 0.1;
  /// Corrected points closer than this to a kept point are dropped as duplicates.
  double duplicate_tolerance = 1e-6;

  void validate() const;
};

struct CircleFit {
  Point2 center;
  double radius = 0.0;
  int inlier_count = 0;
  double rms_residual = 0.0;
  std::vector<int> inliers;
};

/// Circle through three points; nullopt when they are collinear.
std::optional<std::pair<Point2, double>> circumcircle(const Point2& a, const Point2& b,
                                                      const Point2& c);

/// Algebraic (Taubin) least-squares circle through a point set.
std::optional<std::pair<Point2, double>> fit_circle_algebraic(std::span<const Point2> points);

/// RANSAC over 3-point hypotheses, then the best consensus set is refit
/// algebraically and polished by Gauss-Newton on geometric residuals.
CircleFit fit_circle_2d_ransac(std::span<const Point2> points, const RollingSphereParams& params,
                               std::mt19937_64& rng);

struct RecenterResult {
  Polyline skeleton;
  std::vector<double> radii;      // one per successful circle fit
  std::size_t deleted_points = 0;  // under-populated spheres or failed fits
  std::size_t duplicate_points = 0;
};

/// Growing-sphere recentering: each skeleton point gathers the cloud points in
/// a sphere (grown until at least m are inside), projects them on the plane
/// normal to the local skeleton direction, and moves to the fitted circle
/// center. Each fitted radius seeds the next sphere.
RecenterResult rolling_sphere_recenter(const Polyline& skeleton, std::span<const Point3> cloud,
                                       const RollingSphereParams& params, std::mt19937_64& rng);

double mean_radius(std::span<const double> radii);

/// 90th percentile of cloud distances to the skeleton; a coarse tube radius
/// before any circle fit exists.
double rough_radius(const Polyline& skeleton, std::span<const Point3> cloud);

}  // namespace piperecon::refine
