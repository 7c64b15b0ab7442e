#pragma once

#include "piperecon/types.hpp"

#include <Eigen/SparseCore>

#include <array>
#include <span>
#include <string>
#include <vector>

namespace piperecon::skeleton {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Weights and schedule of the Laplacian contraction. Weights are
/// dimensionless: the Laplacian carries raw cotangent weights, so the two
/// residual blocks have the same units and the balance is scale-free.
struct ContractionParams {
  double init_contraction_weight = 2.0;    // W_L at the first iteration
  double init_attraction_weight = 1.0;     // W_H at the first iteration
  double contraction_amplification = 3.0;  // W_L <- s_L * W_L per iteration
  int max_iterations = 20;
  int neighborhood_size = 16;
  /// Stop once the box volume shrinks by less than this ratio in one iteration.
  double convergence_ratio = 0.9;
  /// The stop test above applies only after the volume has dropped below this
  /// fraction of the input's.
  double onset_ratio = 0.5;
  double max_contraction_weight = 2048.0;
  double max_attraction_weight = 1e4;
  /// Clamp on summed cotangent weights. Once a neighborhood has collapsed onto a
  /// line its triangles are slivers whose cotangents run to the clamp.
  double max_cotangent = 3.0;

  void validate() const;
};

struct ContractedCloud {
  std::vector<Point3> points;  // same order and cardinality as the input
  int iterations_used = 0;
  /// Oriented box volume of the input followed by one entry per accepted iteration.
  std::vector<double> volume_history;
};

/// For each point, the triangles (i, a, b) of its local Delaunay one-ring,
/// stored as the (a, b) pairs.
using OneRings = std::vector<std::vector<std::array<int, 2>>>;

struct Laplacian {
  SparseMatrix matrix;
  OneRings rings;
  int effective_k = 0;
  std::vector<std::string> warnings;
};

/// One-rings from a Delaunay triangulation of each point's k nearest
/// neighbors projected onto their PCA tangent plane.
OneRings local_one_rings(std::span<const Point3> points, int k, int* effective_k = nullptr);

/// Symmetric cotangent Laplacian (L_ij = w_ij, L_ii = -sum w_ij) over fixed one-rings,
/// with weights evaluated at `points`.
SparseMatrix cotangent_laplacian(std::span<const Point3> points, const OneRings& rings,
                                 double max_cotangent = 1e4);

/// Sum of one-ring triangle areas per point.
std::vector<double> one_ring_areas(std::span<const Point3> points, const OneRings& rings);

Laplacian build_laplacian(std::span<const Point3> points, int k, double max_cotangent = 1e4);

/// Product of the extents along fixed axes (columns of `axes`).
double oriented_box_volume(std::span<const Point3> points, const Eigen::Matrix3d& axes);

/// Principal axes of a point set, largest variance first.
Eigen::Matrix3d principal_axes(std::span<const Point3> points);

/// Iterative Laplacian contraction. Each iteration solves the stacked system
/// [W_L L; W_H] P' = [0; W_H P] in the least-squares sense through its normal
/// equations. Iterations that would grow the box volume are rejected.
ContractedCloud contract(std::span<const Point3> points, const ContractionParams& params);

/// Thin a cloud to at most max_points by voxel bucketing. Each bucket keeps
/// the member closest to the bucket centroid, so survivors stay on the surface.
std::vector<Point3> downsample(std::span<const Point3> points, std::size_t max_points);

struct GraphParams {
  double sample_radius = 0.02;
  /// Components closer than this are bridged by their closest node pair.
  double bridge_distance = 0.5;
};

/// Farthest-point sampling at `sample_radius`; nodes whose spheres share a
/// contracted point are linked.
SkeletonGraph build_skeleton_graph(std::span<const Point3> contracted, const GraphParams& params);

/// Contract the globally shortest triangle edge to its midpoint until the graph
/// is triangle-free.
SkeletonGraph collapse_edges(const SkeletonGraph& graph);

/// Number of 3-cycles, by brute force over node triples.
std::size_t count_triangles(const SkeletonGraph& graph);

}  // namespace piperecon::skeleton
