#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace piperecon {

using Point3 = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Point2 = Eigen::Vector2d;

/// Minimum separation between consecutive polyline points, in meters.
inline constexpr double kMinPointSeparation = 1e-9;

bool is_finite(const Point3& p);

struct PointCloud {
  std::vector<Point3> points;
  std::string instance_id;
  std::string class_label = "pipe";

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Throws invalid_input if any coordinate is NaN or infinite.
void require_finite(const PointCloud& cloud);

/// Undirected graph over skeleton nodes. Edges are stored with first < second.
class SkeletonGraph {
 public:
  using Edge = std::pair<int, int>;

  SkeletonGraph() = default;
  /// Validates ranges and rejects self-loops; duplicate edges are rejected too.
  SkeletonGraph(std::vector<Point3> nodes, std::vector<Edge> edges);

  const std::vector<Point3>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  std::vector<std::vector<int>> adjacency() const;

 private:
  std::vector<Point3> nodes_;
  std::vector<Edge> edges_;
};

/// Ordered sequence of at least two points with distinct neighbors.
class Polyline {
 public:
  explicit Polyline(std::vector<Point3> points);

  /// Drops consecutive points closer than `tolerance` before validating.
  static Polyline dedup(std::span<const Point3> points, double tolerance = kMinPointSeparation);

  const std::vector<Point3>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Point3& operator[](std::size_t i) const { return points_[i]; }
  const Point3& front() const { return points_.front(); }
  const Point3& back() const { return points_.back(); }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  Polyline reversed() const;

 private:
  std::vector<Point3> points_;
};

double polyline_length(const Polyline& p);

/// Central-difference unit tangents; one-sided at the two endpoints.
std::vector<Vec3> polyline_tangents(const Polyline& p);

/// Cumulative arc length at each vertex; first entry 0.
std::vector<double> cumulative_length(const Polyline& p);

double point_segment_distance(const Point3& p, const Point3& a, const Point3& b);
double point_polyline_distance(const Point3& p, const Polyline& line);

struct PipeModel {
  Polyline spline;
  std::vector<Vec3> tangents;
  double mean_radius = 0.0;
  double axis_length = 0.0;
};

struct GroundTruth {
  std::string id;
  Polyline spline;
  std::vector<Vec3> tangents;
  double outer_radius = 0.0;
  double axis_length = 0.0;
};

struct TriMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<int, 3>> triangles;
};

/// Throws invalid_input on out-of-range indices or zero-area triangles.
void validate_mesh(const TriMesh& mesh);

/// True when every undirected edge has exactly two incident triangles.
bool is_watertight(const TriMesh& mesh);

/// Signed volume by tetrahedra against the origin; positive for outward winding.
double mesh_volume(const TriMesh& mesh);

struct Aabb {
  Point3 min;
  Point3 max;

  static Aabb of(std::span<const Point3> points);
  Aabb expanded(double margin) const;
  bool contains(const Point3& p) const;
  Vec3 extent() const { return max - min; }
};

/// Regular grid. Occupancy mode keeps one flag per cell; distance mode
/// additionally stores one scalar distance per cell.
class VoxelGrid {
 public:
  enum class Mode { occupancy, distance };

  static constexpr std::int64_t kMaxCells = 1'000'000'000;

  VoxelGrid(Point3 origin, double voxel_size, std::array<int, 3> dims, Mode mode);

  /// Grid covering `box`; cell count rounded up per axis.
  static VoxelGrid covering(const Aabb& box, double voxel_size, Mode mode);

  const Point3& origin() const { return origin_; }
  double voxel_size() const { return voxel_size_; }
  const std::array<int, 3>& dims() const { return dims_; }
  Mode mode() const { return mode_; }
  std::size_t cell_count() const { return occupancy_.size(); }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
  }
  bool in_range(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_[0] && j < dims_[1] && k < dims_[2];
  }
  Point3 center(int i, int j, int k) const;
  /// Cell containing p (may be out of range).
  std::array<int, 3> cell_of(const Point3& p) const;

  std::vector<std::uint8_t>& occupancy() { return occupancy_; }
  const std::vector<std::uint8_t>& occupancy() const { return occupancy_; }
  std::vector<float>& distances() { return distances_; }
  const std::vector<float>& distances() const { return distances_; }

  std::size_t occupied_count() const;
  bool same_layout(const VoxelGrid& other) const;

 private:
  Point3 origin_;
  double voxel_size_;
  std::array<int, 3> dims_;
  Mode mode_;
  std::vector<std::uint8_t> occupancy_;
  std::vector<float> distances_;
};

}  // namespace piperecon
