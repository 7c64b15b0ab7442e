#include "piperecon/types.hpp"

#include "piperecon/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <limits>
#include <cmath>
#include <map>
#include <set>

namespace piperecon {

bool is_finite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

void require_finite(const PointCloud& cloud) {
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!is_finite(cloud.points[i])) {
      throw invalid_input("point " + std::to_string(i) + " of cloud '" + cloud.instance_id +
                          "' has a non-finite coordinate");
    }
  }
}

SkeletonGraph::SkeletonGraph(std::vector<Point3> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)) {
  const int n = static_cast<int>(nodes_.size());
  std::set<Edge> seen;
  edges_.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n) {
      throw invalid_input("skeleton edge index out of range");
    }
    if (a == b) throw invalid_input("skeleton edge is a self-loop");
    if (a > b) std::swap(a, b);
    if (!seen.insert({a, b}).second) throw invalid_input("duplicate skeleton edge");
    edges_.emplace_back(a, b);
  }
}

std::vector<std::vector<int>> SkeletonGraph::adjacency() const {
  std::vector<std::vector<int>> adj(nodes_.size());
  for (const auto& [a, b] : edges_) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return adj;
}

Polyline::Polyline(std::vector<Point3> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw invalid_input("polyline needs at least 2 points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!is_finite(points_[i])) throw invalid_input("polyline point is not finite");
    if (i > 0 && (points_[i] - points_[i - 1]).norm() <= kMinPointSeparation) {
      throw invalid_input("polyline has coincident consecutive points at index " +
                          std::to_string(i));
    }
  }
}

Polyline Polyline::dedup(std::span<const Point3> points, double tolerance) {
  std::vector<Point3> kept;
  kept.reserve(points.size());
  for (const auto& p : points) {
    if (kept.empty() || (p - kept.back()).norm() > std::max(tolerance, kMinPointSeparation)) {
      kept.push_back(p);
    }
  }
  return Polyline(std::move(kept));
}

Polyline Polyline::reversed() const {
  return Polyline(std::vector<Point3>(points_.rbegin(), points_.rend()));
}

double polyline_length(const Polyline& p) {
  double total = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) total += (p[i] - p[i - 1]).norm();
  return total;
}

std::vector<Vec3> polyline_tangents(const Polyline& p) {
  const std::size_t n = p.size();
  std::vector<Vec3> tangents(n);
  tangents.front() = (p[1] - p[0]).normalized();
  tangents.back() = (p[n - 1] - p[n - 2]).normalized();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    Vec3 d = p[i + 1] - p[i - 1];
    // A hairpin can cancel the central difference; fall back to the incoming segment.
    if (d.norm() <= kMinPointSeparation) d = p[i] - p[i - 1];
    tangents[i] = d.normalized();
  }
  return tangents;
}

std::vector<double> cumulative_length(const Polyline& p) {
  std::vector<double> s(p.size(), 0.0);
  for (std::size_t i = 1; i < p.size(); ++i) s[i] = s[i - 1] + (p[i] - p[i - 1]).norm();
  return s;
}

double point_segment_distance(const Point3& p, const Point3& a, const Point3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double point_polyline_distance(const Point3& p, const Polyline& line) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < line.size(); ++i) {
    best = std::min(best, point_segment_distance(p, line[i - 1], line[i]));
  }
  return best;
}

void validate_mesh(const TriMesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (int v : t) {
      if (v < 0 || v >= n) throw invalid_input("mesh triangle index out of range");
    }
    const Vec3 c = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                       .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    if (c.norm() == 0.0) throw invalid_input("mesh has a zero-area triangle");
  }
}

bool is_watertight(const TriMesh& mesh) {
  std::map<std::pair<int, int>, int> uses;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++uses[{a, b}];
    }
  }
  if (uses.empty()) return false;
  return std::all_of(uses.begin(), uses.end(), [](const auto& kv) { return kv.second == 2; });
}

double mesh_volume(const TriMesh& mesh) {
  double six_v = 0.0;
  for (const auto& t : mesh.triangles) {
    const auto& a = mesh.vertices[t[0]];
    const auto& b = mesh.vertices[t[1]];
    const auto& c = mesh.vertices[t[2]];
    six_v += a.dot(b.cross(c));
  }
  return six_v / 6.0;
}

Aabb Aabb::of(std::span<const Point3> points) {
  if (points.empty()) throw invalid_input("bounding box of an empty point set");
  Aabb box{points.front(), points.front()};
  for (const auto& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

Aabb Aabb::expanded(double margin) const {
  const Vec3 m = Vec3::Constant(margin);
  return {min - m, max + m};
}

bool Aabb::contains(const Point3& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

VoxelGrid::VoxelGrid(Point3 origin, double voxel_size, std::array<int, 3> dims, Mode mode)
    : origin_(std::move(origin)), voxel_size_(voxel_size), dims_(dims), mode_(mode) {
  if (!(voxel_size > 0.0)) throw invalid_input("voxel size must be positive");
  std::int64_t cells = 1;
  for (int d : dims) {
    if (d <= 0) throw invalid_input("voxel grid dimensions must be positive");
    cells *= d;
  }
  if (cells > kMaxCells) {
    throw invalid_input("voxel grid of " + std::to_string(cells) +
                        " cells exceeds the budget; use a larger voxel size");
  }
  occupancy_.assign(static_cast<std::size_t>(cells), 0);
  if (mode_ == Mode::distance) {
    distances_.assign(static_cast<std::size_t>(cells), std::numeric_limits<float>::infinity());
  }
}

VoxelGrid VoxelGrid::covering(const Aabb& box, double voxel_size, Mode mode) {
  if (!(voxel_size > 0.0)) throw invalid_input("voxel size must be positive");
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    const double cells = std::ceil((box.max[a] - box.min[a]) / voxel_size);
    if (cells > static_cast<double>(kMaxCells)) {
      throw invalid_input("voxel grid exceeds the budget; use a larger voxel size");
    }
    dims[a] = std::max(1, static_cast<int>(cells));
  }
  const double total = static_cast<double>(dims[0]) * dims[1] * dims[2];
  if (total > static_cast<double>(kMaxCells)) {
    throw invalid_input("voxel grid of " + std::to_string(static_cast<long long>(total)) +
                        " cells exceeds the budget; use a larger voxel size");
  }
  return VoxelGrid(box.min, voxel_size, dims, mode);
}

Point3 VoxelGrid::center(int i, int j, int k) const {
  return origin_ + voxel_size_ * Vec3(i + 0.5, j + 0.5, k + 0.5);
}

std::array<int, 3> VoxelGrid::cell_of(const Point3& p) const {
  const Vec3 q = (p - origin_) / voxel_size_;
  return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y())),
          static_cast<int>(std::floor(q.z()))};
}

std::size_t VoxelGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(occupancy_.begin(), occupancy_.end(), 1));
}

bool VoxelGrid::same_layout(const VoxelGrid& other) const {
  return dims_ == other.dims_ && voxel_size_ == other.voxel_size_ && origin_ == other.origin_;
}

}  // namespace piperecon
