#include "piperecon/eval.hpp"

#include "piperecon/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace piperecon::eval {

VisibleBounds visible_bounds(std::span<const Point3> cloud, double margin) {
  if (cloud.empty()) throw invalid_input("visible bounds of an empty cloud");
  if (!(margin >= 0.0)) throw invalid_input("bounds margin must be non-negative");
  return Aabb::of(cloud).expanded(margin);
}

namespace {

struct Crossing {
  std::size_t column;
  double z;
  bool operator<(const Crossing& o) const {
    return column < o.column || (column == o.column && z < o.z);
  }
};

// Edge function test with a top-left tie rule, for a counter-clockwise triangle.
bool covers(const Point2& a, const Point2& b, const Point2& p) {
  const double w = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
  if (w > 0.0) return true;
  if (w < 0.0) return false;
  const bool top = a.y() == b.y() && b.x() < a.x();
  const bool left = b.y() < a.y();
  return top || left;
}

}  // namespace

VoxelGrid voxelize_solid(const TriMesh& mesh, const VisibleBounds& bounds, double voxel_size) {
  if (!(voxel_size > 0.0)) throw invalid_input("voxel size must be positive");
  if (!is_watertight(mesh)) {
    throw PipeError(ErrorKind::mismatch, "open mesh cannot be voxelized as solid");
  }
  VoxelGrid grid = VoxelGrid::covering(bounds, voxel_size, VoxelGrid::Mode::occupancy);
  const auto& dims = grid.dims();
  const Point3& o = grid.origin();
  const double h = voxel_size;

  std::vector<Crossing> crossings;
  for (const auto& t : mesh.triangles) {
    const Point3& p0 = mesh.vertices[t[0]];
    Point3 p1 = mesh.vertices[t[1]];
    Point3 p2 = mesh.vertices[t[2]];
    const double area2 = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p1.y() - p0.y()) * (p2.x() - p0.x());
    if (area2 == 0.0) continue;
    if (area2 < 0.0) std::swap(p1, p2);
    const Point2 a(p0.x(), p0.y()), b(p1.x(), p1.y()), c(p2.x(), p2.y());
    const double xmin = std::min({a.x(), b.x(), c.x()}), xmax = std::max({a.x(), b.x(), c.x()});
    const double ymin = std::min({a.y(), b.y(), c.y()}), ymax = std::max({a.y(), b.y(), c.y()});
    const int i0 = std::max(0, static_cast<int>(std::ceil((xmin - o.x()) / h - 0.5)));
    const int i1 = std::min(dims[0] - 1, static_cast<int>(std::floor((xmax - o.x()) / h - 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::ceil((ymin - o.y()) / h - 0.5)));
    const int j1 = std::min(dims[1] - 1, static_cast<int>(std::floor((ymax - o.y()) / h - 0.5)));
    if (i0 > i1 || j0 > j1) continue;
    const Vec3 normal = (p1 - p0).cross(p2 - p0);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const Point2 p(o.x() + (i + 0.5) * h, o.y() + (j + 0.5) * h);
        if (!covers(a, b, p) || !covers(b, c, p) || !covers(c, a, p)) continue;
        // plane: normal . (q - p0) = 0, solved for z
        const double z = p0.z() - (normal.x() * (p.x() - p0.x()) + normal.y() * (p.y() - p0.y())) / normal.z();
        crossings.push_back({static_cast<std::size_t>(j) * dims[0] + i, z});
      }
    }
  }
  std::sort(crossings.begin(), crossings.end());

  auto& occ = grid.occupancy();
  std::size_t s = 0;
  while (s < crossings.size()) {
    std::size_t e = s;
    while (e < crossings.size() && crossings[e].column == crossings[s].column) ++e;
    const std::size_t column = crossings[s].column;
    const int i = static_cast<int>(column % dims[0]);
    const int j = static_cast<int>(column / dims[0]);
    for (std::size_t q = s; q + 1 < e; q += 2) {
      const double z0 = crossings[q].z, z1 = crossings[q + 1].z;
      const int k0 = std::max(0, static_cast<int>(std::ceil((z0 - o.z()) / h - 0.5)));
      const int k1 = std::min(dims[2] - 1, static_cast<int>(std::floor((z1 - o.z()) / h - 0.5)));
      for (int k = k0; k <= k1; ++k) {
        const double zc = o.z() + (k + 0.5) * h;
        if (zc > z0 && zc < z1) occ[grid.index(i, j, k)] = 1;
      }
    }
    s = e;
  }
  return grid;
}

IouResult iou(const VoxelGrid& a, const VoxelGrid& b) {
  if (!a.same_layout(b)) throw PipeError(ErrorKind::mismatch, "IoU of grids with different layouts");
  std::size_t inter = 0, uni = 0;
  const auto& oa = a.occupancy();
  const auto& ob = b.occupancy();
  for (std::size_t i = 0; i < oa.size(); ++i) {
    inter += (oa[i] && ob[i]) ? 1 : 0;
    uni += (oa[i] || ob[i]) ? 1 : 0;
  }
  if (uni == 0) return {0.0, true};
  return {static_cast<double>(inter) / static_cast<double>(uni), false};
}

namespace {

double eccentric_terms(double d, double r, double union_sign) {
  if (!(r > 0.0) || !(d >= 0.0)) throw invalid_input("eccentricity needs r > 0 and d >= 0");
  if (d >= 2.0 * r) return 1.0;
  const double x = d / (2.0 * r);
  const double ac = std::acos(x);
  const double chord = x * std::sqrt(1.0 - x * x);
  return 1.0 - (ac - chord) / (std::numbers::pi - ac + union_sign * chord);
}

}  // namespace

double analytic_iou_eccentric(double d, double r, std::string* warning) {
  if (warning && d > 2.0 * r && r > 0.0) *warning = "centers farther apart than 2r; cylinders disjoint, loss clamped to 1";
  return eccentric_terms(d, r, +1.0);
}

double analytic_iou_eccentric_sign_variant(double d, double r) {
  return eccentric_terms(d, r, -1.0);
}

double radius_sensitivity(double delta_r, double r) {
  if (!(r > 0.0)) throw invalid_input("radius must be positive");
  return 2.0 * std::abs(delta_r) / r;
}

double length_sensitivity(double delta_h, double h) {
  if (!(h > 0.0)) throw invalid_input("length must be positive");
  return std::abs(delta_h) / h;
}

double clipped_length(const Polyline& line, const Aabb& box) {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const Point3& a = line[i - 1];
    const Vec3 d = line[i] - a;
    double t0 = 0.0, t1 = 1.0;
    bool inside = true;
    for (int ax = 0; ax < 3 && inside; ++ax) {
      if (d[ax] == 0.0) {
        inside = a[ax] >= box.min[ax] && a[ax] <= box.max[ax];
        continue;
      }
      double lo = (box.min[ax] - a[ax]) / d[ax];
      double hi = (box.max[ax] - a[ax]) / d[ax];
      if (lo > hi) std::swap(lo, hi);
      t0 = std::max(t0, lo);
      t1 = std::min(t1, hi);
      inside = t0 <= t1;
    }
    if (inside) total += (t1 - t0) * d.norm();
  }
  return total;
}

MetricsReport evaluate(const PipeModel& model, const GroundTruth& gt,
                       std::span<const Point3> cloud, std::size_t n_before_rdp,
                       const EvalParams& params) {
  if (n_before_rdp == 0) throw invalid_input("point count before RDP must be positive");
  const VisibleBounds bounds = visible_bounds(cloud, params.margin_voxels * params.voxel_size);

  std::vector<Vec3> gt_tangents = gt.tangents;
  if (gt_tangents.size() != gt.spline.size()) gt_tangents = polyline_tangents(gt.spline);
  for (auto& t : gt_tangents) t.normalize();
  const PipeModel gt_model{gt.spline, gt_tangents, gt.outer_radius, gt.axis_length};

  const VoxelGrid rec = voxelize_solid(recon::extrude_hull(model, params.hull), bounds, params.voxel_size);
  const VoxelGrid ref = voxelize_solid(recon::extrude_hull(gt_model, params.hull), bounds, params.voxel_size);
  const IouResult overlap = iou(rec, ref);

  MetricsReport report;
  report.iou = overlap.iou;
  report.union_empty = overlap.union_empty;
  report.radius_ratio = model.mean_radius / gt.outer_radius;
  const double gt_len = clipped_length(gt.spline, bounds);
  report.length_ratio = gt_len > 0.0 ? clipped_length(model.spline, bounds) / gt_len : 0.0;
  report.point_ratio = static_cast<double>(model.spline.size()) / static_cast<double>(n_before_rdp);
  return report;
}

}  // namespace piperecon::eval
