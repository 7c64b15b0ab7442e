#include "piperecon/synth.hpp"

#include "piperecon/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace piperecon::synth {

PipeSpec::PipeSpec(std::vector<Point3> control_points, std::vector<Vec3> tangents, double radius)
    : control_points_(std::move(control_points)), tangents_(std::move(tangents)), radius_(radius) {
  if (control_points_.size() < 2) throw invalid_input("pipe spec needs at least 2 control points");
  if (tangents_.size() != control_points_.size()) {
    throw invalid_input("pipe spec needs one tangent per control point");
  }
  if (!(radius_ > 0.0) || !std::isfinite(radius_)) {
    throw invalid_input("pipe radius must be positive");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < control_points_.size(); ++i) {
    if (!is_finite(control_points_[i]) || !is_finite(tangents_[i])) {
      throw invalid_input("pipe spec has a non-finite value");
    }
    if (i > 0) {
      const double chord = (control_points_[i] - control_points_[i - 1]).norm();
      if (chord <= kMinPointSeparation) {
        throw invalid_input("pipe spec has coincident consecutive control points");
      }
      total += chord;
    }
  }
  if (total <= kMinPointSeparation) throw invalid_input("pipe spec has zero length");
  const std::size_t n = control_points_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (tangents_[i].norm() > 1e-12) {
      tangents_[i].normalize();
      continue;
    }
    const Vec3 chord = i + 1 < n ? control_points_[i + 1] - control_points_[i]
                                 : control_points_[i] - control_points_[i - 1];
    tangents_[i] = chord.normalized();
  }
}

Point3 HermiteSpline::Segment::eval(double u) const {
  const double u2 = u * u, u3 = u2 * u;
  return (2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * p1 +
         (u3 - u2) * m1;
}

Vec3 HermiteSpline::Segment::deriv(double u) const {
  const double u2 = u * u;
  return (6 * u2 - 6 * u) * p0 + (3 * u2 - 4 * u + 1) * m0 + (-6 * u2 + 6 * u) * p1 +
         (3 * u2 - 2 * u) * m1;
}

HermiteSpline::HermiteSpline(const PipeSpec& spec) {
  const auto& pts = spec.control_points();
  const auto& tan = spec.tangents();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double chord = (pts[i + 1] - pts[i]).norm();
    const double theta = std::acos(std::clamp(tan[i].dot(tan[i + 1]), -1.0, 1.0));
    double magnitude = chord;
    if (theta > 1e-6) {
      const double capped = std::min(theta, 0.95 * std::numbers::pi);
      magnitude = chord * 2.0 * std::tan(capped / 4.0) / std::sin(capped / 2.0);
    }
    segments_.push_back({pts[i], pts[i + 1], magnitude * tan[i], magnitude * tan[i + 1]});
  }

  seg_.push_back(0);
  u_.push_back(0.0);
  arc_.push_back(0.0);
  Point3 prev = segments_.front().p0;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const double chord = (segments_[i].p1 - segments_[i].p0).norm();
    const int samples = std::clamp(static_cast<int>(std::ceil(chord / 0.002)), 64, 50000);
    for (int k = 1; k <= samples; ++k) {
      const double u = static_cast<double>(k) / samples;
      const Point3 p = segments_[i].eval(u);
      seg_.push_back(static_cast<int>(i));
      u_.push_back(u);
      arc_.push_back(arc_.back() + (p - prev).norm());
      prev = p;
    }
  }
}

std::pair<int, double> HermiteSpline::locate(double s) const {
  s = std::clamp(s, 0.0, length());
  auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
  std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - arc_.begin()), arc_.size() - 1);
  const std::size_t lo = hi == 0 ? 0 : hi - 1;
  if (hi == lo) return {seg_[lo], u_[lo]};
  const int seg = seg_[hi];
  const double u_lo = seg_[lo] == seg ? u_[lo] : 0.0;
  const double span = arc_[hi] - arc_[lo];
  const double t = span > 0.0 ? (s - arc_[lo]) / span : 0.0;
  return {seg, u_lo + t * (u_[hi] - u_lo)};
}

Point3 HermiteSpline::point_at(double s) const {
  if (s <= 0.0) return segments_.front().p0;
  if (s >= length()) return segments_.back().p1;
  const auto [seg, u] = locate(s);
  return segments_[seg].eval(u);
}

Vec3 HermiteSpline::tangent_at(double s) const {
  const auto [seg, u] = locate(s);
  Vec3 d = segments_[seg].deriv(u);
  if (d.norm() < 1e-12) d = segments_[seg].p1 - segments_[seg].p0;
  return d.normalized();
}

Polyline interpolate_spline(const PipeSpec& spec, double spacing) {
  if (!(spacing > 0.0)) throw invalid_input("spline spacing must be positive");
  const HermiteSpline spline(spec);
  const double length = spline.length();
  const long n = std::max(1L, static_cast<long>(std::ceil(length / spacing - 1e-9)));
  std::vector<Point3> pts;
  pts.reserve(static_cast<std::size_t>(n) + 1);
  pts.push_back(spec.control_points().front());
  for (long k = 1; k < n; ++k) pts.push_back(spline.point_at(length * k / n));
  pts.push_back(spec.control_points().back());
  return Polyline(std::move(pts));
}

Polyline tube_axis(const PipeSpec& spec, double tube_spacing) {
  return interpolate_spline(spec, std::min(tube_spacing, spec.radius()));
}

namespace {

// Any unit vector orthogonal to t.
Vec3 any_normal(const Vec3& t) {
  const Vec3 ref = std::abs(t.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  return (ref - ref.dot(t) * t).normalized();
}

}  // namespace

PointCloud sample_pipe_surface(const PipeSpec& spec, double areal_density, std::uint64_t seed) {
  if (!(areal_density > 0.0)) throw invalid_input("sampling density must be positive");
  const HermiteSpline spline(spec);
  const double r = spec.radius();
  const double area = 2.0 * std::numbers::pi * r * spline.length();
  const auto count = static_cast<std::size_t>(std::llround(areal_density * area));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> along(0.0, spline.length());
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double s = along(rng);
    const double phi = angle(rng);
    const Vec3 t = spline.tangent_at(s);
    const Vec3 n = any_normal(t);
    const Vec3 b = t.cross(n);
    cloud.points.push_back(spline.point_at(s) + r * (std::cos(phi) * n + std::sin(phi) * b));
  }
  return cloud;
}

void ScanStation::validate() const {
  if (!is_finite(position)) throw invalid_input("station position must be finite");
  if (!(yaw_step_deg > 0.0) || yaw_step_deg > 360.0) {
    throw invalid_input("station yaw step must be in (0, 360] degrees");
  }
  const double steps = 360.0 / yaw_step_deg;
  if (std::abs(steps - std::round(steps)) > 1e-9) {
    throw invalid_input("station yaw step must divide 360 degrees evenly");
  }
  if (width < 2 || height < 2) throw invalid_input("station resolution must be at least 2x2");
  if (!(vfov_deg > 0.0 && vfov_deg < 180.0)) {
    throw invalid_input("station vertical field of view must be in (0, 180) degrees");
  }
}

namespace {

struct Capsule {
  int pipe;       // index into the scene's tube list
  int segment;    // segment index within that tube's axis
  Point3 a, b;
  double radius;
  bool joint_sphere;  // interior joint at `a`
};

struct Tube {
  Polyline axis;
  double radius;
  int window;  // segments that can lie within one radius of a given segment
};

struct BvhNode {
  Eigen::AlignedBox3d box;
  int left = -1, right = -1;
  int begin = 0, end = 0;
};

class CapsuleBvh {
 public:
  explicit CapsuleBvh(std::vector<Capsule> caps) : caps_(std::move(caps)) {
    boxes_.reserve(caps_.size());
    for (const auto& c : caps_) {
      Eigen::AlignedBox3d box(c.a.cwiseMin(c.b), c.a.cwiseMax(c.b));
      box.min().array() -= c.radius;
      box.max().array() += c.radius;
      boxes_.push_back(box);
    }
    order_.resize(caps_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    if (!caps_.empty()) build(0, static_cast<int>(caps_.size()));
  }

  template <typename Visit>
  void traverse(const Point3& origin, const Vec3& dir, double& best_t, Visit&& visit) const {
    if (nodes_.empty()) return;
    const Vec3 inv = dir.cwiseInverse();
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const BvhNode& node = nodes_[stack[--top]];
      if (!slab(node.box, origin, inv, best_t)) continue;
      if (node.left < 0) {
        for (int i = node.begin; i < node.end; ++i) visit(caps_[order_[i]], best_t);
        continue;
      }
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }

 private:
  static bool slab(const Eigen::AlignedBox3d& box, const Point3& o, const Vec3& inv, double t_max) {
    double t0 = 0.0, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
      double lo = (box.min()[a] - o[a]) * inv[a];
      double hi = (box.max()[a] - o[a]) * inv[a];
      if (std::isnan(lo) || std::isnan(hi)) {
        // ray parallel to the slab and exactly on its boundary plane
        if (o[a] < box.min()[a] || o[a] > box.max()[a]) return false;
        continue;
      }
      if (lo > hi) std::swap(lo, hi);
      t0 = std::max(t0, lo);
      t1 = std::min(t1, hi);
      if (t0 > t1) return false;
    }
    return true;
  }

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    Eigen::AlignedBox3d box;
    for (int i = begin; i < end; ++i) box.extend(boxes_[order_[i]]);
    nodes_[id].box = box;
    if (end - begin <= 4) {
      nodes_[id].begin = begin;
      nodes_[id].end = end;
      return id;
    }
    int axis = 0;
    box.sizes().maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int x, int y) {
                       return boxes_[x].center()[axis] < boxes_[y].center()[axis];
                     });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  std::vector<Capsule> caps_;
  std::vector<Eigen::AlignedBox3d> boxes_;
  std::vector<int> order_;
  std::vector<BvhNode> nodes_;
};

constexpr double kRayEpsilon = 1e-9;
constexpr double kTubeTolerance = 1e-7;

// A hit on one segment's cylinder is a surface point only if no other part of
// the same tube lies closer than the radius.
bool on_tube_surface(const Point3& x, const Tube& tube, int segment) {
  const int n = static_cast<int>(tube.axis.size()) - 1;
  const int lo = std::max(0, segment - tube.window);
  const int hi = std::min(n - 1, segment + tube.window);
  for (int s = lo; s <= hi; ++s) {
    if (point_segment_distance(x, tube.axis[s], tube.axis[s + 1]) < tube.radius - kTubeTolerance) {
      return false;
    }
  }
  return true;
}

template <typename Accept>
void intersect_capsule(const Capsule& c, const Point3& o, const Vec3& d, Accept&& accept) {
  const Vec3 ab = c.b - c.a;
  const double len = ab.norm();
  const Vec3 u = ab / len;
  const Vec3 w = o - c.a;
  const Vec3 dp = d - d.dot(u) * u;
  const Vec3 wp = w - w.dot(u) * u;
  const double A = dp.squaredNorm();
  if (A > 1e-15) {
    const double B = 2.0 * wp.dot(dp);
    const double C = wp.squaredNorm() - c.radius * c.radius;
    const double disc = B * B - 4.0 * A * C;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)}) {
        if (t <= kRayEpsilon) continue;
        const double axial = (w + t * d).dot(u);
        if (axial >= 0.0 && axial <= len) accept(t);
      }
    }
  }
  if (c.joint_sphere) {
    const double bq = w.dot(d);
    const double cq = w.squaredNorm() - c.radius * c.radius;
    const double disc = bq * bq - cq;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {-bq - sq, -bq + sq}) {
        if (t > kRayEpsilon) accept(t);
      }
    }
  }
}

}  // namespace

ScanResult virtual_scan(const Scene& scene, const ScanOptions& options) {
  if (scene.pipes.empty()) throw invalid_input("scene has no pipes");
  if (scene.stations.empty()) throw invalid_input("scene has no scan stations");
  for (const auto& st : scene.stations) st.validate();
  if (!(options.tube_spacing > 0.0)) throw invalid_input("tube spacing must be positive");

  std::vector<Tube> tubes;
  std::vector<Capsule> caps;
  for (std::size_t p = 0; p < scene.pipes.size(); ++p) {
    const auto& spec = scene.pipes[p].spec;
    Polyline axis = tube_axis(spec, options.tube_spacing);
    double min_seg = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < axis.size(); ++i) min_seg = std::min(min_seg, (axis[i] - axis[i - 1]).norm());
    const int window = static_cast<int>(std::ceil(2.0 * spec.radius() / min_seg)) + 2;
    for (std::size_t i = 0; i + 1 < axis.size(); ++i) {
      caps.push_back({static_cast<int>(p), static_cast<int>(i), axis[i], axis[i + 1], spec.radius(), i > 0});
    }
    tubes.push_back({std::move(axis), spec.radius(), window});
  }
  const CapsuleBvh bvh(std::move(caps));

  ScanResult result;
  std::vector<int> output_slot(scene.pipes.size(), -1);
  for (std::size_t p = 0; p < scene.pipes.size(); ++p) {
    if (scene.pipes[p].occluder) continue;
    output_slot[p] = static_cast<int>(result.clouds.size());
    PointCloud cloud;
    cloud.instance_id = scene.pipes[p].id;
    result.clouds.push_back(std::move(cloud));
  }

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> jitter(0.0, options.jitter_sigma > 0.0 ? options.jitter_sigma : 1.0);

  for (const auto& st : scene.stations) {
    const int yaw_count = static_cast<int>(std::lround(360.0 / st.yaw_step_deg));
    const double focal = 0.5 * st.height / std::tan(0.5 * st.vfov_deg * std::numbers::pi / 180.0);
    for (int k = 0; k < yaw_count; ++k) {
      const double yaw = k * st.yaw_step_deg * std::numbers::pi / 180.0;
      const Vec3 forward(std::cos(yaw), std::sin(yaw), 0.0);
      const Vec3 right(std::sin(yaw), -std::cos(yaw), 0.0);
      const Vec3 up = Vec3::UnitZ();
      for (int v = 0; v < st.height; ++v) {
        for (int u = 0; u < st.width; ++u) {
          const double x = (u + 0.5 - 0.5 * st.width) / focal;
          const double y = (0.5 * st.height - (v + 0.5)) / focal;
          const Vec3 dir = (forward + x * right + y * up).normalized();
          ++result.rays_cast;
          double best_t = std::numeric_limits<double>::infinity();
          int best_pipe = -1;
          bvh.traverse(st.position, dir, best_t, [&](const Capsule& c, double& best) {
            intersect_capsule(c, st.position, dir, [&](double t) {
              if (t >= best) return;
              const Point3 hit = st.position + t * dir;
              if (!on_tube_surface(hit, tubes[c.pipe], c.segment)) return;
              best = t;
              best_pipe = c.pipe;
            });
          });
          if (best_pipe < 0) continue;
          ++result.hits;
          const int slot = output_slot[best_pipe];
          if (slot < 0) continue;
          Point3 hit = st.position + best_t * dir;
          if (options.jitter_sigma > 0.0) hit += Vec3(jitter(rng), jitter(rng), jitter(rng));
          result.clouds[slot].points.push_back(hit);
        }
      }
    }
  }
  for (const auto& c : result.clouds) result.empty.push_back(c.empty());
  return result;
}

GroundTruth make_ground_truth(const std::string& id, const PipeSpec& spec, double spacing) {
  if (!(spacing > 0.0)) throw invalid_input("ground truth spacing must be positive");
  const HermiteSpline spline(spec);
  const double length = spline.length();
  const long n = std::max(1L, static_cast<long>(std::ceil(length / spacing - 1e-9)));
  std::vector<Point3> pts;
  std::vector<Vec3> tangents;
  for (long k = 0; k <= n; ++k) {
    const double s = length * k / n;
    pts.push_back(k == 0 ? spec.control_points().front()
                         : k == n ? spec.control_points().back() : spline.point_at(s));
    tangents.push_back(spline.tangent_at(s));
  }
  Polyline line(std::move(pts));
  const double axis_length = polyline_length(line);
  return GroundTruth{id, std::move(line), std::move(tangents), spec.radius(), axis_length};
}

}  // namespace piperecon::synth
