#include "piperecon/refine.hpp"

#include "piperecon/error.hpp"
#include "piperecon/kdtree.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_map>

namespace piperecon::refine {

Polyline longest_path(const SkeletonGraph& graph) {
  const int n = static_cast<int>(graph.node_count());
  if (n < 2) throw PipeError(ErrorKind::infeasible, "skeleton graph has fewer than 2 nodes");
  const auto adj = graph.adjacency();
  const auto& pos = graph.nodes();

  std::vector<int> leaves;
  for (int i = 0; i < n; ++i) {
    if (adj[i].size() == 1) leaves.push_back(i);
  }
  if (leaves.empty()) throw PipeError(ErrorKind::infeasible, "closed-loop skeleton unsupported");

  double best_len = -1.0;
  std::vector<int> best_path;
  std::vector<double> dist(n);
  std::vector<int> prev(n);
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const int src = leaves[li];
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    std::fill(prev.begin(), prev.end(), -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[src] = 0.0;
    queue.push({0.0, src});
    while (!queue.empty()) {
      auto [d, u] = queue.top();
      queue.pop();
      if (d > dist[u]) continue;
      for (int v : adj[u]) {
        const double nd = d + (pos[u] - pos[v]).norm();
        // Equal-cost ties keep the predecessor with the smaller index.
        if (nd < dist[v] || (nd == dist[v] && u < prev[v])) {
          const bool improved = nd < dist[v];
          dist[v] = nd;
          prev[v] = u;
          if (improved) queue.push({nd, v});
        }
      }
    }
    for (std::size_t lj = li + 1; lj < leaves.size(); ++lj) {
      const int dst = leaves[lj];
      if (!std::isfinite(dist[dst])) continue;
      if (dist[dst] > best_len * (1.0 + 1e-12) + 1e-15) {
        best_len = dist[dst];
        best_path.clear();
        for (int v = dst; v != -1; v = prev[v]) best_path.push_back(v);
        std::reverse(best_path.begin(), best_path.end());
      }
    }
  }
  if (best_path.empty()) throw PipeError(ErrorKind::infeasible, "closed-loop skeleton unsupported");
  std::vector<Point3> pts;
  pts.reserve(best_path.size());
  for (int v : best_path) pts.push_back(pos[v]);
  return Polyline::dedup(pts);
}

Polyline elongate(const Polyline& skeleton, std::span<const Point3> cloud, double radius_estimate,
                  const ElongationParams& params) {
  if (!(params.search_distance > 0.0) || !(params.spacing > 0.0)) {
    throw invalid_input("elongation distances must be positive");
  }
  if (!(radius_estimate > 0.0)) throw invalid_input("elongation needs a positive radius estimate");
  const double tube = params.tube_factor * radius_estimate;

  auto extension = [&](const Point3& end, const Vec3& dir) {
    double reach = 0.0;
    for (const auto& q : cloud) {
      const Vec3 d = q - end;
      if (d.norm() > params.search_distance) continue;
      const double t = d.dot(dir);
      if (t <= 0.0) continue;
      if ((d - t * dir).norm() > tube) continue;
      reach = std::max(reach, t);
    }
    std::vector<Point3> added;
    const auto count = static_cast<long>(std::floor(reach / params.spacing));
    for (long k = 1; k <= count; ++k) added.push_back(end + (k * params.spacing) * dir);
    return added;
  };

  const auto& pts = skeleton.points();
  const Vec3 head_dir = (pts[0] - pts[1]).normalized();
  const Vec3 tail_dir = (pts[pts.size() - 1] - pts[pts.size() - 2]).normalized();
  const std::vector<Point3> head = extension(pts.front(), head_dir);
  const std::vector<Point3> tail = extension(pts.back(), tail_dir);

  std::vector<Point3> out;
  out.reserve(head.size() + pts.size() + tail.size());
  out.insert(out.end(), head.rbegin(), head.rend());
  out.insert(out.end(), pts.begin(), pts.end());
  out.insert(out.end(), tail.begin(), tail.end());
  return Polyline(std::move(out));
}

void RollingSphereParams::validate() const {
  if (min_inlier_points < 3) throw invalid_input("rolling sphere needs m >= 3");
  if (!(growth_factor > 1.0)) throw invalid_input("sphere growth factor must exceed 1");
  if (!(ransac_inlier_threshold > 0.0)) throw invalid_input("RANSAC threshold must be positive");
  if (ransac_iterations < 1 || max_growth_iterations < 0) {
    throw invalid_input("RANSAC and growth iteration counts must be non-negative");
  }
  if (!(initial_radius > 0.0)) throw invalid_input("initial sphere radius must be positive");
}

std::optional<std::pair<Point2, double>> circumcircle(const Point2& a, const Point2& b,
                                                      const Point2& c) {
  const Point2 ab = b - a, ac = c - a;
  const double d = 2.0 * (ab.x() * ac.y() - ab.y() * ac.x());
  const double scale = std::max(ab.squaredNorm(), ac.squaredNorm());
  if (std::abs(d) <= 1e-12 * scale || scale == 0.0) return std::nullopt;
  const double ab2 = ab.squaredNorm(), ac2 = ac.squaredNorm();
  const Point2 off((ac.y() * ab2 - ab.y() * ac2) / d, (ab.x() * ac2 - ac.x() * ab2) / d);
  return std::make_pair(Point2(a + off), off.norm());
}

std::optional<std::pair<Point2, double>> fit_circle_algebraic(std::span<const Point2> points) {
  const std::size_t n = points.size();
  if (n < 3) return std::nullopt;
  Point2 mean = Point2::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(n);
  double mxx = 0, myy = 0, mxy = 0, mxz = 0, myz = 0, mzz = 0;
  for (const auto& p : points) {
    const double x = p.x() - mean.x(), y = p.y() - mean.y(), z = x * x + y * y;
    mxx += x * x;
    myy += y * y;
    mxy += x * y;
    mxz += x * z;
    myz += y * z;
    mzz += z * z;
  }
  const double inv = 1.0 / static_cast<double>(n);
  mxx *= inv; myy *= inv; mxy *= inv; mxz *= inv; myz *= inv; mzz *= inv;
  const double mz = mxx + myy;
  const double cov_xy = mxx * myy - mxy * mxy;
  const double var_z = mzz - mz * mz;
  const double a3 = 4.0 * mz;
  const double a2 = -3.0 * mz * mz - mzz;
  const double a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
  const double a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
  const double a22 = a2 + a2, a33 = a3 + a3 + a3;

  // Newton on the characteristic polynomial, starting left of the smallest root.
  double x = 0.0, y = a0;
  for (int it = 0; it < 99; ++it) {
    const double dy = a1 + x * (a22 + a33 * x);
    if (dy == 0.0) break;
    const double xn = x - y / dy;
    if (xn == x || !std::isfinite(xn)) break;
    const double yn = a0 + xn * (a1 + xn * (a2 + xn * a3));
    if (std::abs(yn) >= std::abs(y)) break;
    x = xn;
    y = yn;
  }
  const double det = x * x - x * mz + cov_xy;
  if (std::abs(det) < 1e-300) return std::nullopt;
  const double cx = (mxz * (myy - x) - myz * mxy) / det / 2.0;
  const double cy = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
  const double r = std::sqrt(cx * cx + cy * cy + mz);
  if (!std::isfinite(r)) return std::nullopt;
  return std::make_pair(Point2(cx + mean.x(), cy + mean.y()), r);
}

namespace {

struct Score {
  int inliers = 0;
  double rms = std::numeric_limits<double>::infinity();
  bool better_than(const Score& o) const {
    return inliers > o.inliers || (inliers == o.inliers && rms < o.rms);
  }
};

Score score_circle(std::span<const Point2> pts, const Point2& c, double r, double thr,
                   std::vector<int>* members = nullptr) {
  Score s;
  double sum2 = 0.0;
  if (members) members->clear();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double res = std::abs((pts[i] - c).norm() - r);
    if (res <= thr) {
      ++s.inliers;
      sum2 += res * res;
      if (members) members->push_back(static_cast<int>(i));
    }
  }
  if (s.inliers > 0) s.rms = std::sqrt(sum2 / s.inliers);
  return s;
}

// Gauss-Newton on geometric residuals |p - c| - r. Steps are solved by QR on
// the Jacobian; normal equations lose too much precision on short arcs.
void polish_geometric(std::span<const Point2> pts, Point2& c, double& r) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd jac(n, 3);
  Eigen::VectorXd res(n);
  for (int it = 0; it < 50; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Point2 d = pts[i] - c;
      const double dist = std::max(d.norm(), 1e-15);
      jac.row(i) << -d.x() / dist, -d.y() / dist, -1.0;
      res[i] = dist - r;
    }
    const Eigen::Vector3d step = jac.colPivHouseholderQr().solve(-res);
    if (!step.allFinite()) return;
    c += step.head<2>();
    r += step[2];
    if (step.norm() < 1e-12 * std::max(1.0, r)) return;
  }
}

}  // namespace

CircleFit fit_circle_2d_ransac(std::span<const Point2> points, const RollingSphereParams& params,
                               std::mt19937_64& rng) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw PipeError(ErrorKind::infeasible, "circle underdetermined: fewer than 3 points");
  const double thr = params.ransac_inlier_threshold;

  Point2 best_c = Point2::Zero();
  double best_r = 0.0;
  Score best;
  bool found = false;
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int it = 0; it < params.ransac_iterations; ++it) {
    const int a = pick(rng);
    int b = pick(rng);
    int c = pick(rng);
    if (a == b || a == c || b == c) continue;
    const auto circle = circumcircle(points[a], points[b], points[c]);
    if (!circle) continue;
    const Score s = score_circle(points, circle->first, circle->second, thr);
    if (!found || s.better_than(best)) {
      found = true;
      best = s;
      best_c = circle->first;
      best_r = circle->second;
    }
  }
  if (!found) {
    // Random draws may miss in tiny sets; fall back to exhaustive triples.
    for (int a = 0; a < n && n <= 64; ++a) {
      for (int b = a + 1; b < n; ++b) {
        for (int c = b + 1; c < n; ++c) {
          const auto circle = circumcircle(points[a], points[b], points[c]);
          if (!circle) continue;
          const Score s = score_circle(points, circle->first, circle->second, thr);
          if (!found || s.better_than(best)) {
            found = true;
            best = s;
            best_c = circle->first;
            best_r = circle->second;
          }
        }
      }
    }
  }
  if (!found) throw PipeError(ErrorKind::infeasible, "circle underdetermined: points are collinear");

  std::vector<int> members;
  score_circle(points, best_c, best_r, thr, &members);
  CircleFit fit;
  fit.center = best_c;
  fit.radius = best_r;
  fit.inlier_count = best.inliers;
  fit.rms_residual = best.rms;
  fit.inliers = members;

  // Refit on the consensus set, re-select inliers, repeat until membership settles.
  for (int round = 0; round < 5 && members.size() >= 3; ++round) {
    std::vector<Point2> subset;
    subset.reserve(members.size());
    for (int i : members) subset.push_back(points[i]);
    auto refined = fit_circle_algebraic(subset);
    if (!refined) break;
    Point2 c = refined->first;
    double r = refined->second;
    polish_geometric(subset, c, r);
    if (!(r > 0.0) || !std::isfinite(r)) break;
    std::vector<int> refined_members;
    const Score s = score_circle(points, c, r, thr, &refined_members);
    if (s.inliers < 3) break;
    fit.center = c;
    fit.radius = r;
    fit.inlier_count = s.inliers;
    fit.rms_residual = s.rms;
    if (refined_members == members) break;
    members = refined_members;
    fit.inliers = std::move(refined_members);
  }
  if (fit.inlier_count < 3 || !(fit.radius > 0.0)) {
    throw PipeError(ErrorKind::infeasible, "circle underdetermined: no consensus");
  }
  return fit;
}

namespace {

struct GridKey {
  std::int64_t x, y, z;
  bool operator==(const GridKey&) const = default;
};
struct GridKeyHash {
  std::size_t operator()(const GridKey& k) const {
    return static_cast<std::size_t>((k.x * 73856093) ^ (k.y * 19349663) ^ (k.z * 83492791));
  }
};

}  // namespace

RecenterResult rolling_sphere_recenter(const Polyline& skeleton, std::span<const Point3> cloud,
                                       const RollingSphereParams& params, std::mt19937_64& rng) {
  params.validate();
  if (cloud.empty()) throw invalid_input("rolling sphere needs a non-empty cloud");
  const KdTree tree(cloud);
  const std::size_t n = skeleton.size();

  std::vector<Point3> corrected;
  RecenterResult out{skeleton, {}, 0, 0};
  double radius = params.initial_radius;

  for (std::size_t i = 0; i < n; ++i) {
    const Point3& s = skeleton[i];
    const Vec3 dir = (i + 1 < n ? skeleton[i + 1] - s : s - skeleton[i - 1]).normalized();

    const Vec3 u = (std::abs(dir.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX()).cross(dir).normalized();
    const Vec3 v = dir.cross(u);

    // Grow until the sphere holds m points and yields a plausible circle.
    double sphere = radius;
    std::optional<CircleFit> accepted;
    for (int g = 0; g <= params.max_growth_iterations && !accepted; ++g, sphere *= params.growth_factor) {
      std::vector<int> inside = tree.radius(s, sphere);
      if (static_cast<int>(inside.size()) < params.min_inlier_points) continue;
      std::sort(inside.begin(), inside.end());
      std::vector<Point2> plane;
      plane.reserve(inside.size());
      for (int idx : inside) {
        const Vec3 d = cloud[idx] - s;
        plane.emplace_back(d.dot(u), d.dot(v));
      }
      try {
        CircleFit fit = fit_circle_2d_ransac(plane, params, rng);
        // A consensus circle far outside the sphere is an artifact of a flat arc.
        if (fit.radius <= 2.0 * sphere && fit.center.norm() <= std::min(sphere, fit.radius)) accepted = std::move(fit);
      } catch (const PipeError&) {
      }
    }
    if (!accepted) {
      ++out.deleted_points;
      continue;
    }
    const CircleFit& fit = *accepted;
    corrected.push_back(s + fit.center.x() * u + fit.center.y() * v);
    out.radii.push_back(fit.radius);
    radius = fit.radius;
  }

  const double tol = std::max(params.duplicate_tolerance, kMinPointSeparation);
  std::unordered_map<GridKey, std::vector<int>, GridKeyHash> grid;
  std::vector<Point3> kept;
  auto key_of = [&](const Point3& p) {
    return GridKey{static_cast<std::int64_t>(std::floor(p.x() / tol)),
                   static_cast<std::int64_t>(std::floor(p.y() / tol)),
                   static_cast<std::int64_t>(std::floor(p.z() / tol))};
  };
  for (const auto& p : corrected) {
    const GridKey k = key_of(p);
    bool duplicate = false;
    for (std::int64_t dx = -1; dx <= 1 && !duplicate; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && !duplicate; ++dy) {
        for (std::int64_t dz = -1; dz <= 1 && !duplicate; ++dz) {
          auto it = grid.find({k.x + dx, k.y + dy, k.z + dz});
          if (it == grid.end()) continue;
          for (int j : it->second) {
            if ((kept[j] - p).norm() < tol) {
              duplicate = true;
              break;
            }
          }
        }
      }
    }
    if (duplicate) {
      ++out.duplicate_points;
      continue;
    }
    grid[k].push_back(static_cast<int>(kept.size()));
    kept.push_back(p);
  }
  if (kept.size() < 2) throw PipeError(ErrorKind::infeasible, "recentering consumed skeleton");
  out.skeleton = Polyline(std::move(kept));
  return out;
}

double mean_radius(std::span<const double> radii) {
  if (radii.empty()) throw PipeError(ErrorKind::infeasible, "mean radius of an empty radius list");
  return std::accumulate(radii.begin(), radii.end(), 0.0) / static_cast<double>(radii.size());
}

double rough_radius(const Polyline& skeleton, std::span<const Point3> cloud) {
  if (cloud.empty()) throw invalid_input("rough radius of an empty cloud");
  const KdTree tree(skeleton.points());
  std::vector<double> d;
  d.reserve(cloud.size());
  const int n = static_cast<int>(skeleton.size());
  for (const auto& q : cloud) {
    const int j = tree.knn(q, 1).front();
    double best = std::numeric_limits<double>::infinity();
    if (j > 0) best = std::min(best, point_segment_distance(q, skeleton[j - 1], skeleton[j]));
    if (j + 1 < n) best = std::min(best, point_segment_distance(q, skeleton[j], skeleton[j + 1]));
    d.push_back(best);
  }
  const std::size_t k = std::min(d.size() - 1, static_cast<std::size_t>(0.9 * d.size()));
  std::nth_element(d.begin(), d.begin() + static_cast<long>(k), d.end());
  return std::max(d[k], 1e-6);
}

}  // namespace piperecon::refine
