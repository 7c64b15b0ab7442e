#include "piperecon/smooth.hpp"

#include "piperecon/error.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace piperecon::smooth {

void SmoothingParams::validate() const {
  if (!(voxel_size > 0.0)) throw invalid_input("smoothing voxel size must be positive");
  if (!(weight >= 0.0)) throw invalid_input("smoothing weight must be non-negative");
  if (max_outer_iterations < 1) throw invalid_input("smoothing needs at least one iteration");
  if (!(step_size > 0.0) || !(point_spacing > 0.0) || !(convergence_delta >= 0.0)) {
    throw invalid_input("smoothing step, spacing and tolerance must be positive");
  }
  if (band_voxels < 1) throw invalid_input("smoothing band must be at least one voxel");
}

Polyline reparameterize(const Polyline& curve, double spacing) {
  if (!(spacing > 0.0)) throw invalid_input("reparameterization spacing must be positive");
  const std::vector<double> arc = cumulative_length(curve);
  const double total = arc.back();
  const auto whole = static_cast<long>(std::floor(total / spacing + 1e-9));
  long last = whole;
  if (total - whole * spacing < 0.5 * spacing) --last;

  std::vector<Point3> out;
  out.reserve(static_cast<std::size_t>(std::max(0L, last)) + 2);
  out.push_back(curve.front());
  std::size_t seg = 1;
  for (long k = 1; k <= last; ++k) {
    const double s = k * spacing;
    while (seg + 1 < arc.size() && arc[seg] < s) ++seg;
    const double span = arc[seg] - arc[seg - 1];
    const double t = span > 0.0 ? (s - arc[seg - 1]) / span : 0.0;
    out.push_back(curve[seg - 1] + std::clamp(t, 0.0, 1.0) * (curve[seg] - curve[seg - 1]));
  }
  out.push_back(curve.back());
  return Polyline::dedup(out);
}

namespace {

void mark_segment(VoxelGrid& grid, const Point3& a, const Point3& b) {
  const double h = grid.voxel_size();
  auto cell = grid.cell_of(a);
  const auto end = grid.cell_of(b);
  const Vec3 d = b - a;
  int step[3];
  double t_max[3], t_delta[3];
  for (int ax = 0; ax < 3; ++ax) {
    if (d[ax] > 0) {
      step[ax] = 1;
      t_max[ax] = (grid.origin()[ax] + (cell[ax] + 1) * h - a[ax]) / d[ax];
      t_delta[ax] = h / d[ax];
    } else if (d[ax] < 0) {
      step[ax] = -1;
      t_max[ax] = (grid.origin()[ax] + cell[ax] * h - a[ax]) / d[ax];
      t_delta[ax] = -h / d[ax];
    } else {
      step[ax] = 0;
      t_max[ax] = std::numeric_limits<double>::infinity();
      t_delta[ax] = std::numeric_limits<double>::infinity();
    }
  }
  auto mark = [&](const std::array<int, 3>& c) {
    if (grid.in_range(c[0], c[1], c[2])) grid.occupancy()[grid.index(c[0], c[1], c[2])] = 1;
  };
  mark(cell);
  const int guard = std::abs(end[0] - cell[0]) + std::abs(end[1] - cell[1]) + std::abs(end[2] - cell[2]) + 3;
  for (int it = 0; it < guard && cell != end; ++it) {
    int ax = 0;
    if (t_max[1] < t_max[ax]) ax = 1;
    if (t_max[2] < t_max[ax]) ax = 2;
    if (t_max[ax] > 1.0) break;
    cell[ax] += step[ax];
    t_max[ax] += t_delta[ax];
    mark(cell);
  }
  mark(end);
}

}  // namespace

VoxelGrid voxelize_curve(const Polyline& curve, double voxel_size, int margin_voxels) {
  if (!(voxel_size > 0.0)) throw invalid_input("voxel size must be positive");
  if (margin_voxels < 1) throw invalid_input("distance band must be at least one voxel");
  const Aabb box = Aabb::of(curve.points()).expanded((margin_voxels + 0.5) * voxel_size);
  VoxelGrid grid = VoxelGrid::covering(box, voxel_size, VoxelGrid::Mode::distance);
  for (std::size_t i = 1; i < curve.size(); ++i) mark_segment(grid, curve[i - 1], curve[i]);

  const auto& dims = grid.dims();
  auto& dist = grid.distances();
  const float band = static_cast<float>((margin_voxels + 1) * voxel_size);
  using Item = std::pair<float, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    if (grid.occupancy()[c]) {
      dist[c] = 0.0f;
      queue.push({0.0f, c});
    }
  }
  const std::size_t nx = dims[0], nxy = static_cast<std::size_t>(dims[0]) * dims[1];
  while (!queue.empty()) {
    auto [d, c] = queue.top();
    queue.pop();
    if (d > dist[c]) continue;
    const int k = static_cast<int>(c / nxy);
    const int j = static_cast<int>((c % nxy) / nx);
    const int i = static_cast<int>(c % nx);
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!dx && !dy && !dz) continue;
          if (!grid.in_range(i + dx, j + dy, k + dz)) continue;
          const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
          const double step = voxel_size * std::sqrt(static_cast<double>(manhattan));
          const float nd = static_cast<float>(d + step);
          if (nd > band) continue;
          const std::size_t n = grid.index(i + dx, j + dy, k + dz);
          if (nd < dist[n]) {
            dist[n] = nd;
            queue.push({nd, n});
          }
        }
      }
    }
  }
  for (auto& d : dist) d = std::min(d, band);
  return grid;
}

namespace {

struct Trilinear {
  int i0, j0, k0;
  double fx, fy, fz;
};

Trilinear locate(const VoxelGrid& g, const Point3& p) {
  const auto& dims = g.dims();
  const Vec3 q = (p - g.origin()) / g.voxel_size() - Vec3::Constant(0.5);
  Trilinear t{};
  auto axis = [&](double v, int n, int& base, double& frac) {
    if (n == 1) {
      base = 0;
      frac = 0.0;
      return;
    }
    v = std::clamp(v, 0.0, static_cast<double>(n - 1));
    base = std::min(static_cast<int>(std::floor(v)), n - 2);
    frac = v - base;
  };
  axis(q.x(), dims[0], t.i0, t.fx);
  axis(q.y(), dims[1], t.j0, t.fy);
  axis(q.z(), dims[2], t.k0, t.fz);
  return t;
}

template <typename CellValue>
auto interpolate(const VoxelGrid& g, const Trilinear& t, CellValue&& value) {
  const auto& dims = g.dims();
  using T = decltype(value(0, 0, 0));
  T acc = value(0, 0, 0) * 0.0;
  for (int c = 0; c < 8; ++c) {
    const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
    const double w = (di ? t.fx : 1 - t.fx) * (dj ? t.fy : 1 - t.fy) * (dk ? t.fz : 1 - t.fz);
    if (w == 0.0) continue;
    const int i = std::min(t.i0 + di, dims[0] - 1);
    const int j = std::min(t.j0 + dj, dims[1] - 1);
    const int k = std::min(t.k0 + dk, dims[2] - 1);
    acc += w * value(i, j, k);
  }
  return acc;
}

}  // namespace

double sample_distance(const VoxelGrid& field, const Point3& p) {
  const auto& d = field.distances();
  return interpolate(field, locate(field, p),
                     [&](int i, int j, int k) { return static_cast<double>(d[field.index(i, j, k)]); });
}

Vec3 distance_gradient(const VoxelGrid& field, const Point3& p) {
  const auto& d = field.distances();
  const auto& dims = field.dims();
  const double h = field.voxel_size();
  auto at = [&](int i, int j, int k) {
    i = std::clamp(i, 0, dims[0] - 1);
    j = std::clamp(j, 0, dims[1] - 1);
    k = std::clamp(k, 0, dims[2] - 1);
    return static_cast<double>(d[field.index(i, j, k)]);
  };
  return interpolate(field, locate(field, p), [&](int i, int j, int k) {
    return Vec3((at(i + 1, j, k) - at(i - 1, j, k)) / (2 * h),
                (at(i, j + 1, k) - at(i, j - 1, k)) / (2 * h),
                (at(i, j, k + 1) - at(i, j, k - 1)) / (2 * h));
  });
}

double curve_energy(const Polyline& curve, const VoxelGrid& field, double length_weight) {
  const std::size_t n = curve.size();
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double ds = 0.0;
    if (i > 0) ds += 0.5 * (curve[i] - curve[i - 1]).norm();
    if (i + 1 < n) ds += 0.5 * (curve[i + 1] - curve[i]).norm();
    e += sample_distance(field, curve[i]) * ds;
  }
  return e + length_weight * polyline_length(curve);
}

SmoothResult smooth_curve(const Polyline& curve, const SmoothingParams& params) {
  params.validate();
  if (curve.size() < 3) throw invalid_input("smoothing needs at least 3 points");
  const double h = params.voxel_size;
  const double spacing = params.point_spacing * h;
  const double length_weight = params.weight * h;

  Polyline current = reparameterize(curve, spacing);
  const VoxelGrid field = voxelize_curve(current, h, params.band_voxels);
  double energy = curve_energy(current, field, length_weight);
  const double tolerance = params.convergence_delta * energy;

  SmoothResult out{current, {energy}, 0, false, {}};
  double step = params.step_size * h;
  if (length_weight > 0.0) step = std::min(step, 0.4 * spacing * spacing / length_weight);
  int rejected = 0;

  for (int it = 0; it < params.max_outer_iterations; ++it) {
    const auto& p = current.points();
    if (p.size() < 3) break;
    std::vector<Point3> moved(p);
    for (std::size_t i = 1; i + 1 < p.size(); ++i) {
      const double ds_prev = (p[i] - p[i - 1]).norm();
      const double ds_next = (p[i + 1] - p[i]).norm();
      const double ds = 0.5 * (ds_prev + ds_next);
      // Second difference over the (nearly) uniform parameterization.
      const Vec3 curvature = ((p[i + 1] - p[i]) / ds_next - (p[i] - p[i - 1]) / ds_prev) / ds;
      moved[i] = p[i] + step * (-distance_gradient(field, p[i]) + length_weight * curvature);
    }
    Polyline candidate = reparameterize(Polyline::dedup(moved), spacing);
    const double e = curve_energy(candidate, field, length_weight);
    if (e <= energy) {
      const double gain = energy - e;
      current = std::move(candidate);
      energy = e;
      out.energy_log.push_back(e);
      out.iterations = it + 1;
      rejected = 0;
      if (gain < tolerance) break;
      continue;
    }
    if (e - energy <= tolerance) break;  // flat: reparameterization noise only
    if (++rejected >= 3) {
      out.diverged = true;
      out.warning = "energy increased for 3 consecutive halved steps; returning best iterate";
      break;
    }
    step *= 0.5;
  }
  out.curve = std::move(current);
  return out;
}

Polyline rdp_simplify_epsilon(const Polyline& curve, double epsilon) {
  if (!(epsilon >= 0.0)) throw invalid_input("RDP tolerance must be non-negative");
  const std::size_t n = curve.size();
  std::vector<bool> keep(n, false);
  keep.front() = keep.back() = true;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n - 1}};
  while (!stack.empty()) {
    const auto [first, last] = stack.back();
    stack.pop_back();
    double far = -1.0;
    std::size_t index = first;
    for (std::size_t i = first + 1; i < last; ++i) {
      const double d = point_segment_distance(curve[i], curve[first], curve[last]);
      if (d > far) {
        far = d;
        index = i;
      }
    }
    if (index != first && far > epsilon) {
      keep[index] = true;
      stack.push_back({first, index});
      stack.push_back({index, last});
    }
  }
  std::vector<Point3> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.push_back(curve[i]);
  }
  return Polyline(std::move(out));
}

Polyline rdp_simplify(const Polyline& curve, double mean_radius, double factor) {
  if (!(mean_radius > 0.0)) throw invalid_input("RDP needs a positive mean radius");
  return rdp_simplify_epsilon(curve, factor * mean_radius);
}

}  // namespace piperecon::smooth
