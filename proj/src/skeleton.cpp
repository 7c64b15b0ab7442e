#include "piperecon/skeleton.hpp"

#include "piperecon/error.hpp"
#include "piperecon/kdtree.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <tuple>
#include <unordered_map>

namespace piperecon::skeleton {

void ContractionParams::validate() const {
  if (!(init_contraction_weight > 0.0) || !(init_attraction_weight > 0.0) ||
      !(contraction_amplification > 0.0) || !(convergence_ratio > 0.0) ||
      !(max_contraction_weight > 0.0) || !(max_attraction_weight > 0.0) ||
      !(max_cotangent > 0.0) || !(onset_ratio > 0.0)) {
    throw invalid_input("contraction weights and ratios must be positive");
  }
  if (max_iterations < 1) throw invalid_input("contraction needs at least one iteration");
  if (neighborhood_size < 4) throw invalid_input("contraction neighborhood size must be >= 4");
}

namespace {

struct Triangle2 {
  int v[3];
  Point2 center;
  double radius2;
};

bool circumcircle(const std::vector<Point2>& p, int a, int b, int c, Point2& center, double& r2) {
  const Point2 ab = p[b] - p[a], ac = p[c] - p[a];
  const double d = 2.0 * (ab.x() * ac.y() - ab.y() * ac.x());
  if (std::abs(d) < 1e-300) return false;
  const double ab2 = ab.squaredNorm(), ac2 = ac.squaredNorm();
  const Point2 off((ac.y() * ab2 - ab.y() * ac2) / d, (ab.x() * ac2 - ac.x() * ab2) / d);
  center = p[a] + off;
  r2 = off.squaredNorm();
  return true;
}

// Bowyer-Watson on a handful of points. Returns triangles over input indices.
std::vector<std::array<int, 3>> delaunay2d(std::vector<Point2> pts) {
  const int n = static_cast<int>(pts.size());
  Point2 lo = pts[0], hi = pts[0];
  for (const auto& q : pts) {
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  const double span = std::max((hi - lo).maxCoeff(), 1e-12);
  const Point2 mid = 0.5 * (lo + hi);
  pts.push_back(mid + Point2(-1e4 * span, -1e4 * span));
  pts.push_back(mid + Point2(1e4 * span, -1e4 * span));
  pts.push_back(mid + Point2(0.0, 1e4 * span));

  std::vector<Triangle2> tris;
  {
    Triangle2 t{{n, n + 1, n + 2}, {}, 0.0};
    circumcircle(pts, n, n + 1, n + 2, t.center, t.radius2);
    tris.push_back(t);
  }
  const double dup2 = 1e-24 * span * span;
  for (int i = 0; i < n; ++i) {
    bool duplicate = false;
    for (int j = 0; j < i && !duplicate; ++j) duplicate = (pts[i] - pts[j]).squaredNorm() <= dup2;
    if (duplicate) continue;

    std::vector<std::array<int, 2>> boundary;
    std::vector<Triangle2> kept;
    kept.reserve(tris.size() + 4);
    std::vector<const Triangle2*> bad;
    for (const auto& t : tris) {
      const double d2 = (pts[i] - t.center).squaredNorm();
      if (d2 < t.radius2 * (1.0 - 1e-12)) {
        bad.push_back(&t);
      } else {
        kept.push_back(t);
      }
    }
    // Cavity boundary: edges of bad triangles not shared with another bad triangle.
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto* t : bad) {
      for (int e = 0; e < 3; ++e) {
        int a = t->v[e], b = t->v[(e + 1) % 3];
        ++edge_count[{std::min(a, b), std::max(a, b)}];
      }
    }
    for (const auto* t : bad) {
      for (int e = 0; e < 3; ++e) {
        int a = t->v[e], b = t->v[(e + 1) % 3];
        if (edge_count[{std::min(a, b), std::max(a, b)}] == 1) boundary.push_back({a, b});
      }
    }
    for (const auto& [a, b] : boundary) {
      Triangle2 t{{a, b, i}, {}, 0.0};
      if (!circumcircle(pts, a, b, i, t.center, t.radius2)) continue;
      kept.push_back(t);
    }
    tris = std::move(kept);
  }
  std::vector<std::array<int, 3>> out;
  for (const auto& t : tris) {
    if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
    out.push_back({t.v[0], t.v[1], t.v[2]});
  }
  return out;
}

double clamped_cot(const Point3& apex, const Point3& a, const Point3& b, double max_cot) {
  const Vec3 u = a - apex, v = b - apex;
  const double cross = u.cross(v).norm();
  const double dot = u.dot(v);
  if (cross <= std::abs(dot) / max_cot) return dot >= 0.0 ? max_cot : -max_cot;
  return dot / cross;
}

}  // namespace

OneRings local_one_rings(std::span<const Point3> points, int k, int* effective_k) {
  const int n = static_cast<int>(points.size());
  const int kk = std::max(0, std::min(k, n - 1));
  if (effective_k) *effective_k = kk;
  OneRings rings(points.size());
  if (kk < 2) return rings;
  const KdTree tree(points);
  for (int i = 0; i < n; ++i) {
    std::vector<int> nb = tree.knn(points[i], kk + 1);
    // knn returns i itself first unless duplicates tie; force it to the front.
    nb.erase(std::remove(nb.begin(), nb.end(), i), nb.end());
    if (static_cast<int>(nb.size()) > kk) nb.resize(kk);
    nb.insert(nb.begin(), i);

    Point3 mean = Point3::Zero();
    for (int j : nb) mean += points[j];
    mean /= static_cast<double>(nb.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int j : nb) {
      const Vec3 d = points[j] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Vec3 e1 = eig.eigenvectors().col(2), e2 = eig.eigenvectors().col(1);
    // A neighborhood that is (numerically) a line has no tangent plane.
    if (eig.eigenvalues()(1) <= 1e-12 * std::max(eig.eigenvalues()(2), 1e-300)) continue;

    std::vector<Point2> local;
    local.reserve(nb.size());
    for (int j : nb) {
      const Vec3 d = points[j] - points[i];
      local.emplace_back(d.dot(e1), d.dot(e2));
    }
    for (const auto& t : delaunay2d(local)) {
      int slot = -1;
      for (int s = 0; s < 3; ++s) {
        if (t[s] == 0) slot = s;
      }
      if (slot < 0) continue;
      int a = t[(slot + 1) % 3], b = t[(slot + 2) % 3];
      const Point2 pa = local[a] - local[0], pb = local[b] - local[0];
      if (pa.x() * pb.y() - pa.y() * pb.x() < 0.0) std::swap(a, b);
      rings[i].push_back({nb[a], nb[b]});
    }
  }
  return rings;
}

SparseMatrix cotangent_laplacian(std::span<const Point3> points, const OneRings& rings,
                                 double max_cotangent) {
  const int n = static_cast<int>(points.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(rings.size() * 12);
  for (int i = 0; i < n; ++i) {
    for (const auto& [a, b] : rings[i]) {
      // edge (i,a) is opposite b, edge (i,b) is opposite a
      const double cot_b = clamped_cot(points[b], points[i], points[a], max_cotangent);
      const double cot_a = clamped_cot(points[a], points[i], points[b], max_cotangent);
      // Half of each contribution goes to each mirrored entry: symmetrized average.
      trip.emplace_back(i, a, 0.25 * cot_b);
      trip.emplace_back(a, i, 0.25 * cot_b);
      trip.emplace_back(i, b, 0.25 * cot_a);
      trip.emplace_back(b, i, 0.25 * cot_a);
    }
  }
  SparseMatrix w(n, n);
  w.setFromTriplets(trip.begin(), trip.end());
  std::vector<Eigen::Triplet<double>> lap;
  lap.reserve(static_cast<std::size_t>(w.nonZeros()) + n);
  std::vector<double> diag(n, 0.0);
  for (int col = 0; col < w.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(w, col); it; ++it) {
      const double v = std::clamp(it.value(), 0.0, max_cotangent);
      lap.emplace_back(static_cast<int>(it.row()), col, v);
      diag[it.row()] -= v;
    }
  }
  for (int i = 0; i < n; ++i) lap.emplace_back(i, i, diag[i]);
  SparseMatrix L(n, n);
  L.setFromTriplets(lap.begin(), lap.end());
  return L;
}

std::vector<double> one_ring_areas(std::span<const Point3> points, const OneRings& rings) {
  std::vector<double> areas(points.size(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (const auto& [a, b] : rings[i]) {
      areas[i] += 0.5 * (points[a] - points[i]).cross(points[b] - points[i]).norm();
    }
  }
  return areas;
}

Laplacian build_laplacian(std::span<const Point3> points, int k, double max_cotangent) {
  Laplacian out;
  out.rings = local_one_rings(points, k, &out.effective_k);
  if (out.effective_k < k) {
    out.warnings.push_back("only " + std::to_string(out.effective_k) +
                           " neighbors available; neighborhood size reduced from " +
                           std::to_string(k));
  }
  out.matrix = cotangent_laplacian(points, out.rings, max_cotangent);
  return out;
}

Eigen::Matrix3d principal_axes(std::span<const Point3> points) {
  Point3 mean = Point3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(std::max<std::size_t>(points.size(), 1));
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Eigen::Matrix3d axes;
  axes.col(0) = eig.eigenvectors().col(2);
  axes.col(1) = eig.eigenvectors().col(1);
  axes.col(2) = eig.eigenvectors().col(0);
  return axes;
}

double oriented_box_volume(std::span<const Point3> points, const Eigen::Matrix3d& axes) {
  if (points.empty()) return 0.0;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : points) {
    const Vec3 q = axes.transpose() * p;
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  return (hi - lo).prod();
}

ContractedCloud contract(std::span<const Point3> points, const ContractionParams& params) {
  params.validate();
  if (points.size() < 10) {
    throw PipeError(ErrorKind::infeasible, "contraction needs at least 10 points");
  }
  const int n = static_cast<int>(points.size());
  const OneRings rings = local_one_rings(points, params.neighborhood_size);
  const std::vector<double> area0 = one_ring_areas(points, rings);
  const Eigen::Matrix3d axes = principal_axes(points);

  Eigen::MatrixX3d current(n, 3);
  for (int i = 0; i < n; ++i) current.row(i) = points[i].transpose();
  std::vector<Point3> work(points.begin(), points.end());

  ContractedCloud out;
  out.points = work;
  double prev_volume = oriented_box_volume(work, axes);
  out.volume_history.push_back(prev_volume);

  double wl = params.init_contraction_weight;
  Eigen::VectorXd wh = Eigen::VectorXd::Constant(n, params.init_attraction_weight);

  for (int it = 1; it <= params.max_iterations; ++it) {
    const SparseMatrix L = cotangent_laplacian(work, rings, params.max_cotangent);
    SparseMatrix normal = (wl * wl) * SparseMatrix(L.transpose() * L);
    Eigen::VectorXd wh2 = wh.cwiseProduct(wh);
    for (int i = 0; i < n; ++i) normal.coeffRef(i, i) += wh2[i];
    normal.makeCompressed();

    Eigen::SimplicialLDLT<SparseMatrix> solver(normal);
    if (solver.info() != Eigen::Success) {
      throw PipeError(ErrorKind::solver_failure,
                      "contraction solve failed at iteration " + std::to_string(it) +
                          ": factorization of the normal equations did not succeed");
    }
    const Eigen::MatrixX3d rhs = wh2.asDiagonal() * current;
    Eigen::MatrixX3d next = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !next.allFinite()) {
      throw PipeError(ErrorKind::solver_failure,
                      "contraction solve failed at iteration " + std::to_string(it));
    }

    std::vector<Point3> candidate(n);
    for (int i = 0; i < n; ++i) candidate[i] = next.row(i).transpose();
    const double volume = oriented_box_volume(candidate, axes);
    if (volume > prev_volume) break;

    current = std::move(next);
    work = std::move(candidate);
    out.points = work;
    out.iterations_used = it;
    out.volume_history.push_back(volume);
    const double ratio = prev_volume > 0.0 ? volume / prev_volume : 1.0;
    prev_volume = volume;
    // A stalled step only counts as convergence once contraction has begun;
    // the first iterations may barely move while W_L is still small.
    const bool started = volume < params.onset_ratio * out.volume_history.front();
    if (ratio > params.convergence_ratio && started) break;

    wl = std::min(wl * params.contraction_amplification, params.max_contraction_weight);
    const std::vector<double> area = one_ring_areas(work, rings);
    for (int i = 0; i < n; ++i) {
      double w = params.init_attraction_weight;
      if (area[i] > 0.0 && area0[i] > 0.0) w *= std::sqrt(area0[i] / area[i]);
      else if (area0[i] > 0.0) w = params.max_attraction_weight;
      wh[i] = std::min(w, params.max_attraction_weight);
    }
  }
  return out;
}

std::vector<Point3> downsample(std::span<const Point3> points, std::size_t max_points) {
  if (max_points == 0) throw invalid_input("downsample target must be positive");
  if (points.size() <= max_points) return {points.begin(), points.end()};
  const Aabb box = Aabb::of(points);
  const double diag = std::max(box.extent().norm(), 1e-9);
  double voxel = diag / std::cbrt(static_cast<double>(points.size())) * 0.25;
  while (true) {
    struct Bucket {
      Point3 sum = Point3::Zero();
      int count = 0;
      int first = 0;
    };
    std::unordered_map<std::int64_t, Bucket> buckets;
    std::vector<std::int64_t> keys(points.size());
    std::vector<std::int64_t> order;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3 q = ((points[i] - box.min) / voxel).array().floor();
      const std::int64_t key = (static_cast<std::int64_t>(q.x()) * 2'000'003 +
                                static_cast<std::int64_t>(q.y())) * 2'000'003 +
                               static_cast<std::int64_t>(q.z());
      keys[i] = key;
      auto [it, inserted] = buckets.try_emplace(key);
      if (inserted) {
        it->second.first = static_cast<int>(i);
        order.push_back(key);
      }
      it->second.sum += points[i];
      ++it->second.count;
    }
    if (buckets.size() <= max_points) {
      std::unordered_map<std::int64_t, std::pair<double, int>> best;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const Bucket& b = buckets[keys[i]];
        const double d = (points[i] - b.sum / b.count).squaredNorm();
        auto [it, inserted] = best.try_emplace(keys[i], d, static_cast<int>(i));
        if (!inserted && d < it->second.first) it->second = {d, static_cast<int>(i)};
      }
      std::vector<Point3> out;
      out.reserve(order.size());
      for (auto key : order) out.push_back(points[best[key].second]);
      return out;
    }
    voxel *= 1.15;
  }
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

}  // namespace

SkeletonGraph build_skeleton_graph(std::span<const Point3> contracted, const GraphParams& params) {
  if (!(params.sample_radius > 0.0)) throw invalid_input("sample radius must be positive");
  if (contracted.empty()) throw invalid_input("cannot build a skeleton graph from no points");
  const std::size_t n = contracted.size();

  std::vector<int> samples;
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t next = 0;
  while (true) {
    samples.push_back(static_cast<int>(next));
    const Point3 center = contracted[next];
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], (contracted[i] - center).norm());
      if (dist[i] > far) {
        far = dist[i];
        next = i;
      }
    }
    if (far <= params.sample_radius) break;
  }

  std::vector<Point3> nodes;
  nodes.reserve(samples.size());
  for (int s : samples) nodes.push_back(contracted[s]);

  const KdTree tree(nodes);
  std::set<std::pair<int, int>> edges;
  for (const auto& p : contracted) {
    std::vector<int> covering = tree.radius(p, params.sample_radius);
    std::sort(covering.begin(), covering.end());
    for (std::size_t a = 0; a < covering.size(); ++a) {
      for (std::size_t b = a + 1; b < covering.size(); ++b) edges.insert({covering[a], covering[b]});
    }
  }

  const int m = static_cast<int>(nodes.size());
  UnionFind uf(m);
  for (const auto& [a, b] : edges) uf.unite(a, b);
  if (params.bridge_distance > 0.0) {
    std::vector<std::tuple<double, int, int>> candidates;
    for (int a = 0; a < m; ++a) {
      for (int b : tree.radius(nodes[a], params.bridge_distance)) {
        if (b > a && uf.find(a) != uf.find(b)) candidates.emplace_back((nodes[a] - nodes[b]).norm(), a, b);
      }
    }
    std::sort(candidates.begin(), candidates.end());
    for (const auto& [d, a, b] : candidates) {
      if (uf.unite(a, b)) edges.insert({a, b});
    }
  }
  return SkeletonGraph(std::move(nodes), {edges.begin(), edges.end()});
}

SkeletonGraph collapse_edges(const SkeletonGraph& graph) {
  const int n = static_cast<int>(graph.node_count());
  std::vector<Point3> pos = graph.nodes();
  std::vector<std::set<int>> adj(n);
  for (const auto& [a, b] : graph.edges()) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  std::vector<bool> alive(n, true);
  std::vector<int> version(n, 0);

  auto in_triangle = [&](int a, int b) {
    const auto& small = adj[a].size() < adj[b].size() ? adj[a] : adj[b];
    const auto& large = adj[a].size() < adj[b].size() ? adj[b] : adj[a];
    return std::any_of(small.begin(), small.end(),
                       [&](int c) { return c != a && c != b && large.count(c) > 0; });
  };

  using Entry = std::tuple<double, int, int, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  auto push = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    if (in_triangle(a, b)) heap.emplace((pos[a] - pos[b]).norm(), a, b, version[a], version[b]);
  };
  for (int a = 0; a < n; ++a) {
    for (int b : adj[a]) {
      if (b > a) push(a, b);
    }
  }

  while (!heap.empty()) {
    const auto [len, ba, bb, va, vb] = heap.top();
    heap.pop();
    if (!alive[ba] || !alive[bb] || version[ba] != va || version[bb] != vb) continue;
    if (!adj[ba].count(bb) || !in_triangle(ba, bb)) continue;
    pos[ba] = 0.5 * (pos[ba] + pos[bb]);
    ++version[ba];
    for (int c : adj[bb]) {
      adj[c].erase(bb);
      if (c != ba) {
        adj[c].insert(ba);
        adj[ba].insert(c);
      }
    }
    adj[ba].erase(bb);
    adj[bb].clear();
    alive[bb] = false;
    for (int c : adj[ba]) {
      push(ba, c);
      for (int x : adj[c]) {
        if (x != ba && adj[ba].count(x) && c < x) push(c, x);
      }
    }
  }

  std::vector<int> remap(n, -1);
  std::vector<Point3> nodes;
  for (int i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    remap[i] = static_cast<int>(nodes.size());
    nodes.push_back(pos[i]);
  }
  std::vector<SkeletonGraph::Edge> edges;
  for (int a = 0; a < n; ++a) {
    if (!alive[a]) continue;
    for (int b : adj[a]) {
      if (b > a) edges.emplace_back(remap[a], remap[b]);
    }
  }
  return SkeletonGraph(std::move(nodes), std::move(edges));
}

std::size_t count_triangles(const SkeletonGraph& graph) {
  const auto adj = graph.adjacency();
  std::vector<std::set<int>> sets(adj.size());
  for (std::size_t i = 0; i < adj.size(); ++i) sets[i] = {adj[i].begin(), adj[i].end()};
  std::size_t count = 0;
  for (const auto& [a, b] : graph.edges()) {
    for (int c : sets[a]) {
      if (c > b && sets[b].count(c)) ++count;
    }
  }
  return count;
}

}  // namespace piperecon::skeleton
