#include "piperecon/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace piperecon {

namespace {
constexpr int kLeafSize = 12;
}

KdTree::KdTree(std::span<const Point3> points) : points_(points), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points.size() / kLeafSize + 2);
  if (!points.empty()) build(0, static_cast<int>(points.size()));
}

int KdTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  Point3 lo = points_[order_[begin]], hi = lo;
  for (int i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

std::vector<int> KdTree::knn(const Point3& q, int k) const {
  std::vector<int> out;
  if (k <= 0 || nodes_.empty()) return out;
  // max-heap of (dist2, index)
  std::priority_queue<std::pair<double, int>> heap;
  auto worst = [&]() {
    return static_cast<int>(heap.size()) < k ? std::numeric_limits<double>::infinity()
                                            : heap.top().first;
  };
  std::vector<std::pair<int, double>> stack{{0, 0.0}};
  while (!stack.empty()) {
    auto [id, bound] = stack.back();
    stack.pop_back();
    if (bound > worst()) continue;
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int idx = order_[i];
        const double d2 = (points_[idx] - q).squaredNorm();
        const std::pair<double, int> cand{d2, idx};
        if (static_cast<int>(heap.size()) < k) {
          heap.push(cand);
        } else if (cand < heap.top()) {
          heap.pop();
          heap.push(cand);
        }
      }
      continue;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0 ? node.left : node.right;
    const int far = diff < 0 ? node.right : node.left;
    stack.push_back({far, diff * diff});
    stack.push_back({near, 0.0});
  }
  std::vector<std::pair<double, int>> sorted;
  sorted.reserve(heap.size());
  while (!heap.empty()) {
    sorted.push_back(heap.top());
    heap.pop();
  }
  std::sort(sorted.begin(), sorted.end());
  out.reserve(sorted.size());
  for (const auto& [d, idx] : sorted) out.push_back(idx);
  return out;
}

std::vector<int> KdTree::radius(const Point3& q, double radius) const {
  std::vector<int> out;
  if (nodes_.empty() || radius < 0.0) return out;
  const double r2 = radius * radius;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        if ((points_[order_[i]] - q).squaredNorm() <= r2) out.push_back(order_[i]);
      }
      continue;
    }
    const double diff = q[node.axis] - node.split;
    if (diff <= radius) stack.push_back(node.left);
    if (diff >= -radius) stack.push_back(node.right);
  }
  return out;
}

}  // namespace piperecon
