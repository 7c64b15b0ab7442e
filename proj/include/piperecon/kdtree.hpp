#pragma once

#include "piperecon/types.hpp"

#include <span>
#include <vector>

namespace piperecon {

/// Static 3D kd-tree over a borrowed point array. The points must outlive the tree.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points);

  /// Indices of the k nearest points to q, closest first (ties by index).
  std::vector<int> knn(const Point3& q, int k) const;

  /// Indices of all points with |p - q| <= radius, unordered.
  std::vector<int> radius(const Point3& q, double radius) const;

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int begin, end;      // range into order_
    int left = -1, right = -1;
    int axis = -1;       // -1 for leaves
    double split = 0.0;
  };

  int build(int begin, int end);

  std::span<const Point3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace piperecon
