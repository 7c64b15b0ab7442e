#pragma once

#include "piperecon/types.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <set>

namespace oracles {

using namespace piperecon;

// Longest over leaf pairs of the shortest simple path, by enumerating every
// simple path with depth-first search.
inline double brute_longest(const SkeletonGraph& g) {
  const auto adj = g.adjacency();
  const auto& pos = g.nodes();
  const int n = static_cast<int>(adj.size());
  std::vector<int> leaves;
  for (int i = 0; i < n; ++i) {
    if (adj[i].size() == 1) leaves.push_back(i);
  }
  double best = -1.0;
  for (std::size_t a = 0; a < leaves.size(); ++a) {
    std::vector<double> shortest(n, std::numeric_limits<double>::infinity());
    std::vector<bool> on(n, false);
    std::function<void(int, double)> dfs = [&](int u, double len) {
      shortest[u] = std::min(shortest[u], len);
      on[u] = true;
      for (int v : adj[u]) {
        if (!on[v]) dfs(v, len + (pos[u] - pos[v]).norm());
      }
      on[u] = false;
    };
    dfs(leaves[a], 0.0);
    for (std::size_t b = a + 1; b < leaves.size(); ++b) {
      if (std::isfinite(shortest[leaves[b]])) best = std::max(best, shortest[leaves[b]]);
    }
  }
  return best;
}

inline SkeletonGraph random_tree_with_chords(std::mt19937_64& rng, int n, int chords) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Point3> nodes;
  for (int i = 0; i < n; ++i) nodes.emplace_back(u(rng), u(rng), u(rng));
  std::set<SkeletonGraph::Edge> edges;
  for (int i = 1; i < n; ++i) {
    const int parent = std::uniform_int_distribution<int>(0, i - 1)(rng);
    edges.insert({parent, i});
  }
  for (int c = 0; c < chords; ++c) {
    int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
    int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
    if (a == b) continue;
    edges.insert({std::min(a, b), std::max(a, b)});
  }
  return SkeletonGraph(nodes, {edges.begin(), edges.end()});
}

}  // namespace oracles
