#pragma once

// Dinic's maximum flow with real capacities.

#include <vector>

namespace sedlab {

class MaxFlow {
 public:
  explicit MaxFlow(int nodes);
  int add_edge(int from, int to, double cap);
  /// Maximum s–t flow; capacities below `eps` count as saturated.
  double run(int s, int t, double eps = 1e-15);
  double flow(int edge) const { return edges_[2 * edge + 1].cap; }  // residual of the reverse edge
  int from(int edge) const { return edges_[2 * edge + 1].to; }
  int to(int edge) const { return edges_[2 * edge].to; }
  int edge_count() const { return int(edges_.size() / 2); }

 private:
  struct Edge {
    int to;
    double cap;
  };
  bool bfs(int s, int t, double eps);
  double dfs(int u, int t, double pushed, double eps);

  int n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> level_, it_;
};

}  // namespace sedlab
