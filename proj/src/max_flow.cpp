#include <sedlab/max_flow.hpp>

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>

namespace sedlab {

MaxFlow::MaxFlow(int nodes) : n_(nodes), adj_(nodes), level_(nodes), it_(nodes) {}

int MaxFlow::add_edge(int from, int to, double cap) {
  if (from < 0 || to < 0 || from >= n_ || to >= n_) throw std::out_of_range("MaxFlow: node out of range");
  adj_[from].push_back(int(edges_.size()));
  edges_.push_back({to, cap});
  adj_[to].push_back(int(edges_.size()));
  edges_.push_back({from, 0.0});
  return int(edges_.size() / 2) - 1;
}

bool MaxFlow::bfs(int s, int t, double eps) {
  std::fill(level_.begin(), level_.end(), -1);
  std::queue<int> q;
  level_[s] = 0;
  q.push(s);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int id : adj_[u]) {
      const Edge& e = edges_[id];
      if (e.cap > eps && level_[e.to] < 0) {
        level_[e.to] = level_[u] + 1;
        q.push(e.to);
      }
    }
  }
  return level_[t] >= 0;
}

double MaxFlow::dfs(int u, int t, double pushed, double eps) {
  if (u == t) return pushed;
  for (int& i = it_[u]; i < int(adj_[u].size()); ++i) {
    const int id = adj_[u][i];
    Edge& e = edges_[id];
    if (e.cap <= eps || level_[e.to] != level_[u] + 1) continue;
    const double got = dfs(e.to, t, std::min(pushed, e.cap), eps);
    if (got > 0.0) {
      e.cap -= got;
      edges_[id ^ 1].cap += got;
      return got;
    }
  }
  return 0.0;
}

double MaxFlow::run(int s, int t, double eps) {
  double total = 0.0;
  while (bfs(s, t, eps)) {
    std::fill(it_.begin(), it_.end(), 0);
    while (true) {
      const double f = dfs(s, t, std::numeric_limits<double>::infinity(), eps);
      if (f <= 0.0) break;
      total += f;
    }
  }
  return total;
}

}  // namespace sedlab
