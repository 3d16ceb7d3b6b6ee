#include <sedlab/network_simplex.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace sedlab {

namespace {
constexpr signed char kUp = 1;
constexpr signed char kDown = -1;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

TransportSimplex::TransportSimplex(const std::vector<double>& supply, const std::vector<double>& demand,
                                   const std::vector<int>& source_order, const std::vector<int>& sink_order,
                                   const std::function<double(int, int)>& cost)
    : m_(int(supply.size())), n_(int(demand.size())), node_num_(m_ + n_), root_(node_num_) {
  if (m_ == 0 || n_ == 0) throw std::invalid_argument("TransportSimplex: empty side");
  if (int(source_order.size()) != m_ || int(sink_order.size()) != n_) {
    throw std::invalid_argument("TransportSimplex: order size mismatch");
  }
  const int nodes = node_num_ + 1;
  parent_.assign(nodes, -1);
  pred_.assign(nodes, -1);
  thread_.resize(nodes);
  rev_thread_.resize(nodes);
  succ_num_.assign(nodes, 1);
  last_succ_.resize(nodes);
  pred_dir_.assign(nodes, kUp);
  pi_.assign(nodes, 0.0);

  // internal arc 0: first source -> root, cost 0; it never lies on a pivot cycle
  const int top = source_order[0];
  source_.push_back(top);
  target_.push_back(root_);
  cost_.push_back(0.0);
  flow_.push_back(0.0);
  state_.push_back(kTree);

  // north-west corner staircase: each step advances exactly one index, so m+n-1 arcs
  std::vector<std::vector<std::pair<int, int>>> adj(nodes);  // (neighbour, internal arc)
  int a = 0, b = 0;
  double ra = supply[source_order[0]], rb = demand[sink_order[0]];
  while (true) {
    const int i = source_order[a], j = sink_order[b];
    const double x = std::max(0.0, std::min(ra, rb));
    source_.push_back(i);
    target_.push_back(m_ + j);
    cost_.push_back(cost(i, j));
    flow_.push_back(x);
    state_.push_back(kTree);
    const int e = int(cost_.size()) - 1;
    adj[i].push_back({m_ + j, e});
    adj[m_ + j].push_back({i, e});
    ra -= x;
    rb -= x;
    if (a == m_ - 1 && b == n_ - 1) break;
    if (b == n_ - 1 || (a < m_ - 1 && ra <= rb)) {
      ++a;
      ra = supply[source_order[a]];
    } else {
      ++b;
      rb = demand[sink_order[b]];
    }
  }

  // preorder from the root through `top`
  parent_[top] = root_;
  pred_[top] = 0;
  pred_dir_[top] = kUp;
  std::vector<int> order;
  order.reserve(nodes);
  order.push_back(root_);
  std::vector<int> stack{top};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    order.push_back(u);
    for (auto it = adj[u].rbegin(); it != adj[u].rend(); ++it) {
      const auto [v, e] = *it;
      if (v == parent_[u]) continue;
      parent_[v] = u;
      pred_[v] = e;
      pred_dir_[v] = source_[e] == v ? kUp : kDown;
      pi_[v] = pred_dir_[v] == kUp ? pi_[u] - cost_[e] : pi_[u] + cost_[e];
      stack.push_back(v);
    }
  }
  if (int(order.size()) != nodes) throw std::logic_error("TransportSimplex: initial basis is not spanning");
  std::vector<int> pos(nodes);
  for (int k = 0; k < nodes; ++k) {
    const int u = order[k], v = order[(k + 1) % nodes];
    thread_[u] = v;
    rev_thread_[v] = u;
    pos[u] = k;
    last_succ_[u] = u;
  }
  for (int k = nodes - 1; k > 0; --k) {
    const int u = order[k], p = parent_[u];
    succ_num_[p] += succ_num_[u];
    if (pos[last_succ_[u]] > pos[last_succ_[p]]) last_succ_[p] = last_succ_[u];
  }
}

int TransportSimplex::add_arc(int i, int j, double cost) {
  if (i < 0 || i >= m_ || j < 0 || j >= n_) throw std::out_of_range("TransportSimplex: arc endpoint out of range");
  source_.push_back(i);
  target_.push_back(m_ + j);
  cost_.push_back(cost);
  flow_.push_back(0.0);
  state_.push_back(kLower);
  return int(cost_.size() - kOff) - 1;
}

bool TransportSimplex::check_tree(double tol) const {
  const int nodes = node_num_ + 1;
  std::vector<int> seen(nodes, 0), pos(nodes);
  int u = root_;
  for (int k = 0; k < nodes; ++k) {
    if (seen[u]++) return false;
    pos[u] = k;
    u = thread_[u];
  }
  if (u != root_) return false;
  for (int v = 0; v < nodes; ++v) {
    if (rev_thread_[thread_[v]] != v) return false;
  }
  // a subtree is the contiguous thread segment [v, last_succ[v]] of length succ_num[v]
  for (int v = 0; v < nodes; ++v) {
    if (pos[last_succ_[v]] - pos[v] + 1 != succ_num_[v]) return false;
    if (v != root_) {
      const int p = parent_[v];
      if (pos[v] <= pos[p] || pos[last_succ_[v]] > pos[last_succ_[p]]) return false;
    }
  }
  std::vector<int> size(nodes, 1);
  for (int v = 0; v < nodes; ++v)
    for (int p = parent_[v]; p != -1; p = parent_[p]) ++size[p];
  for (int v = 0; v < nodes; ++v) {
    if (size[v] != succ_num_[v]) return false;
  }
  for (int v = 0; v < nodes; ++v) {
    if (v == root_) continue;
    const int e = pred_[v];
    if (state_[e] != kTree) return false;
    const int p = parent_[v];
    if (pred_dir_[v] == kUp ? (source_[e] != v || target_[e] != p) : (source_[e] != p || target_[e] != v)) return false;
    if (std::abs(cost_[e] + pi_[source_[e]] - pi_[target_[e]]) > tol) return false;
    if (flow_[e] < -tol) return false;
  }
  return true;
}

bool TransportSimplex::find_entering(double eps) {
  const std::size_t first = kOff, total = cost_.size();
  const std::size_t count = total - first;
  if (count == 0) return false;
  const std::size_t block = std::max<std::size_t>(10, std::size_t(std::ceil(std::sqrt(double(count)))));
  if (next_arc_ >= count) next_arc_ = 0;
  double best = -eps;
  std::size_t cnt = block;
  std::size_t e;
  auto scan = [&](std::size_t lo, std::size_t hi) -> bool {
    for (e = lo; e != hi; ++e) {
      const std::size_t a = first + e;
      const double c = state_[a] * (cost_[a] + pi_[source_[a]] - pi_[target_[a]]);
      if (c < best) {
        best = c;
        in_arc_ = int(a);
      }
      if (--cnt == 0) {
        if (best < -eps) return true;
        cnt = block;
      }
    }
    return false;
  };
  if (scan(next_arc_, count) || scan(0, next_arc_)) {
    next_arc_ = e + 1;
    return true;
  }
  if (best < -eps) {
    next_arc_ = e;
    return true;
  }
  return false;
}

void TransportSimplex::find_join() {
  int u = source_[in_arc_], v = target_[in_arc_];
  while (u != v) {
    if (succ_num_[u] < succ_num_[v]) u = parent_[u];
    else v = parent_[v];
  }
  join_ = u;
}

void TransportSimplex::find_leaving() {
  const int first = source_[in_arc_], second = target_[in_arc_];
  delta_ = kInf;
  int result = 0;
  for (int u = first; u != join_; u = parent_[u]) {
    if (pred_dir_[u] == kUp && flow_[pred_[u]] < delta_) {
      delta_ = flow_[pred_[u]];
      u_out_ = u;
      result = 1;
    }
  }
  for (int u = second; u != join_; u = parent_[u]) {
    if (pred_dir_[u] == kDown && flow_[pred_[u]] <= delta_) {
      delta_ = flow_[pred_[u]];
      u_out_ = u;
      result = 2;
    }
  }
  if (result == 0) throw std::logic_error("TransportSimplex: unbounded pivot");
  if (result == 1) {
    u_in_ = first;
    v_in_ = second;
  } else {
    u_in_ = second;
    v_in_ = first;
  }
}

void TransportSimplex::change_flow() {
  if (delta_ > 0.0) {
    flow_[in_arc_] += delta_;
    for (int u = source_[in_arc_]; u != join_; u = parent_[u]) flow_[pred_[u]] -= pred_dir_[u] * delta_;
    for (int u = target_[in_arc_]; u != join_; u = parent_[u]) flow_[pred_[u]] += pred_dir_[u] * delta_;
  }
  state_[in_arc_] = kTree;
  const int out = pred_[u_out_];
  state_[out] = kLower;
  flow_[out] = 0.0;
}

void TransportSimplex::update_tree() {
  const int old_rev_thread = rev_thread_[u_out_];
  const int old_succ_num = succ_num_[u_out_];
  const int old_last_succ = last_succ_[u_out_];
  v_out_ = parent_[u_out_];

  if (u_in_ == u_out_) {
    parent_[u_in_] = v_in_;
    pred_[u_in_] = in_arc_;
    pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kUp : kDown;
    if (thread_[v_in_] != u_out_) {
      int after = thread_[old_last_succ];
      thread_[old_rev_thread] = after;
      rev_thread_[after] = old_rev_thread;
      after = thread_[v_in_];
      thread_[v_in_] = u_out_;
      rev_thread_[u_out_] = v_in_;
      thread_[old_last_succ] = after;
      rev_thread_[after] = old_last_succ;
    }
  } else {
    // old_rev_thread == v_in means join and v_out coincide
    const int thread_continue = old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];

    // Re-hang the stem u_in … u_out below v_in, splicing each subtree into the thread.
    int stem = u_in_;
    int par_stem = v_in_;
    int next_stem;
    int last = last_succ_[u_in_];
    int before, after = thread_[last];
    thread_[v_in_] = u_in_;
    dirty_revs_.clear();
    dirty_revs_.push_back(v_in_);
    while (stem != u_out_) {
      next_stem = parent_[stem];
      thread_[last] = next_stem;
      dirty_revs_.push_back(last);

      before = rev_thread_[stem];
      thread_[before] = after;
      rev_thread_[after] = before;

      parent_[stem] = par_stem;
      par_stem = stem;
      stem = next_stem;

      last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
      after = thread_[last];
    }
    parent_[u_out_] = par_stem;
    thread_[last] = thread_continue;
    rev_thread_[thread_continue] = last;
    last_succ_[u_out_] = last;

    if (old_rev_thread != v_in_) {
      thread_[old_rev_thread] = after;
      rev_thread_[after] = old_rev_thread;
    }
    for (int u : dirty_revs_) rev_thread_[thread_[u]] = u;

    int tmp_sc = 0, tmp_ls = last_succ_[u_out_];
    for (int u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
      pred_[u] = pred_[p];
      pred_dir_[u] = -pred_dir_[p];
      tmp_sc += succ_num_[u] - succ_num_[p];
      succ_num_[u] = tmp_sc;
      last_succ_[p] = tmp_ls;
    }
    pred_[u_in_] = in_arc_;
    pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kUp : kDown;
    succ_num_[u_in_] = old_succ_num;
  }

  const int up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
  const int last_succ_out = last_succ_[u_out_];
  for (int u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) last_succ_[u] = last_succ_out;

  if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
    for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
      last_succ_[u] = old_rev_thread;
    }
  } else if (last_succ_out != old_last_succ) {
    for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
      last_succ_[u] = last_succ_out;
    }
  }

  for (int u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
  for (int u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
}

void TransportSimplex::update_potential() {
  const double sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * cost_[in_arc_];
  const int end = thread_[last_succ_[u_in_]];
  for (int u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
}

void TransportSimplex::solve(double eps) {
  while (find_entering(eps)) {
    find_join();
    find_leaving();
    change_flow();
    update_tree();
    update_potential();
    ++pivots_;
  }
}

}  // namespace sedlab
