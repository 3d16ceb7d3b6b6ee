#pragma once

// Primal network simplex for the uncapacitated transportation problem
//   min Σ c_e x_e  s.t.  Σ_j x_ij = a_i,  Σ_i x_ij = b_j,  x ≥ 0
// on a sparse arc set. Spanning-tree bookkeeping follows the thread/successor representation
// of LEMON's NetworkSimplex with block-search pivoting. The starting basis is a north-west
// corner staircase (m+n−1 arcs, degenerate ones included) hung below an artificial root through
// a single zero-cost arc, so no big-M prices appear. Arcs can be appended between solves (the
// current basis stays feasible), which is what column generation needs.

#include <cstddef>
#include <functional>
#include <vector>

namespace sedlab {

class TransportSimplex {
 public:
  /// Supplies and demands must carry the same total mass. The north-west corner walks sources and
  /// sinks in the given orders; `cost(i, j)` prices its arcs.
  TransportSimplex(const std::vector<double>& supply, const std::vector<double>& demand,
                   const std::vector<int>& source_order, const std::vector<int>& sink_order,
                   const std::function<double(int, int)>& cost);

  /// Arc from source i to sink j; returns its index.
  int add_arc(int i, int j, double cost);
  std::size_t arc_count() const { return cost_.size() - kOff; }

  /// Runs pivots until no arc has negative reduced cost (up to `eps`).
  void solve(double eps);

  double flow(int arc) const { return flow_[kOff + arc]; }
  int arc_source(int arc) const { return source_[kOff + arc]; }
  int arc_sink(int arc) const { return target_[kOff + arc] - m_; }
  double arc_cost(int arc) const { return cost_[kOff + arc]; }

  /// Reduced cost of a (possibly absent) arc i → j with the given cost.
  double reduced_cost(int i, int j, double cost) const { return cost + pi_[i] - pi_[m_ + j]; }
  double source_potential(int i) const { return pi_[i]; }
  double sink_potential(int j) const { return pi_[m_ + j]; }

  long pivots() const { return pivots_; }

  /// Structural self-check of the spanning tree (parents, thread order, subtree sizes, potentials).
  bool check_tree(double tol) const;

 private:
  enum { kTree = 0, kLower = 1 };
  static constexpr std::size_t kOff = 1;  // internal arc 0 ties node 0 to the root
  bool find_entering(double eps);
  void find_join();
  void find_leaving();
  void change_flow();
  void update_tree();
  void update_potential();

  int m_, n_, node_num_, root_;
  std::vector<int> source_, target_;
  std::vector<double> cost_, flow_;
  std::vector<signed char> state_;
  std::vector<int> parent_, pred_, thread_, rev_thread_, succ_num_, last_succ_;
  std::vector<signed char> pred_dir_;
  std::vector<double> pi_;
  std::vector<int> dirty_revs_;

  int in_arc_ = -1, join_ = -1, u_in_ = -1, v_in_ = -1, u_out_ = -1, v_out_ = -1;
  double delta_ = 0.0;
  std::size_t next_arc_ = 0;
  long pivots_ = 0;
};

}  // namespace sedlab
