#pragma once

// Exact optimal-transport distances between finite measures in R³, quantisation of grid
// densities into finite measures, and the spectral H⁻¹ distance between grid densities.

#include <sedlab/grid.hpp>
#include <sedlab/types.hpp>

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace sedlab {

struct DiscreteMeasure {
  std::vector<Vec3> points;
  std::vector<double> weights;
  /// Maximal displacement introduced when this measure was built from a continuum (0 if exact).
  double displacement_bound = 0.0;

  std::size_t size() const { return points.size(); }
  /// Positive weights summing to 1 within 1e-9; throws std::invalid_argument otherwise.
  void validate() const;

  /// Equal weights 1/n.
  static DiscreteMeasure empirical(std::vector<Vec3> points);
  static DiscreteMeasure weighted(std::vector<Vec3> points, std::vector<double> weights);
};

struct TransportArc {
  int src = 0;
  int dst = 0;
  double mass = 0.0;
  double dist = 0.0;
};

struct Coupling {
  std::vector<TransportArc> plan;
  double p = 1.0;  // +inf for the bottleneck problem
  double cost_p = 0.0;  // (Σ mass·dist^p)^{1/p}, or the bottleneck for p = ∞
  double bottleneck = 0.0;  // largest transported distance
  long pivots = 0;
  int pricing_rounds = 0;

  double value() const { return cost_p; }
};

struct TransportOptions {
  /// Maximum number of source–target arcs in the restricted problem.
  std::size_t pair_cap = 20000;
  /// Nearest neighbours per point seeded into the restricted problem.
  int neighbors = 8;
  double mass_tol = 1e-9;
  /// Maximum number of threshold arcs in one W_∞ feasibility network (memory guard).
  std::size_t flow_arc_cap = 10'000'000;
};

/// Exact W_p, p ∈ [1,∞): network simplex on a sparse arc set, enlarged by full dual pricing until
/// no pair has negative reduced cost. Throws CapacityError when the arc set outgrows the cap and
/// InfeasibleError when the total masses differ by more than mass_tol.
Coupling wasserstein_p(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p, const TransportOptions& opts = {});

/// Exact W_∞: smallest pairwise distance t for which the bipartite network restricted to arcs of
/// length ≤ t carries all the mass (max-flow); the returned plan is the max-flow witness.
Coupling wasserstein_inf(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const TransportOptions& opts = {});

/// One atom per cell (at the cell centre) with mass ≥ threshold·total; cells are merged into
/// 2ᴸ-blocks, atom at the block centre, until at most max_atoms remain. Mass renormalised to 1;
/// displacement_bound = h·2ᴸ·√3/2.
DiscreteMeasure quantize(const DensityField& field, std::size_t max_atoms, double threshold = 1e-12);

/// ‖f − g‖_{H⁻¹} = ‖ |k|⁻¹ (f̂ − ĝ) ‖_{L²} on the zero-padded grid, zero mode dropped.
double sobolev_w12_distance(const DensityField& f, const DensityField& g);

void write_coupling_csv(std::ostream& os, const Coupling& c);
void write_coupling_csv(const std::string& path, const Coupling& c);

}  // namespace sedlab
