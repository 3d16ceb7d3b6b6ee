#pragma once

// Free-space Stokes solver on a regular grid.
//
// The source f + div σ is zero-padded onto a grid at least twice as large and convolved with
// the Oseen tensor in transform space: û = (k kᵀ − |k|² I) B̂ f̂, where B̂ is the transform of
// the biharmonic Green's function r/8π truncated beyond the box diameter (Vico–Greengard).
// The truncation makes the discrete periodic convolution agree with the free-space one for
// sources inside the unpadded box, and k·û = 0 holds exactly mode by mode.

#include <sedlab/grid.hpp>

#include <array>
#include <complex>
#include <memory>
#include <vector>

namespace sedlab {

using Components3 = std::array<std::vector<double>, 3>;
/// Symmetric tensor field stored as (xx, yy, zz, xy, xz, yz).
using Components6 = std::array<std::vector<double>, 6>;

inline constexpr int kSymIndex[3][3] = {{0, 3, 4}, {3, 1, 5}, {4, 5, 2}};

struct StokesResult {
  VelocityField velocity;
  Components6 strain;  // empty unless requested
};

class StokesSolver {
 public:
  explicit StokesSolver(const GridSpec& grid);
  ~StokesSolver();
  StokesSolver(const StokesSolver&) = delete;
  StokesSolver& operator=(const StokesSolver&) = delete;

  /// Shared instance per (cell, dims, padding); kernel setup is the expensive part.
  static std::shared_ptr<StokesSolver> for_grid(const GridSpec& grid);

  const GridSpec& grid() const { return grid_; }

  /// Velocity of −Δu + ∇p = f + div σ, div u = 0 in R³. Either source may be null.
  /// Throws std::domain_error if more than 1% of the source sits on the outermost cell layer.
  /// Not reentrant: uses internal scratch buffers.
  StokesResult solve(const Components3* force, const Components6* stress, bool want_strain = false) const;

  /// Convenience: force density τ·g.
  StokesResult solve_density(const DensityField& tau, const Vec3& g, bool want_strain = false) const;

 private:
  struct Impl;
  GridSpec grid_;
  std::unique_ptr<Impl> impl_;
};

/// Transform of (r/8π)·1{r<L} at wavenumber k.
double truncated_biharmonic_hat(double k, double L);

}  // namespace sedlab
