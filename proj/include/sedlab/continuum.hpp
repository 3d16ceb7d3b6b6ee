#pragma once

// Macroscopic transport–Stokes systems on a grid:
//   TAU      −Δv + ∇p = τg                                  ∂ₜτ + (v + g/(6πγ))·∇τ = 0
//   RHO      −div(2eu + 5φ τ ev) + ∇p = ρg                   ∂ₜρ + (u + g/(6πγ))·∇ρ = 0, τ as above
//   RHO_EFF  −div((2 + 5φ ρ) eu) + ∇p = ρg                   ∂ₜρ + (u + g/(6πγ))·∇ρ = 0
// with the convention that the Stokes operator −Δ carries the factor 1 (viscosity ½ in 2eu).

#include <sedlab/configuration.hpp>
#include <sedlab/grid.hpp>
#include <sedlab/kernels.hpp>
#include <sedlab/stokes.hpp>

#include <functional>
#include <optional>
#include <vector>

namespace sedlab {

/// Stokeslet convolution (Φ ∗ τ)g.
VelocityField stokes_solve(const DensityField& tau, const Vec3& g);
/// Free-space Stokes solve for an arbitrary force density on the grid.
VelocityField stokes_solve(const GridSpec& grid, const Components3& force);

/// 5φ Φ∗div(τ ev) with v = Φ∗(τg): the first-order Einstein correction to the velocity.
/// Equals −5φ(eΦ ∗ (τ(eΦg ∗ τ))) in the kernel notation of the particle model.
VelocityField einstein_strain_correction(const DensityField& tau, const PhysicalSetup& setup);

struct EffectiveSolveOptions {
  double tol = 1e-10;
  int max_iterations = 200;
  /// Enforce 5φ‖ρ‖∞ < margin before iterating.
  bool check_margin = true;
  double margin = 0.5;
};

struct EffectiveSolveResult {
  VelocityField velocity;
  Components6 strain;  // eu of the returned velocity
  int iterations = 0;
  std::vector<double> updates;  // relative update per iteration
};

/// Fixed point u = Φ∗(ρg) + 5φ Φ∗div(ρ eu). Throws NonContractionError when the margin check
/// fails or the update ratio is ≥ 1 on two consecutive iterations. `warm_strain` (e.g. the
/// previous time step's strain) replaces the zero initial guess.
EffectiveSolveResult solve_effective_velocity(const DensityField& rho, const PhysicalSetup& setup,
                                              const EffectiveSolveOptions& opts = {},
                                              const Components6* warm_strain = nullptr);

/// Relative residual of the discretised equation: the solve with source ρg + 5φ div(ρ·sol.strain)
/// is compared against sol.velocity and sol.strain; the larger relative L2 mismatch is returned.
double effective_weak_residual(const DensityField& rho, const EffectiveSolveResult& sol, const PhysicalSetup& setup);

struct TransportReport {
  double mass_correction = 0.0;  // |renormalisation factor − 1|
  bool warned = false;
};

/// Semi-Lagrangian step along vel + drift (RK2 backtrace, trilinear foot interpolation), mass
/// renormalised to its previous value. Throws std::domain_error if a foot leaves the padded domain.
DensityField transport_step(const DensityField& rho, const VelocityField& vel, const Vec3& drift, double dt,
                            TransportReport* report = nullptr);

enum class ContinuumSystem { kTau, kRho, kRhoEff };
const char* to_string(ContinuumSystem s);

struct Snapshot {
  double time = 0.0;
  DensityField density;
  VelocityField velocity;
  std::vector<Vec3> tracers;
};

struct EvolveOptions {
  int output_stride = 1;
  /// Lagrangian markers advected by the same velocity + drift.
  std::vector<Vec3> tracers;
  EffectiveSolveOptions effective;
  /// Called after every step with (time, density); may be empty.
  std::function<void(double, const DensityField&)> on_step;
};

/// Alternates velocity solve and transport; returns snapshots at t = 0 and every output stride.
/// The number of steps is ceil(t_end/dt) with the last one shortened to land on t_end.
std::vector<Snapshot> evolve_system(ContinuumSystem which, const DensityField& rho0, const PhysicalSetup& setup,
                                    double t_end, double dt, const EvolveOptions& opts = {});

}  // namespace sedlab
