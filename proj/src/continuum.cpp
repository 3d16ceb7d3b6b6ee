#include <sedlab/continuum.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>

namespace sedlab {

namespace {

double l2(const VelocityField& v) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c)
    for (double x : v.component(c)) s += x * x;
  return std::sqrt(s);
}

double l2_diff(const VelocityField& a, const VelocityField& b) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    const auto& x = a.component(c);
    const auto& y = b.component(c);
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  }
  return std::sqrt(s);
}

Components3 density_force(const DensityField& rho, const Vec3& g) {
  Components3 f;
  for (int c = 0; c < 3; ++c) {
    f[c].resize(rho.values().size());
    for (std::size_t i = 0; i < f[c].size(); ++i) f[c][i] = rho.values()[i] * g[c];
  }
  return f;
}

Components6 weighted_strain(const DensityField& w, double factor, const Components6& e) {
  Components6 s;
  for (int c = 0; c < 6; ++c) {
    s[c].resize(e[c].size());
    for (std::size_t i = 0; i < e[c].size(); ++i) s[c][i] = factor * w.values()[i] * e[c][i];
  }
  return s;
}

}  // namespace

VelocityField stokes_solve(const DensityField& tau, const Vec3& g) {
  return StokesSolver::for_grid(tau.grid())->solve_density(tau, g).velocity;
}

VelocityField stokes_solve(const GridSpec& grid, const Components3& force) {
  return StokesSolver::for_grid(grid)->solve(&force, nullptr).velocity;
}

VelocityField einstein_strain_correction(const DensityField& tau, const PhysicalSetup& setup) {
  const auto solver = StokesSolver::for_grid(tau.grid());
  const double phi = setup.volume_fraction();
  if (phi == 0.0 || tau.total_mass() == 0.0) return VelocityField(tau.grid());
  const auto v = solver->solve_density(tau, setup.gravity, true);
  const Components6 sigma = weighted_strain(tau, 5.0 * phi, v.strain);
  return solver->solve(nullptr, &sigma).velocity;
}

EffectiveSolveResult solve_effective_velocity(const DensityField& rho, const PhysicalSetup& setup,
                                              const EffectiveSolveOptions& opts, const Components6* warm_strain) {
  const double phi = setup.volume_fraction();
  const double coupling = 5.0 * phi * rho.max_value();
  if (opts.check_margin && !(coupling < opts.margin)) {
    throw NonContractionError("solve_effective_velocity: 5*phi*max(rho) = " + std::to_string(coupling) +
                              " violates the contraction margin " + std::to_string(opts.margin));
  }
  const auto solver = StokesSolver::for_grid(rho.grid());
  const Components3 force = density_force(rho, setup.gravity);

  Components6 warm_sigma;
  if (warm_strain && phi != 0.0) warm_sigma = weighted_strain(rho, 5.0 * phi, *warm_strain);
  auto first = solver->solve(&force, warm_sigma[0].empty() ? nullptr : &warm_sigma, true);
  EffectiveSolveResult res;
  res.velocity = std::move(first.velocity);
  res.strain = std::move(first.strain);
  res.iterations = 1;
  if (phi == 0.0) return res;

  int bad = 0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Components6 sigma = weighted_strain(rho, 5.0 * phi, res.strain);
    auto next = solver->solve(&force, &sigma, true);
    const double norm = l2(next.velocity);
    const double upd = norm > 0.0 ? l2_diff(next.velocity, res.velocity) / norm : 0.0;
    res.velocity = std::move(next.velocity);
    res.strain = std::move(next.strain);
    ++res.iterations;
    if (!res.updates.empty() && upd >= res.updates.back() && upd > 1e-14) {
      if (++bad >= 2) {
        throw NonContractionError("solve_effective_velocity: update ratio >= 1 on two consecutive iterations");
      }
    } else {
      bad = 0;
    }
    res.updates.push_back(upd);
    if (upd < opts.tol) return res;
  }
  throw NonContractionError("solve_effective_velocity: no convergence in " + std::to_string(opts.max_iterations) +
                            " iterations");
}

double effective_weak_residual(const DensityField& rho, const EffectiveSolveResult& sol, const PhysicalSetup& setup) {
  // Substitute the returned strain into the discretised equation and compare both outputs.
  const auto solver = StokesSolver::for_grid(rho.grid());
  const Components3 force = density_force(rho, setup.gravity);
  const Components6 sigma = weighted_strain(rho, 5.0 * setup.volume_fraction(), sol.strain);
  const auto again = solver->solve(&force, &sigma, true);
  const double du = l2_diff(again.velocity, sol.velocity), nu = l2(sol.velocity);
  double de = 0.0, ne = 0.0;
  for (int c = 0; c < 6; ++c) {
    const double w = c < 3 ? 1.0 : 2.0;
    for (std::size_t i = 0; i < sol.strain[c].size(); ++i) {
      de += w * std::pow(again.strain[c][i] - sol.strain[c][i], 2);
      ne += w * sol.strain[c][i] * sol.strain[c][i];
    }
  }
  const double ru = nu > 0.0 ? du / nu : du;
  const double re = ne > 0.0 ? std::sqrt(de / ne) : std::sqrt(de);
  return std::max(ru, re);
}

DensityField transport_step(const DensityField& rho, const VelocityField& vel, const Vec3& drift, double dt,
                            TransportReport* report) {
  const GridSpec& g = rho.grid();
  if (!(vel.grid() == g)) throw std::invalid_argument("transport_step: grid mismatch");
  if (dt == 0.0) return rho;
  const auto P = g.padded_dims();
  // padded box, centred on the grid box
  const Vec3 mid_box = g.origin + 0.5 * g.extent(), half = 0.5 * g.cell * Vec3(P[0], P[1], P[2]);
  const Vec3 plo = mid_box - half, phi_ = mid_box + half;
  auto w = [&](const Vec3& x) { return vel.interpolate(x) + drift; };

  std::vector<double> out(g.size());
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 x = g.center(i, j, k);
        const Vec3 mid = x - 0.5 * dt * w(x);
        const Vec3 foot = x - dt * w(mid);
        for (int a = 0; a < 3; ++a) {
          if (foot[a] < plo[a] || foot[a] > phi_[a]) {
            throw std::domain_error("transport_step: backtrace left the padded domain; reduce dt");
          }
        }
        out[g.index(i, j, k)] = rho.interpolate(foot);
      }
  DensityField next(g, std::move(out));
  const double m0 = rho.total_mass(), m1 = next.total_mass();
  if (m1 <= 0.0) {
    if (m0 > 0.0) throw std::domain_error("transport_step: all mass left the grid");
    return next;
  }
  const double factor = m0 / m1;
  if (report) {
    report->mass_correction = std::abs(factor - 1.0);
    report->warned = report->mass_correction > 1e-3;
  }
  if (std::abs(factor - 1.0) > 1e-3) {
    std::cerr << "warning: transport mass correction " << std::abs(factor - 1.0) << " exceeds 1e-3\n";
  }
  return next.scaled(factor);
}

const char* to_string(ContinuumSystem s) {
  switch (s) {
    case ContinuumSystem::kTau: return "TAU";
    case ContinuumSystem::kRho: return "RHO";
    case ContinuumSystem::kRhoEff: return "RHO_EFF";
  }
  return "?";
}

std::vector<Snapshot> evolve_system(ContinuumSystem which, const DensityField& rho0, const PhysicalSetup& setup,
                                    double t_end, double dt, const EvolveOptions& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("evolve_system: dt must be > 0");
  if (!(t_end >= 0.0)) throw std::invalid_argument("evolve_system: t_end must be >= 0");
  rho0.require_probability();
  const auto solver = StokesSolver::for_grid(rho0.grid());
  const double phi = setup.volume_fraction();
  const Vec3 drift = setup.self_drift();
  const int steps = t_end > 0.0 ? int(std::ceil(t_end / dt - 1e-9)) : 0;
  const double h = steps > 0 ? t_end / steps : 0.0;
  const int stride = std::max(1, opts.output_stride);

  DensityField rho = rho0;
  DensityField tau = rho0;  // only evolved for RHO
  std::vector<Vec3> tracers = opts.tracers;
  Components6 eff_strain;  // warm start for RHO_EFF

  auto velocities = [&](VelocityField* tau_vel) -> VelocityField {
    switch (which) {
      case ContinuumSystem::kTau:
        return solver->solve_density(rho, setup.gravity).velocity;
      case ContinuumSystem::kRho: {
        auto v = solver->solve_density(tau, setup.gravity, phi != 0.0);
        VelocityField u;
        if (phi == 0.0) {
          u = solver->solve_density(rho, setup.gravity).velocity;
        } else {
          const Components6 sigma = weighted_strain(tau, 5.0 * phi, v.strain);
          const Components3 f = density_force(rho, setup.gravity);
          u = solver->solve(&f, &sigma).velocity;
        }
        *tau_vel = std::move(v.velocity);
        return u;
      }
      case ContinuumSystem::kRhoEff: {
        auto r = solve_effective_velocity(rho, setup, opts.effective, eff_strain[0].empty() ? nullptr : &eff_strain);
        eff_strain = std::move(r.strain);
        return std::move(r.velocity);
      }
    }
    throw std::logic_error("evolve_system: unknown system");
  };

  std::vector<Snapshot> out;
  VelocityField tau_vel;
  VelocityField u = velocities(&tau_vel);
  out.push_back({0.0, rho, u, tracers});
  for (int s = 1; s <= steps; ++s) {
    for (Vec3& x : tracers) {
      const Vec3 mid = x + 0.5 * h * (u.interpolate(x) + drift);
      x += h * (u.interpolate(mid) + drift);
    }
    DensityField next = transport_step(rho, u, drift, h);
    if (which == ContinuumSystem::kRho) tau = transport_step(tau, tau_vel, drift, h);
    rho = std::move(next);
    const double t = s * h;
    u = velocities(&tau_vel);
    if (opts.on_step) opts.on_step(t, rho);
    if (s % stride == 0 || s == steps) out.push_back({t, rho, u, tracers});
  }
  return out;
}

}  // namespace sedlab
