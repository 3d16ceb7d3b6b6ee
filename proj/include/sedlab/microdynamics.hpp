#pragma once

// Particle dynamics under explicit velocity models:
//   MF0   Vᵢ = g/(6πNR) + (1/N) Σ_{j≠i} Φ(Xᵢ−Xⱼ)g
//   MF1   MF0 + (5φ/N) Σ_{j≠i} ∇Φ(Xᵢ−Xⱼ):Sⱼ,   Sⱼ = (1/N) Σ_{k≠j} eΦ(Xⱼ−X_k)g
//   MF1C  MF0 + a continuum field (the Einstein correction built from a density τ) sampled at Xᵢ
// The dipole term enters with the sign of a rigid sphere reflecting the ambient strain, which is
// also the sign of the continuum correction, so MF1 and MF1C agree as N → ∞.

#include <sedlab/configuration.hpp>
#include <sedlab/grid.hpp>

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace sedlab {

std::vector<Vec3> velocities_mf0(const ParticleConfiguration& cfg);
std::vector<Vec3> velocities_mf1(const ParticleConfiguration& cfg);
/// MF0 plus trilinear samples of `correction`; throws std::domain_error if a particle is outside its grid.
std::vector<Vec3> velocities_mf1c(const ParticleConfiguration& cfg, const VelocityField& correction);

/// Sⱼ for every particle, stored as (xx, yy, zz, xy, xz, yz).
std::vector<std::array<double, 6>> ambient_strains(const ParticleConfiguration& cfg);

enum class ModelKind { kMF0, kMF1, kMF1C };
const char* to_string(ModelKind k);
ModelKind model_from_string(const std::string& s);

struct VelocityModel {
  ModelKind kind = ModelKind::kMF0;
  /// MF1C only: returns the correction field valid at time t for the current configuration.
  std::function<VelocityField(double t, const ParticleConfiguration&)> correction;
  /// MF1C only: field refresh cadence (0 = every step). Stages within a step share one field.
  double refresh_interval = 0.0;

  static VelocityModel mf0() { return {ModelKind::kMF0, {}, 0.0}; }
  static VelocityModel mf1() { return {ModelKind::kMF1, {}, 0.0}; }
  static VelocityModel mf1c(std::function<VelocityField(double, const ParticleConfiguration&)> f, double every = 0.0) {
    return {ModelKind::kMF1C, std::move(f), every};
  }
};

struct SimulationTrace {
  std::vector<double> times;
  std::vector<ParticleConfiguration> snapshots;
  std::vector<ConfigurationStats> stats;  // d_min = +inf for a single particle
  std::vector<double> model_gap;          // maxᵢ |Vᵢ^MF1 − Vᵢ^MF0|
};

struct IntegrateOptions {
  int output_stride = 1;
  double stats_q = 1.0;
  bool record_model_gap = true;
};

/// Classical RK4 with a fixed step (shortened uniformly so that an integer number of steps hits
/// t_end). Throws ContactError once d_min ≤ 2R(1+1e−6) and std::runtime_error on non-finite positions.
SimulationTrace integrate(const ParticleConfiguration& cfg, const VelocityModel& model, double t_end, double dt,
                          const IntegrateOptions& opts = {});

/// dt = min(0.05, 0.1·d_min / maxᵢ|Vᵢ|) evaluated on the initial configuration.
double default_time_step(const ParticleConfiguration& cfg, const std::vector<Vec3>& velocities);

void write_trace_csv(std::ostream& os, const SimulationTrace& trace);
void write_trace_csv(const std::string& path, const SimulationTrace& trace);

}  // namespace sedlab
