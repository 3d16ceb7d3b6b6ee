#pragma once

// Particle clouds, their separation / diluteness statistics, a jittered-lattice generator for
// well-prepared initial data and the mollified comparison density.

#include <sedlab/densities.hpp>
#include <sedlab/grid.hpp>
#include <sedlab/kernels.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sedlab {

struct ParticleConfiguration {
  std::vector<Vec3> positions;
  PhysicalSetup setup;
  double time = 0.0;

  std::size_t size() const { return positions.size(); }
  /// Finite positions, count matches setup, no pair closer than 2R.
  void validate() const;
};

struct ConfigurationStats {
  double d_min = 0.0;
  std::array<double, 3> alpha{0.0, 0.0, 0.0};  // α₁, α₂, α₃
  double q = 1.0;
  double lambda_q = 0.0;
  double c0 = 0.0;  // R³ / d_min³
  std::size_t closest_i = 0, closest_j = 0;
};

/// αₖ = maxᵢ (1/N) Σ_{j≠i} |Xᵢ−Xⱼ|^{−k},  λ_q = maxᵢ Σ_{j≠i} R³/|Xᵢ−Xⱼ|^{2q}.
/// Throws std::invalid_argument for N < 2 and DomainError for coincident particles.
ConfigurationStats compute_stats(const ParticleConfiguration& cfg, double q = 1.0);

/// Minimum pairwise distance with its pair; +inf for fewer than two points.
double min_distance(const std::vector<Vec3>& pts, std::size_t* i = nullptr, std::size_t* j = nullptr);

struct GeneratorOptions {
  double theta = 0.5;
  std::uint64_t seed = 1;
  Vec3 gravity{0.0, 0.0, -1.0};
  /// φ_N = φ₀ N^{−θ}. When phi0 is unset, φ₀ = 0.2 N_max^θ / log N_max so that φ log N ≤ 0.2 up to N_max.
  std::optional<double> phi0;
  int reference_n_max = 4096;
  /// Overrides the schedule entirely.
  std::optional<double> phi;
  int max_retries = 100;

  double volume_fraction(int n) const;
};

/// Jittered reference lattice pushed through the density's monotone map; deterministic in the seed.
ParticleConfiguration generate_well_prepared(const ParticleDensity& density, int n, const GeneratorOptions& opts = {});

/// ρ̄(x) = (1/(N w³)) Σᵢ ψ((x−Xᵢ)/w), ψ(y) = c_ψ(1−|y|²)³₊, w = d_min unless `width` is given.
/// Each bump is renormalised on the grid so the field carries mass exactly 1.
DensityField mollified_density(const ParticleConfiguration& cfg, const GridSpec& grid, std::optional<double> width = {});

void write_configuration(std::ostream& os, const ParticleConfiguration& cfg);
void write_configuration(const std::string& path, const ParticleConfiguration& cfg);
ParticleConfiguration read_configuration(std::istream& is);
ParticleConfiguration read_configuration(const std::string& path);

}  // namespace sedlab
