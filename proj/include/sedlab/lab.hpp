#pragma once
// Experiment harness: matched micro / macro runs, distances between them over time, sweeps over
// N or φ, and log-log rate fits.
//
// Continuum measures enter the transport distances as Lagrangian tracer clouds: ρ₀ is quantised
// into atoms (about `atoms_per_particle`·N of them), the atoms ride along each continuum flow,
// and W_p / W_∞ are computed exactly between the particle cloud and the tracer cloud.

#include <sedlab/configuration.hpp>
#include <sedlab/continuum.hpp>
#include <sedlab/microdynamics.hpp>
#include <sedlab/wasserstein.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sedlab {

enum class BlobShape { kPolynomial, kUniform };

struct ExperimentSetup {
  BlobShape blob_shape = BlobShape::kPolynomial;
  double blob_radius = 2.0;
  Vec3 blob_center{0.0, 0.0, 0.0};
  Vec3 gravity{0.0, 0.0, -16.0};
  double t_end = 0.5;
  double dt = 0.02;
  int output_stride = 5;  // in steps
  GridSpec grid = GridSpec::cube(Vec3(0.0, 0.0, -0.6), 6.4, 64);
  double atoms_per_particle = 8.0;
  std::uint64_t seed = 1;
  double stats_q = 1.0;
  /// Compute W₁/W₂ at every output time rather than only at the first and last one.
  bool wp_every_output = false;
  /// W₁/W₂ at the last output; t = 0 is always computed (it is the floor).
  bool wp_at_end = true;
  bool with_effective = true;
  TransportOptions transport{.pair_cap = 50'000'000};

  void validate() const;
  std::unique_ptr<ParticleDensity> density() const;
  /// dt shortened so that an integer number of steps lands on t_end.
  double step() const;
  int steps() const;
};

struct SweepPlan {
  std::vector<int> N_values{512, 1024, 2048, 4096};
  double theta = 0.5;
  std::optional<double> phi0;
  /// Same φ for every N instead of the schedule φ₀N^{−θ}.
  std::optional<double> phi;
  ModelKind model = ModelKind::kMF0;
  ExperimentSetup setup;
  std::string output_dir = "out";

  /// N strictly increasing and ≥ 2, θ ∈ (0,1) unless φ is fixed.
  void validate() const;
  double phi_for(int n) const;
};

struct ComparisonRecord {
  int N = 0;
  double phi = 0.0;
  double t = 0.0;
  double eta_tau = 0.0, eta_eff = 0.0;  // W_∞ to τ and ρ_eff
  double w1_tau = 0.0, w2_tau = 0.0, w1_eff = 0.0, w2_eff = 0.0;  // NaN when not computed
  double dmin = 0.0, alpha2 = 0.0, alpha3 = 0.0;
  double floor_w2 = 0.0;  // W₂(ρ_N(0), ρ₀)
  double vel_err_q2 = 0.0;  // RMS |v_τ − u_micro| over the probe set
};

struct ComparisonRun {
  int N = 0;
  double phi = 0.0;
  ModelKind model = ModelKind::kMF0;
  bool valid = true;
  std::string error;
  double drift = 0.0;  // |g|/(6πNR)
  double floor_w2 = 0.0;
  double tracer_bound = 0.0;  // displacement bound of the tracer quantisation
  std::size_t tracer_atoms = 0;
  std::vector<ComparisonRecord> records;
  std::vector<double> model_gap;  // maxᵢ|V^MF1 − V^MF0| per output time
  /// Per output time, the largest rate −ΔV·ΔX/|ΔX|² over pairs closer than 2 d_min.
  std::vector<double> pair_compression;
};

/// Particles from generate_well_prepared, continuum systems from ρ₀ itself on setup.grid.
/// A contact or solver failure marks the run invalid instead of throwing.
ComparisonRun run_comparison(const ExperimentSetup& setup, int n, double phi, ModelKind model);

struct RateFit {
  std::string name;
  std::vector<double> abscissa;
  std::vector<double> ordinate;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares of log(ordinate) on log(abscissa). Throws std::invalid_argument for fewer than
/// two points or non-positive data.
RateFit fit_rate(std::string name, std::vector<double> abscissa, std::vector<double> ordinate);

struct SweepResult {
  std::vector<ComparisonRun> runs;
  std::vector<RateFit> fits;
  bool partial = false;
};

/// run_comparison per N (serially, in N order) plus the floor fit W₂(ρ_N(0),ρ₀) vs N and, for MF1
/// runs, the error-vs-φ fits. Writes records.csv and fits.json into plan.output_dir when non-empty.
SweepResult run_sweep(const SweepPlan& plan, const std::function<void(const ComparisonRun&)>& progress = {});

/// Continuum-only distances at t_end between the three systems for each φ.
struct ContinuumPoint {
  double phi = 0.0;
  double w2_eff_tau = 0.0, w2_eff_rho = 0.0;
  /// |W₂(M atoms) − W₂(M/8 atoms)|: sensitivity of the tracer distances to the quantisation.
  double err_eff_tau = 0.0, err_eff_rho = 0.0;
  int iterations = 0;  // fixed-point iterations at t = 0
};

struct ContinuumStudy {
  std::vector<ContinuumPoint> points;
  RateFit eff_tau, eff_rho;
};

/// `particle_count` only fixes the drift g/(6πNR) and R through φ.
ContinuumStudy run_continuum_study(const ExperimentSetup& setup, const std::vector<double>& phis,
                                   int particle_count = 4096, std::size_t tracer_atoms = 4096);

/// Ĉ = max over t > 0 of log(η_τ(t)/η_τ(0))/t.
double eta_growth_constant(const ComparisonRun& run);
/// C for d_min(t) ≥ d_min(0)e^{−Ct}: the largest near-pair compression rate seen at the outputs. It
/// bounds the decay rate of d_min, and unlike the envelope fit below it does not hinge on which
/// single pair happens to be closest.
double dmin_decay_constant(const ComparisonRun& run);
/// Smallest C that makes the d_min envelope hold at the recorded outputs (0 if d_min never drops).
double dmin_envelope_constant(const ComparisonRun& run);

struct KernelConditionReport {
  double alpha = 0.0;
  double constant = 0.0;  // max of |x|^α(|K| + |x||∇K|) over the samples
  double near_constant = 0.0, far_constant = 0.0;  // the same over the lowest and the highest decade of |x|
  bool uniform = false;  // near and far constants within a factor 10 of each other
  double max_divergence = 0.0;  // finite-difference |div K| relative to |∇K|
  bool divergence_ok = false;
  bool pass = false;
  std::size_t samples = 0;
};

/// Samples K on log-uniform radii in [r_min, r_max] with random directions; gradients and the
/// divergence by central differences with step 1e-5|x|.
KernelConditionReport check_kernel_condition(const std::function<Vec3(const Vec3&)>& kernel, double alpha,
                                             std::size_t samples = 10000, double r_min = 1e-2, double r_max = 1e2,
                                             std::uint64_t seed = 1);

void write_records_csv(std::ostream& os, const std::vector<ComparisonRun>& runs);
void write_fits_json(std::ostream& os, const std::vector<RateFit>& fits);

/// Key/value configuration with sections [setup], [grid], [sweep], [output]. Unknown keys are errors.
SweepPlan load_sweep_plan(const std::string& path);
SweepPlan parse_sweep_plan(std::istream& is);
/// Every key with its default value, as a commented config file.
std::string default_config_text();

}  // namespace sedlab
