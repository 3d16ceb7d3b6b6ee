#include <sedlab/lab.hpp>

#include <sedlab/densities.hpp>
#include <sedlab/kernels.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

namespace sedlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Cell-centre lattice over a ball-shaped support of radius a, spaced so that about `target`
// cells carry mass.
DiscreteMeasure quantize_blob(const ParticleDensity& blob, double a, double target) {
  const double h = std::cbrt(4.0 * std::numbers::pi / 3.0 * a * a * a / std::max(target, 1.0));
  const int n = std::max(2, int(std::ceil(2.0 * a / h)));
  const auto lattice = GridSpec::cube(blob.support_center(), n * h, n);
  const auto raw = sample_density(lattice, [&](const Vec3& x) { return blob.value(x); });
  const auto field = raw.scaled(1.0 / raw.total_mass());  // a sharp edge loses a little mass
  return quantize(field, std::numeric_limits<std::size_t>::max());
}

// max over pairs closer than 2 d_min of −(Vᵢ−Vⱼ)·(Xᵢ−Xⱼ)/|Xᵢ−Xⱼ|²: how fast the closest pairs can shrink
double pair_compression(const ParticleConfiguration& cfg, const VelocityModel& vm) {
  const auto& x = cfg.positions;
  if (x.size() < 2) return 0.0;
  std::vector<Vec3> v;
  switch (vm.kind) {
    case ModelKind::kMF0: v = velocities_mf0(cfg); break;
    case ModelKind::kMF1: v = velocities_mf1(cfg); break;
    case ModelKind::kMF1C: v = velocities_mf1c(cfg, vm.correction(cfg.time, cfg)); break;
  }
  const double reach = 2.0 * min_distance(x);
  double c = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const Vec3 d = x[i] - x[j];
      const double r2 = d.squaredNorm();
      if (r2 > reach * reach) continue;
      c = std::max(c, -(v[i] - v[j]).dot(d) / r2);
    }
  return c;
}

DiscreteMeasure moved(const DiscreteMeasure& base, std::vector<Vec3> points) {
  DiscreteMeasure m = base;
  m.points = std::move(points);
  return m;
}

DensityField initial_density(const ExperimentSetup& s, const ParticleDensity& blob) {
  const auto f = sample_density(s.grid, [&](const Vec3& x) { return blob.value(x); });
  return f.scaled(1.0 / f.total_mass());
}

// Lattice of probes inside a ball of 0.8 blob radii, spacing a fifth of the radius.
std::vector<Vec3> probe_set(const ExperimentSetup& s) {
  std::vector<Vec3> out;
  const double r = 0.8 * s.blob_radius, h = 0.2 * s.blob_radius;
  const int m = int(std::floor(r / h));
  for (int k = -m; k <= m; ++k)
    for (int j = -m; j <= m; ++j)
      for (int i = -m; i <= m; ++i) {
        const Vec3 d(i * h, j * h, k * h);
        if (d.norm() <= r) out.push_back(s.blob_center + d);
      }
  return out;
}

Vec3 micro_field(const ParticleConfiguration& cfg, const std::vector<std::array<double, 6>>* strains, const Vec3& x) {
  Vec3 u = Vec3::Zero();
  const double pre = 5.0 * cfg.setup.volume_fraction() / double(cfg.size());
  for (std::size_t j = 0; j < cfg.size(); ++j) {
    const Vec3 d = x - cfg.positions[j];
    u += single_particle_field(d, cfg.setup);
    if (strains) u += pre * detail::stresslet_apply6(d, (*strains)[j].data());
  }
  return u;
}

double probe_error(const ParticleConfiguration& cfg, ModelKind model, const VelocityField& v,
                   const std::vector<Vec3>& probes) {
  std::vector<std::array<double, 6>> strains;
  if (model != ModelKind::kMF0) strains = ambient_strains(cfg);
  const double excl = 2.0 * cfg.setup.radius;
  double acc = 0.0;
  std::size_t used = 0;
  for (const Vec3& x : probes) {
    bool near = false;
    for (const Vec3& p : cfg.positions) {
      if ((p - x).squaredNorm() < excl * excl) {
        near = true;
        break;
      }
    }
    if (near) continue;
    const Vec3 u = micro_field(cfg, strains.empty() ? nullptr : &strains, x);
    acc += (v.interpolate(x) - u).squaredNorm();
    ++used;
  }
  return used ? std::sqrt(acc / double(used)) : kNaN;
}

}  // namespace

void ExperimentSetup::validate() const {
  grid.validate();
  if (!(blob_radius > 0.0)) throw std::invalid_argument("setup: blob_radius must be > 0");
  if (!(t_end >= 0.0)) throw std::invalid_argument("setup: t_end must be >= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("setup: dt must be > 0");
  if (output_stride < 1) throw std::invalid_argument("setup: output_stride must be >= 1");
  if (!(atoms_per_particle > 0.0)) throw std::invalid_argument("setup: atoms_per_particle must be > 0");
  const Vec3 lo = grid.origin, hi = grid.origin + grid.extent();
  for (int a = 0; a < 3; ++a) {
    if (blob_center[a] - blob_radius <= lo[a] || blob_center[a] + blob_radius >= hi[a]) {
      throw std::invalid_argument("setup: grid does not contain the initial blob");
    }
  }
}

std::unique_ptr<ParticleDensity> ExperimentSetup::density() const {
  if (blob_shape == BlobShape::kUniform) return std::make_unique<UniformBall>(blob_center, blob_radius);
  return std::make_unique<PolynomialBlob>(blob_center, blob_radius);
}

int ExperimentSetup::steps() const { return t_end > 0.0 ? int(std::ceil(t_end / dt - 1e-9)) : 0; }

double ExperimentSetup::step() const { return steps() > 0 ? t_end / steps() : dt; }

void SweepPlan::validate() const {
  setup.validate();
  if (N_values.empty()) throw std::invalid_argument("sweep: N_values is empty");
  for (std::size_t i = 0; i < N_values.size(); ++i) {
    if (N_values[i] < 2) throw std::invalid_argument("sweep: every N must be >= 2");
    if (i > 0 && N_values[i] <= N_values[i - 1]) throw std::invalid_argument("sweep: N_values must increase strictly");
  }
  if (!phi && !(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("sweep: theta must lie in (0,1)");
  if (phi && !(*phi >= 0.0)) throw std::invalid_argument("sweep: phi must be >= 0");
}

double SweepPlan::phi_for(int n) const {
  GeneratorOptions o;
  o.theta = theta;
  o.phi0 = phi0;
  o.phi = phi;
  return o.volume_fraction(n);
}

ComparisonRun run_comparison(const ExperimentSetup& setup, int n, double phi, ModelKind model) {
  setup.validate();
  ComparisonRun run;
  run.N = n;
  run.phi = phi;
  run.model = model;

  const auto density = setup.density();
  const ParticleDensity& blob = *density;
  GeneratorOptions gen;
  gen.seed = setup.seed;
  gen.gravity = setup.gravity;
  gen.phi = phi;
  const ParticleConfiguration cfg = generate_well_prepared(blob, n, gen);
  run.drift = cfg.setup.self_drift().norm();

  const DiscreteMeasure atoms = quantize_blob(blob, setup.blob_radius, setup.atoms_per_particle * n);
  run.tracer_bound = atoms.displacement_bound;
  run.tracer_atoms = atoms.size();

  const DensityField rho0 = initial_density(setup, blob);
  const double h = setup.step();

  try {
    EvolveOptions eo;
    eo.tracers = atoms.points;
    // MF1C samples the τ-system correction at every step
    eo.output_stride = model == ModelKind::kMF1C ? 1 : setup.output_stride;
    const auto tau = evolve_system(ContinuumSystem::kTau, rho0, cfg.setup, setup.t_end, h, eo);
    eo.output_stride = setup.output_stride;
    std::vector<Snapshot> eff;
    if (setup.with_effective) eff = evolve_system(ContinuumSystem::kRhoEff, rho0, cfg.setup, setup.t_end, h, eo);

    VelocityModel vm = model == ModelKind::kMF0 ? VelocityModel::mf0() : VelocityModel::mf1();
    if (model == ModelKind::kMF1C) {
      vm = VelocityModel::mf1c([&](double t, const ParticleConfiguration&) {
        const auto k = std::min<std::size_t>(tau.size() - 1, std::size_t(std::llround(t / h)));
        return einstein_strain_correction(tau[k].density, cfg.setup);
      });
    }
    IntegrateOptions io;
    io.output_stride = setup.output_stride;
    io.stats_q = setup.stats_q;
    const SimulationTrace trace = integrate(cfg, vm, setup.t_end, h, io);

    const auto probes = probe_set(setup);
    auto tau_at = [&](std::size_t k) -> const Snapshot& {
      return model == ModelKind::kMF1C ? tau[std::min(tau.size() - 1, k * std::size_t(setup.output_stride))] : tau[k];
    };
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
      const auto& tk = tau_at(k);
      ComparisonRecord r;
      r.N = n;
      r.phi = phi;
      r.t = trace.times[k];
      if (std::abs(tk.time - r.t) > 1e-9 * std::max(1.0, setup.t_end)) {
        throw std::logic_error("run_comparison: micro and continuum output times disagree");
      }
      const auto mu = DiscreteMeasure::empirical(trace.snapshots[k].positions);
      const auto nu_tau = moved(atoms, tk.tracers);
      r.eta_tau = wasserstein_inf(mu, nu_tau, setup.transport).value();
      const bool wp = setup.wp_every_output || k == 0 || (setup.wp_at_end && k + 1 == trace.times.size());
      r.w1_tau = wp ? wasserstein_p(mu, nu_tau, 1.0, setup.transport).value() : kNaN;
      r.w2_tau = wp ? wasserstein_p(mu, nu_tau, 2.0, setup.transport).value() : kNaN;
      if (setup.with_effective) {
        const auto nu_eff = moved(atoms, eff[k].tracers);
        r.eta_eff = wasserstein_inf(mu, nu_eff, setup.transport).value();
        r.w1_eff = wp ? wasserstein_p(mu, nu_eff, 1.0, setup.transport).value() : kNaN;
        r.w2_eff = wp ? wasserstein_p(mu, nu_eff, 2.0, setup.transport).value() : kNaN;
      } else {
        r.eta_eff = r.w1_eff = r.w2_eff = kNaN;
      }
      const auto& st = trace.stats[k];
      r.dmin = st.d_min;
      r.alpha2 = st.alpha[1];
      r.alpha3 = st.alpha[2];
      r.vel_err_q2 = probe_error(trace.snapshots[k], model, tk.velocity, probes);
      if (k == 0) run.floor_w2 = r.w2_tau;
      r.floor_w2 = run.floor_w2;
      run.records.push_back(r);
      run.model_gap.push_back(trace.model_gap[k]);
      run.pair_compression.push_back(pair_compression(trace.snapshots[k], vm));
    }
  } catch (const std::exception& e) {
    run.valid = false;
    run.error = e.what();
  }
  return run;
}

RateFit fit_rate(std::string name, std::vector<double> x, std::vector<double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_rate: need at least two (x, y) pairs");
  const std::size_t n = x.size();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("fit_rate: data must be positive");
    sx += std::log(x[i]);
    sy += std::log(y[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx, dy = std::log(y[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_rate: abscissa values coincide");
  RateFit f;
  f.name = std::move(name);
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  f.abscissa = std::move(x);
  f.ordinate = std::move(y);
  return f;
}

double eta_growth_constant(const ComparisonRun& run) {
  if (run.records.empty()) return kNaN;
  const double e0 = run.records.front().eta_tau;
  double c = 0.0;
  for (const auto& r : run.records)
    if (r.t > 0.0 && e0 > 0.0) c = std::max(c, std::log(r.eta_tau / e0) / r.t);
  return c;
}

double dmin_decay_constant(const ComparisonRun& run) {
  if (run.pair_compression.empty()) return kNaN;
  double c = 0.0;
  for (double x : run.pair_compression) c = std::max(c, x);
  return c;
}

double dmin_envelope_constant(const ComparisonRun& run) {
  if (run.records.empty()) return kNaN;
  const double d0 = run.records.front().dmin;
  double c = 0.0;
  for (const auto& r : run.records)
    if (r.t > 0.0) c = std::max(c, std::log(d0 / r.dmin) / r.t);
  return c;
}

SweepResult run_sweep(const SweepPlan& plan, const std::function<void(const ComparisonRun&)>& progress) {
  plan.validate();
  SweepResult res;
  for (int n : plan.N_values) {
    ComparisonRun run = run_comparison(plan.setup, n, plan.phi_for(n), plan.model);
    if (!run.valid) res.partial = true;
    if (progress) progress(run);
    res.runs.push_back(std::move(run));
  }

  std::vector<double> ns, floors, phis, eta_end, ratio;
  for (const auto& r : res.runs) {
    if (!r.valid || r.records.empty()) continue;
    ns.push_back(r.N);
    floors.push_back(r.floor_w2);
    phis.push_back(r.phi);
    eta_end.push_back(r.records.back().eta_tau);
    ratio.push_back(r.records.back().eta_eff / r.records.back().eta_tau);
  }
  auto try_fit = [&](const std::string& name, const std::vector<double>& x, const std::vector<double>& y) {
    try {
      res.fits.push_back(fit_rate(name, x, y));
    } catch (const std::invalid_argument&) {
      // too few valid points or flat abscissa (fixed φ)
    }
  };
  try_fit("floor_w2_vs_N", ns, floors);
  try_fit("eta_tau_end_vs_phi", phis, eta_end);
  if (plan.setup.with_effective) try_fit("eta_ratio_end_vs_phi", phis, ratio);

  if (!plan.output_dir.empty()) {
    std::filesystem::create_directories(plan.output_dir);
    std::ofstream rec(std::filesystem::path(plan.output_dir) / "records.csv");
    if (!rec) throw std::runtime_error("cannot write records.csv in " + plan.output_dir);
    write_records_csv(rec, res.runs);
    std::ofstream fits(std::filesystem::path(plan.output_dir) / "fits.json");
    if (!fits) throw std::runtime_error("cannot write fits.json in " + plan.output_dir);
    write_fits_json(fits, res.fits);
  }
  return res;
}

ContinuumStudy run_continuum_study(const ExperimentSetup& setup, const std::vector<double>& phis, int particle_count,
                                   std::size_t tracer_atoms) {
  setup.validate();
  if (phis.size() < 2) throw std::invalid_argument("run_continuum_study: need at least two phi values");
  const auto density = setup.density();
  const ParticleDensity& blob = *density;
  const DiscreteMeasure fine = quantize_blob(blob, setup.blob_radius, double(tracer_atoms));
  const DiscreteMeasure coarse = quantize_blob(blob, setup.blob_radius, double(tracer_atoms) / 8.0);
  const DensityField rho0 = initial_density(setup, blob);

  EvolveOptions eo;
  eo.tracers = fine.points;
  eo.tracers.insert(eo.tracers.end(), coarse.points.begin(), coarse.points.end());
  eo.output_stride = std::max(1, setup.steps());

  auto split = [&](const Snapshot& s) {
    std::vector<Vec3> a(s.tracers.begin(), s.tracers.begin() + fine.size());
    std::vector<Vec3> b(s.tracers.begin() + fine.size(), s.tracers.end());
    return std::make_pair(moved(fine, std::move(a)), moved(coarse, std::move(b)));
  };
  auto w2 = [&](const DiscreteMeasure& a, const DiscreteMeasure& b) {
    return wasserstein_p(a, b, 2.0, setup.transport).value();
  };

  ContinuumStudy study;
  std::vector<double> x, y1, y2;
  for (double phi : phis) {
    const auto ps = PhysicalSetup::with_volume_fraction(setup.gravity, particle_count, phi);
    ContinuumPoint pt;
    pt.phi = phi;
    pt.iterations = solve_effective_velocity(rho0, ps, eo.effective).iterations;
    const auto tau = evolve_system(ContinuumSystem::kTau, rho0, ps, setup.t_end, setup.step(), eo).back();
    const auto rho = evolve_system(ContinuumSystem::kRho, rho0, ps, setup.t_end, setup.step(), eo).back();
    const auto eff = evolve_system(ContinuumSystem::kRhoEff, rho0, ps, setup.t_end, setup.step(), eo).back();
    const auto [tf, tc] = split(tau);
    const auto [rf, rc] = split(rho);
    const auto [ef, ec] = split(eff);
    pt.w2_eff_tau = w2(ef, tf);
    pt.w2_eff_rho = w2(ef, rf);
    pt.err_eff_tau = std::abs(pt.w2_eff_tau - w2(ec, tc));
    pt.err_eff_rho = std::abs(pt.w2_eff_rho - w2(ec, rc));
    study.points.push_back(pt);
    x.push_back(phi);
    y1.push_back(pt.w2_eff_tau);
    y2.push_back(pt.w2_eff_rho);
  }
  study.eff_tau = fit_rate("w2_eff_tau_vs_phi", x, y1);
  study.eff_rho = fit_rate("w2_eff_rho_vs_phi", x, y2);
  return study;
}

KernelConditionReport check_kernel_condition(const std::function<Vec3(const Vec3&)>& kernel, double alpha,
                                             std::size_t samples, double r_min, double r_max, std::uint64_t seed) {
  KernelConditionReport rep;
  rep.alpha = alpha;
  rep.samples = samples;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logr(std::log(r_min), std::log(r_max));
  std::normal_distribution<double> gauss;
  for (std::size_t s = 0; s < samples; ++s) {
    Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
    dir.normalize();
    const double r = std::exp(logr(rng));
    const Vec3 x = r * dir;
    const double hstep = 1e-5 * r;
    Mat3 grad;  // grad(i, a) = ∂_a K_i
    for (int a = 0; a < 3; ++a) {
      const Vec3 e = hstep * Vec3::Unit(a);
      grad.col(a) = (kernel(x + e) - kernel(x - e)) / (2.0 * hstep);
    }
    const double gn = grad.norm();
    const double bound = std::pow(r, alpha) * (kernel(x).norm() + r * gn);
    rep.constant = std::max(rep.constant, bound);
    if (r <= 10.0 * r_min) rep.near_constant = std::max(rep.near_constant, bound);
    if (r >= 0.1 * r_max) rep.far_constant = std::max(rep.far_constant, bound);
    if (gn > 0.0) rep.max_divergence = std::max(rep.max_divergence, std::abs(grad.trace()) / gn);
  }
  const double lo = std::min(rep.near_constant, rep.far_constant), hi = std::max(rep.near_constant, rep.far_constant);
  rep.uniform = lo > 0.0 && hi <= 10.0 * lo;
  rep.divergence_ok = rep.max_divergence <= 1e-6;
  rep.pass = rep.uniform && rep.divergence_ok && std::isfinite(rep.constant);
  return rep;
}

void write_records_csv(std::ostream& os, const std::vector<ComparisonRun>& runs) {
  os << "N,phi,t,eta_tau,eta_eff,w1_tau,w2_tau,w1_eff,w2_eff,dmin,alpha2,alpha3,floor_w2,vel_err_q2\n";
  os << std::setprecision(12);
  for (const auto& run : runs)
    for (const auto& r : run.records) {
      os << r.N << ',' << r.phi << ',' << r.t << ',' << r.eta_tau << ',' << r.eta_eff << ',' << r.w1_tau << ','
         << r.w2_tau << ',' << r.w1_eff << ',' << r.w2_eff << ',' << r.dmin << ',' << r.alpha2 << ',' << r.alpha3
         << ',' << r.floor_w2 << ',' << r.vel_err_q2 << '\n';
    }
}

void write_fits_json(std::ostream& os, const std::vector<RateFit>& fits) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : fits) {
    j[f.name] = {{"slope", f.slope},         {"intercept", f.intercept}, {"r_squared", f.r_squared},
                 {"abscissa", f.abscissa}, {"ordinate", f.ordinate}};
  }
  os << j.dump(2) << '\n';
}

}  // namespace sedlab
