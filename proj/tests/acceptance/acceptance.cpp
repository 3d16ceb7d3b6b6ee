// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance [--only 1,4,9] [--out DIR]
// The lab criteria (6-9) take most of the time; the sweep behind 7 and 9 is shared.

#include <sedlab/configuration.hpp>
#include <sedlab/continuum.hpp>
#include <sedlab/densities.hpp>
#include <sedlab/kernels.hpp>
#include <sedlab/lab.hpp>
#include <sedlab/microdynamics.hpp>
#include <sedlab/wasserstein.hpp>

#include "../oracles/bottleneck.hpp"
#include "../oracles/dense_lp.hpp"
#include "../oracles/oseen_quadrature.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>

using namespace sedlab;

namespace {

constexpr double kPi = std::numbers::pi;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  // records a failed sub-check; keeps the first few messages
  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass || detail.str().size() < 300) detail << " [" << what << "]";
    pass = false;
  }
};

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

Vec3 random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> r(0.2, 5.0);
  return r(rng) * random_unit(rng);
}

Mat3 random_sym(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = n(rng);
  return 0.5 * (m + m.transpose());
}

template <class F>
Mat3 jacobian(F f, const Vec3& x, double h) {
  Mat3 J;
  for (int b = 0; b < 3; ++b) {
    const Vec3 e = h * Vec3::Unit(b);
    J.col(b) = (f(x + e) - f(x - e)) / (2 * h);
  }
  return J;
}

double rel(const Mat3& a, const Mat3& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

// ---------------------------------------------------------------------------------------------

void kernel_exactness(Verdict& v) {
  std::mt19937_64 rng(101);
  PhysicalSetup s;
  s.particle_count = 100;
  s.radius = 0.03;
  double worst = 0;
  for (int k = 0; k < 1000; ++k) {
    s.gravity = 3.0 * random_unit(rng);
    const Vec3 target = s.gravity / (6 * kPi * s.particle_count * s.radius);
    worst = std::max(worst, (single_particle_field(s.radius * random_unit(rng), s) - target).norm() / target.norm());
  }
  v.require(worst <= 1e-12, "surface consistency");
  v.detail << " surface=" << worst;

  double sym = 0, hom = 0, adj = 0, div = 0;
  for (int k = 0; k < 200; ++k) {
    const Vec3 x = random_point(rng), g = random_unit(rng);
    const double lam = 0.37 + 3.0 * k / 200.0;
    const Mat3 P = oseen(x);
    sym = std::max({sym, rel(P, P.transpose()), rel(oseen(-x), P)});
    hom = std::max({hom, rel(oseen(lam * x), P / lam),
                    rel(stokeslet_strain(lam * x, g).matrix(), stokeslet_strain(x, g).matrix() / (lam * lam)),
                    rel(oseen_laplacian(lam * x), oseen_laplacian(x) / (lam * lam * lam))});
    const StrainMatrix S(random_sym(rng));
    const Vec3 a = random_unit(rng);
    const double lhs = a.dot(stresslet_velocity(x, S));
    const double rhs = S.matrix().cwiseProduct(stokeslet_strain(x, a).matrix()).sum();
    adj = std::max(adj, std::abs(lhs - rhs) / std::max(std::abs(rhs), S.matrix().norm() / x.squaredNorm()));
    const double h = 1e-5 * x.norm();
    const Mat3 J = jacobian([&](const Vec3& y) { return Vec3(oseen(y) * g); }, x, h);
    const Mat3 Js = jacobian([&](const Vec3& y) { return stresslet_velocity(y, S); }, x, h);
    div = std::max({div, std::abs(J.trace()) / J.norm(), std::abs(Js.trace()) / Js.norm()});
  }
  v.require(sym <= 1e-15, "symmetry");
  v.require(hom <= 1e-13, "homogeneity");
  v.require(adj <= 1e-12, "adjointness");
  v.require(div <= 1e-6, "divergence");
  v.detail << " sym=" << sym << " hom=" << hom << " adj=" << adj << " div=" << div;
}

void symbolic_oracle(Verdict& v) {
  std::mt19937_64 rng(102);
  double es = 0, el = 0, ed = 0;
  for (int k = 0; k < 100; ++k) {
    const Vec3 x = random_point(rng), g = random_unit(rng);
    const double h = 1e-4 * x.norm();
    const Mat3 J = jacobian([&](const Vec3& y) { return Vec3(oseen(y) * g); }, x, h);
    const double scale = g.norm() / (8 * kPi * x.squaredNorm());
    es = std::max(es, (0.5 * (J + J.transpose()) - stokeslet_strain(x, g).matrix()).norm() / scale);

    const double hl = 2e-4 * x.norm();
    Mat3 lap = -6.0 * oseen(x);
    for (int a = 0; a < 3; ++a) lap += oseen(x + hl * Vec3::Unit(a)) + oseen(x - hl * Vec3::Unit(a));
    lap /= hl * hl;
    el = std::max(el, rel(lap, oseen_laplacian(x)));

    const StrainMatrix S(random_sym(rng));
    Vec3 d = Vec3::Zero();
    for (int a = 0; a < 3; ++a) d += (oseen(x + h * Vec3::Unit(a)) - oseen(x - h * Vec3::Unit(a))) / (2 * h) * S.matrix().col(a);
    ed = std::max(ed, (d - stresslet_velocity(x, S)).norm() / (S.matrix().norm() / (8 * kPi * x.squaredNorm())));
  }
  v.require(es <= 1e-6, "strain");
  v.require(el <= 1e-6, "laplacian");
  v.require(ed <= 1e-6, "stresslet");
  v.detail << " strain=" << es << " laplacian=" << el << " stresslet=" << ed;
}

void dipole_factorization(Verdict& v) {
  double worst = 0;
  for (int n : {3, 8, 17, 32}) {
    std::mt19937_64 rng(200 + n);
    std::uniform_real_distribution<double> u(-1, 1);
    ParticleConfiguration c;
    c.setup.particle_count = n;
    c.setup.radius = 0.02;
    c.setup.gravity = Vec3(0.3, -0.2, -1.0);
    for (int i = 0; i < n; ++i) c.positions.emplace_back(u(rng), u(rng), u(rng));
    const double phi = c.setup.volume_fraction();
    std::vector<Vec3> slow(n);
    for (int i = 0; i < n; ++i) {
      Vec3 s0 = Vec3::Zero(), s1 = Vec3::Zero();
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        s0 += oseen(c.positions[i] - c.positions[j]) * c.setup.gravity;
        for (int k = 0; k < n; ++k)
          if (k != j)
            s1 += stresslet_velocity(c.positions[i] - c.positions[j],
                                     stokeslet_strain(c.positions[j] - c.positions[k], c.setup.gravity));
      }
      slow[i] = c.setup.self_drift() + s0 / n + 5 * phi / (double(n) * n) * s1;
    }
    const auto fast = velocities_mf1(c);
    double num = 0, den = 0;
    for (int i = 0; i < n; ++i) {
      num = std::max(num, (fast[i] - slow[i]).norm());
      den = std::max(den, slow[i].norm());
    }
    worst = std::max(worst, num / den);
  }
  v.require(worst <= 1e-12, "factored vs triple sum");
  v.detail << " max_rel=" << worst;
}

void stokes_solver(Verdict& v) {
  const double s = 0.5;
  const auto grid = GridSpec::cube(Vec3::Zero(), 8.0, 64);
  const Vec3 g(0.3, -0.2, 1.0);
  auto tau = [&](const Vec3& x) { return std::exp(-x.squaredNorm() / (2 * s * s)) / std::pow(2 * kPi * s * s, 1.5); };
  const auto u = stokes_solve(sample_density(grid, tau), g);
  double e2 = 0, n2 = 0;
  for (int p = 0; p < 20; ++p) {
    const Vec3 probe(-3 + 0.3 * p, 0.1 * p - 1, 0.5 * std::sin(double(p)));
    const Vec3 cell = (probe - grid.origin) / grid.cell;
    const int i = int(cell[0]), j = int(cell[1]), k = int(cell[2]);
    const Vec3 xc = grid.center(i, j, k);
    const Vec3 ref = oracle::oseen_convolution(xc, g, tau, xc.norm() + 6 * s, 200, 48, 48);
    e2 += (u.at(grid.index(i, j, k)) - ref).squaredNorm();
    n2 += ref.squaredNorm();
  }
  const double err = std::sqrt(e2 / n2);
  v.require(err <= 1e-2, "quadrature mismatch");
  v.detail << " rel_l2=" << err;
}

void effective_fixed_point(Verdict& v) {
  const auto grid = GridSpec::cube(Vec3::Zero(), 6.0, 32);
  auto blob = [&](double w) {
    const auto f = sample_density(grid, [&](const Vec3& x) { return std::exp(-x.squaredNorm() / (2 * w * w)); });
    return f.scaled(1.0 / f.total_mass());
  };
  const auto rho = blob(0.7);
  double worst_res = 0, worst_ratio = 0;
  for (double phi : {0.01, 0.02, 0.05}) {
    const auto ps = PhysicalSetup::with_volume_fraction(Vec3(0, 0, -1), 1000, phi);
    const auto r = solve_effective_velocity(rho, ps);
    for (std::size_t k = 1; k < r.updates.size(); ++k) {
      if (r.updates[k - 1] > 1e-13) worst_ratio = std::max(worst_ratio, r.updates[k] / r.updates[k - 1]);
    }
    worst_res = std::max(worst_res, effective_weak_residual(rho, r, ps));
  }
  v.require(worst_ratio < 1.0, "updates not geometric");
  v.require(worst_res <= 1e-6, "residual");
  const auto sharp = blob(0.3);
  const double phi_bad = 0.6 / (5 * sharp.max_value());
  bool raised = false;
  try {
    solve_effective_velocity(sharp, PhysicalSetup::with_volume_fraction(Vec3(0, 0, -1), 1000, phi_bad));
  } catch (const NonContractionError&) {
    raised = true;
  }
  v.require(raised, "no error beyond the margin");
  v.detail << " max_update_ratio=" << worst_ratio << " residual=" << worst_res << " margin_error=" << raised;
}

void ot_oracle(Verdict& v) {
  std::mt19937_64 rng(110);
  std::uniform_real_distribution<double> u(-1, 1), w(0.1, 1.0);
  auto pts = [&](int n) {
    std::vector<Vec3> p(n);
    for (auto& x : p) x = Vec3(u(rng), u(rng), u(rng));
    return p;
  };
  auto measure = [&](int n) {
    std::vector<double> m(n);
    for (double& x : m) x = w(rng);
    return DiscreteMeasure::weighted(pts(n), m);
  };
  auto lp = [](const DiscreteMeasure& a, const DiscreteMeasure& b, double p) {
    std::vector<std::vector<double>> C(a.size(), std::vector<double>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) C[i][j] = std::pow((a.points[i] - b.points[j]).norm(), p);
    return std::pow(oracle::transport_lp(a.weights, b.weights, C), 1.0 / p);
  };
  double lp_err = 0;
  for (int t = 0; t < 200; ++t) {
    const auto a = measure(1 + int(rng() % 8)), b = measure(1 + int(rng() % 8));
    for (double p : {1.0, 2.0}) lp_err = std::max(lp_err, std::abs(wasserstein_p(a, b, p).value() - lp(a, b, p)));
  }
  double bn_err = 0;
  for (int t = 0; t < 60; ++t) {
    const int n = 1 + int(rng() % 7);
    const auto x = pts(n), y = pts(n);
    const double got = wasserstein_inf(DiscreteMeasure::empirical(x), DiscreteMeasure::empirical(y)).value();
    bn_err = std::max(bn_err, std::abs(got - oracle::bottleneck_by_permutation(x, y)));
  }
  int axiom_fail = 0;
  for (int t = 0; t < 100; ++t) {
    const auto a = measure(6), b = measure(7), c = measure(5);
    const double w1 = wasserstein_p(a, b, 1.0).value(), w2 = wasserstein_p(a, b, 2.0).value();
    const double wi = wasserstein_inf(a, b).value();
    if (!(w1 <= w2 + 1e-12 && w2 <= wi + 1e-12)) ++axiom_fail;
    if (std::abs(w2 - wasserstein_p(b, a, 2.0).value()) > 1e-9) ++axiom_fail;
    if (std::abs(wi - wasserstein_inf(b, a).value()) > 1e-12) ++axiom_fail;
    for (double p : {1.0, 2.0})
      if (wasserstein_p(a, c, p).value() > wasserstein_p(a, b, p).value() + wasserstein_p(b, c, p).value() + 1e-7)
        ++axiom_fail;
    if (wasserstein_inf(a, c).value() > wi + wasserstein_inf(b, c).value() + 1e-7) ++axiom_fail;
    if (wasserstein_p(a, a, 2.0).value() > 1e-12) ++axiom_fail;
  }
  v.require(lp_err <= 1e-9, "LP mismatch");
  v.require(bn_err <= 1e-12, "bottleneck mismatch");
  v.require(axiom_fail == 0, "metric axioms / p-monotonicity");
  v.detail << " lp_err=" << lp_err << " bottleneck_err=" << bn_err << " axiom_failures=" << axiom_fail;
}

// ---------------------------------------------------------------------------------------------
// lab criteria

ExperimentSetup lab_setup() {
  ExperimentSetup s;
  s.blob_shape = BlobShape::kUniform;
  s.with_effective = false;
  return s;
}

const std::vector<int> kSweepN{512, 1024, 2048, 4096};

struct Shared {
  std::string out_dir;
  std::optional<SweepResult> mf0;

  const SweepResult& mf0_sweep() {
    if (!mf0) {
      SweepPlan plan;
      plan.N_values = kSweepN;
      plan.theta = 0.5;
      plan.model = ModelKind::kMF0;
      plan.setup = lab_setup();
      plan.output_dir = out_dir.empty() ? "" : out_dir + "/mf0";
      mf0 = run_sweep(plan, [](const ComparisonRun& r) {
        std::cerr << "  MF0 N=" << r.N << " phi=" << r.phi << (r.valid ? "" : " invalid: " + r.error) << "\n";
      });
    }
    return *mf0;
  }
};

void continuum_exponents(Verdict& v, Shared& sh) {
  ExperimentSetup s;
  const auto study = run_continuum_study(s, {0.01, 0.02, 0.04, 0.08});
  v.require(std::abs(study.eff_tau.slope - 1.0) <= 0.2, "slope W2(rho_eff,tau)");
  v.require(std::abs(study.eff_rho.slope - 2.0) <= 0.3, "slope W2(rho_eff,rho)");
  v.detail << " slope_eff_tau=" << study.eff_tau.slope << " slope_eff_rho=" << study.eff_rho.slope;
  for (const auto& p : study.points) {
    v.detail << " | phi=" << p.phi << " W2(eff,tau)=" << p.w2_eff_tau << "+-" << p.err_eff_tau
             << " W2(eff,rho)=" << p.w2_eff_rho << "+-" << p.err_eff_rho;
  }
  if (!sh.out_dir.empty()) {
    std::filesystem::create_directories(sh.out_dir);
    std::ofstream os(sh.out_dir + "/continuum_fits.json");
    write_fits_json(os, {study.eff_tau, study.eff_rho});
  }
}

void mean_field_envelope(Verdict& v, Shared& sh) {
  const auto& sw = sh.mf0_sweep();
  v.require(!sw.partial, "sweep incomplete");
  // one growth constant for the whole sweep
  double c_hat = 0;
  for (const auto& r : sw.runs)
    if (r.valid) c_hat = std::max(c_hat, eta_growth_constant(r));
  int violations = 0;
  for (const auto& r : sw.runs)
    for (const auto& rec : r.records)
      if (rec.eta_tau > std::exp(c_hat * rec.t) * r.records.front().eta_tau * (1 + 1e-12)) ++violations;
  v.require(std::isfinite(c_hat) && violations == 0, "eta envelope");
  v.detail << " C_hat=" << c_hat;
  std::vector<double> cs;
  for (const auto& r : sw.runs) {
    cs.push_back(dmin_decay_constant(r));
    v.detail << " C_dmin(N=" << r.N << ")=" << cs.back();
    // the fitted C has to carry the envelope itself
    for (const auto& rec : r.records)
      v.require(rec.dmin >= r.records.front().dmin * std::exp(-cs.back() * rec.t) * (1 - 1e-12),
                "d_min envelope at N=" + std::to_string(r.N));
  }
  for (std::size_t k = 1; k < cs.size(); ++k) {
    const double a = cs[k - 1], b = cs[k];
    const bool stable = (a == 0 && b == 0) || (a > 0 && std::abs(b / a - 1.0) <= 0.5);
    v.require(stable, "C_dmin unstable between N=" + std::to_string(sw.runs[k - 1].N) + " and " +
                          std::to_string(sw.runs[k].N));
  }
}

void discretization_floor(Verdict& v, Shared& sh) {
  const auto& sw = sh.mf0_sweep();
  std::vector<double> ns, fl;
  for (const auto& r : sw.runs) {
    ns.push_back(r.N);
    fl.push_back(r.floor_w2);
  }
  const auto fit = fit_rate("floor_w2_vs_N", ns, fl);
  v.require(std::abs(fit.slope + 1.0 / 3.0) <= 0.05, "slope");
  v.detail << " slope=" << fit.slope << " r2=" << fit.r_squared;
}

// MF1 runs at three φ per N, every φ at least twice the dimensionless floor W₂(ρ_N(0),ρ₀)/a.
void einstein_ordering(Verdict& v, Shared& sh) {
  const std::vector<double> phis{0.25, 0.35, 0.45};
  ExperimentSetup s = lab_setup();
  s.with_effective = true;
  s.wp_at_end = false;  // only η enters here
  std::vector<ComparisonRun> all;
  for (int n : kSweepN) {
    std::vector<double> ratio;
    for (double phi : phis) {
      auto run = run_comparison(s, n, phi, ModelKind::kMF1);
      std::cerr << "  MF1 N=" << n << " phi=" << phi << (run.valid ? "" : " invalid: " + run.error) << "\n";
      v.require(run.valid, "invalid run N=" + std::to_string(n));
      if (!run.valid) continue;
      const double floor = run.floor_w2 / s.blob_radius;
      v.require(phi >= 2.0 * floor, "phi below twice the floor at N=" + std::to_string(n));
      const auto& last = run.records.back();
      v.require(last.eta_eff < last.eta_tau, "eta_eff >= eta_tau at N=" + std::to_string(n));
      ratio.push_back(last.eta_eff / last.eta_tau);
      v.detail << " N=" << n << ",phi=" << phi << ":ratio=" << std::setprecision(7) << ratio.back();
      all.push_back(std::move(run));
    }
    for (std::size_t k = 1; k < ratio.size(); ++k)
      v.require(ratio[k] < ratio[k - 1], "ratio not decreasing at N=" + std::to_string(n));
  }
  if (!sh.out_dir.empty()) {
    std::filesystem::create_directories(sh.out_dir + "/mf1");
    std::ofstream os(sh.out_dir + "/mf1/records.csv");
    write_records_csv(os, all);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string only;
  Shared sh;
  app.add_option("--only", only, "comma-separated criterion numbers");
  app.add_option("--out", sh.out_dir, "directory for the CSV/JSON produced by the lab criteria");
  CLI11_PARSE(app, argc, argv);

  std::set<int> pick;
  {
    std::stringstream ss(only);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) pick.insert(std::stoi(tok));
  }

  struct Criterion {
    int id;
    const char* name;
    std::function<void(Verdict&)> run;
  };
  const std::vector<Criterion> all = {
      {1, "kernel exactness", kernel_exactness},
      {2, "symbolic oracle", symbolic_oracle},
      {3, "dipole factorization", dipole_factorization},
      {4, "Stokes solver", stokes_solver},
      {5, "effective fixed point", effective_fixed_point},
      {6, "continuum exponents", [&](Verdict& v) { continuum_exponents(v, sh); }},
      {7, "mean-field envelope", [&](Verdict& v) { mean_field_envelope(v, sh); }},
      {8, "Einstein ordering", [&](Verdict& v) { einstein_ordering(v, sh); }},
      {9, "discretization floor", [&](Verdict& v) { discretization_floor(v, sh); }},
      {10, "OT oracle", ot_oracle},
  };

  int failed = 0;
  for (const auto& c : all) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << " (" << std::fixed
              << std::setprecision(1) << secs << "s)" << std::defaultfloat << std::setprecision(6) << v.detail.str()
              << std::endl;
    if (!v.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
