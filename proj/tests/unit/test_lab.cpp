#include <sedlab/lab.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace sedlab;

namespace {

ExperimentSetup small_setup() {
  ExperimentSetup s;
  s.grid = GridSpec::cube(Vec3(0.0, 0.0, -0.6), 6.4, 16);
  s.t_end = 0.1;
  s.dt = 0.05;
  s.output_stride = 1;
  s.atoms_per_particle = 2;
  s.with_effective = false;
  return s;
}

}  // namespace

TEST(RateFit, RecoversExactPowerLaw) {
  std::vector<double> x{1, 2, 4, 8, 16}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -0.75));
  const auto f = fit_rate("p", x, y);
  EXPECT_NEAR(f.slope, -0.75, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(RateFit, RejectsBadData) {
  EXPECT_THROW(fit_rate("a", {1.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(fit_rate("b", {1.0, 2.0}, {1.0, -1.0}), std::invalid_argument);
  EXPECT_THROW(fit_rate("c", {1.0, 2.0}, {1.0}), std::invalid_argument);
}

TEST(LabConfig, DefaultTextRoundTrips) {
  std::istringstream is(default_config_text());
  const SweepPlan p = parse_sweep_plan(is);
  const SweepPlan d;
  EXPECT_EQ(p.N_values, d.N_values);
  EXPECT_EQ(p.theta, d.theta);
  EXPECT_EQ(p.setup.gravity, d.setup.gravity);
  EXPECT_EQ(p.setup.grid, d.setup.grid);
  EXPECT_EQ(p.setup.blob_shape, BlobShape::kPolynomial);
  EXPECT_EQ(p.output_dir, d.output_dir);
}

TEST(LabConfig, ParsesValuesAndRejectsUnknownKeys) {
  std::istringstream ok("[setup]\nblob_shape = uniform\nt_end = 0.25\n[sweep]\nN_values = 64 128\nmodel = MF1\nphi = 0.1\n");
  const auto p = parse_sweep_plan(ok);
  EXPECT_EQ(p.setup.blob_shape, BlobShape::kUniform);
  EXPECT_DOUBLE_EQ(p.setup.t_end, 0.25);
  EXPECT_EQ(p.N_values, (std::vector<int>{64, 128}));
  EXPECT_EQ(p.model, ModelKind::kMF1);
  EXPECT_DOUBLE_EQ(p.phi_for(64), 0.1);

  std::istringstream typo("[setup]\nt_ned = 1\n");
  EXPECT_THROW(parse_sweep_plan(typo), std::invalid_argument);
  std::istringstream section("[nope]\nx = 1\n");
  EXPECT_THROW(parse_sweep_plan(section), std::invalid_argument);
  std::istringstream order("[sweep]\nN_values = 128 64\n");
  EXPECT_THROW(parse_sweep_plan(order), std::invalid_argument);
  std::istringstream theta("[sweep]\ntheta = 1.5\n");
  EXPECT_THROW(parse_sweep_plan(theta), std::invalid_argument);
}

TEST(KernelCondition, OseenIsDegreeMinusOne) {
  const Vec3 g(0.0, 0.0, -1.0);
  auto k = [&](const Vec3& x) -> Vec3 { return oseen(x) * g; };
  const auto one = check_kernel_condition(k, 1.0);
  EXPECT_TRUE(one.pass);
  EXPECT_TRUE(one.divergence_ok);
  // |Φg| ≤ |g|/(4π|x|) and |x||∇Φg| ≤ 3|g|/(8π|x|)
  EXPECT_LE(one.constant, 5.0 / (8.0 * std::numbers::pi) + 1e-6);
  EXPECT_FALSE(check_kernel_condition(k, 0.5).pass);
  EXPECT_FALSE(check_kernel_condition(k, 2.0).uniform);
}

TEST(KernelCondition, StressletIsDegreeMinusTwo) {
  const StrainMatrix e = stokeslet_strain(Vec3(1.0, 0.3, -0.2), Vec3(0.0, 0.0, -1.0));
  auto k = [&](const Vec3& x) { return stresslet_velocity(x, e); };
  EXPECT_TRUE(check_kernel_condition(k, 2.0).pass);
  EXPECT_FALSE(check_kernel_condition(k, 1.0).pass);
}

TEST(KernelCondition, FlagsDivergence) {
  auto k = [](const Vec3& x) -> Vec3 { return x / std::pow(x.norm(), 2); };
  const auto r = check_kernel_condition(k, 1.0, 500);
  EXPECT_FALSE(r.divergence_ok);
  EXPECT_FALSE(r.pass);
}

TEST(Comparison, SmokeRunHasMonotoneFiniteRecords) {
  const auto s = small_setup();
  const auto run = run_comparison(s, 64, 0.05, ModelKind::kMF0);
  ASSERT_TRUE(run.valid) << run.error;
  ASSERT_EQ(run.records.size(), 3u);
  for (std::size_t k = 0; k < run.records.size(); ++k) {
    const auto& r = run.records[k];
    if (k) EXPECT_GT(r.t, run.records[k - 1].t);
    EXPECT_TRUE(std::isfinite(r.eta_tau));
    EXPECT_GT(r.eta_tau, 0.0);
    EXPECT_TRUE(std::isfinite(r.dmin));
  }
  EXPECT_GT(run.floor_w2, 0.0);
  EXPECT_TRUE(std::isfinite(run.records.front().w2_tau));
  EXPECT_TRUE(std::isnan(run.records[1].w2_tau));
  EXPECT_TRUE(std::isnan(run.records.front().eta_eff));
}

TEST(Comparison, SameSeedGivesIdenticalCsv) {
  const auto s = small_setup();
  std::ostringstream a, b;
  write_records_csv(a, {run_comparison(s, 32, 0.05, ModelKind::kMF1)});
  write_records_csv(b, {run_comparison(s, 32, 0.05, ModelKind::kMF1)});
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')),
            "N,phi,t,eta_tau,eta_eff,w1_tau,w2_tau,w1_eff,w2_eff,dmin,alpha2,alpha3,floor_w2,vel_err_q2");
}

TEST(Comparison, SweepWritesFits) {
  SweepPlan plan;
  plan.setup = small_setup();
  plan.setup.t_end = 0.05;
  plan.N_values = {32, 64};
  plan.phi = 0.05;
  plan.output_dir.clear();
  const auto res = run_sweep(plan);
  EXPECT_FALSE(res.partial);
  ASSERT_EQ(res.runs.size(), 2u);
  ASSERT_FALSE(res.fits.empty());
  EXPECT_EQ(res.fits.front().name, "floor_w2_vs_N");
  std::ostringstream js;
  write_fits_json(js, res.fits);
  EXPECT_NE(js.str().find("\"r_squared\""), std::string::npos);
}
