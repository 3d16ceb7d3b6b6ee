#include <sedlab/configuration.hpp>
#include <sedlab/densities.hpp>
#include <sedlab/kernels.hpp>
#include <sedlab/microdynamics.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace sedlab;

namespace {

constexpr double kPi = std::numbers::pi;

ParticleConfiguration random_cloud(int n, std::uint64_t seed, double radius = 1e-3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  ParticleConfiguration c;
  c.setup.particle_count = n;
  c.setup.radius = radius;
  c.setup.gravity = Vec3(0.3, -0.2, -1.0);
  for (int i = 0; i < n; ++i) c.positions.push_back(Vec3(u(rng), u(rng), u(rng)));
  return c;
}

// Straight from the model definitions, through the public kernels.
std::vector<Vec3> naive_mf0(const ParticleConfiguration& c) {
  const int n = int(c.size());
  std::vector<Vec3> v(n);
  for (int i = 0; i < n; ++i) {
    Vec3 s = Vec3::Zero();
    for (int j = 0; j < n; ++j)
      if (j != i) s += oseen(c.positions[i] - c.positions[j]) * c.setup.gravity;
    v[i] = c.setup.gravity / (6 * kPi * n * c.setup.radius) + s / n;
  }
  return v;
}

std::vector<Vec3> naive_mf1_triple(const ParticleConfiguration& c) {
  const int n = int(c.size());
  const double phi = c.setup.volume_fraction();
  auto v = naive_mf0(c);
  for (int i = 0; i < n; ++i) {
    Vec3 s = Vec3::Zero();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int k = 0; k < n; ++k) {
        if (k == j) continue;
        s += stresslet_velocity(c.positions[i] - c.positions[j],
                                stokeslet_strain(c.positions[j] - c.positions[k], c.setup.gravity));
      }
    }
    v[i] += 5 * phi / (double(n) * n) * s;
  }
  return v;
}

double max_rel(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, (a[i] - b[i]).norm());
    den = std::max(den, b[i].norm());
  }
  return num / den;
}

}  // namespace

TEST(Velocities, SingleParticleSettles) {
  ParticleConfiguration c;
  c.positions = {Vec3(1, 2, 3)};
  c.setup.radius = 0.1;
  c.setup.gravity = Vec3(0, 0, -2);
  const auto v = velocities_mf0(c);
  EXPECT_LT((v[0] - c.setup.gravity / (6 * kPi * 0.1)).norm(), 1e-15);
  EXPECT_EQ(velocities_mf1(c)[0], v[0]);
}

TEST(Velocities, PairsMoveTogether) {
  auto c = random_cloud(2, 4, 0.05);
  const auto v0 = velocities_mf0(c), v1 = velocities_mf1(c);
  EXPECT_LT((v0[0] - v0[1]).norm(), 1e-15 * v0[0].norm());
  EXPECT_LT((v1[0] - v1[1]).norm(), 1e-14 * v1[0].norm());
}

TEST(Velocities, CollinearTripleMatchesDoubleLoop) {
  ParticleConfiguration c;
  c.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  c.setup.particle_count = 3;
  c.setup.radius = 0.1;
  c.setup.gravity = Vec3(0, 0, 1);
  EXPECT_LT(max_rel(velocities_mf0(c), naive_mf0(c)), 1e-14);
}

TEST(Velocities, FactoredDipoleMatchesTripleSum) {
  for (int n : {3, 8, 17, 32}) {
    const auto c = random_cloud(n, 10 + n, 0.02);
    const auto fast = velocities_mf1(c);
    const auto slow = naive_mf1_triple(c);
    std::vector<Vec3> df(n), ds(n);
    const auto base = naive_mf0(c);
    for (int i = 0; i < n; ++i) {
      df[i] = fast[i] - base[i];
      ds[i] = slow[i] - base[i];
    }
    EXPECT_LT(max_rel(fast, slow), 1e-12) << n;
    EXPECT_LT(max_rel(df, ds), 1e-11) << n;  // the correction itself, not hidden by the Stokeslet part
  }
}

TEST(Velocities, DipoleCorrectionLinearInPhi) {
  auto a = random_cloud(40, 3, 0.01), b = a;
  b.setup.radius = 0.01 * std::cbrt(2.0);  // doubles φ
  const auto a0 = velocities_mf0(a), a1 = velocities_mf1(a), b0 = velocities_mf0(b), b1 = velocities_mf1(b);
  for (int i = 0; i < 40; ++i) {
    const Vec3 ga = a1[i] - a0[i], gb = b1[i] - b0[i];
    EXPECT_LT((gb - 2.0 * ga).norm(), 1e-10 * ga.norm() + 1e-15 * b0[i].norm());  // the drift term dominates both
  }
}

TEST(Velocities, NestingBound) {
  // |Vᴹᶠ¹ − Vᴹᶠ⁰| ≤ 5φ α₂ · (3/8π) · max|Sⱼ|,  |Sⱼ| ≤ (√6/8π)|g| α₂
  GeneratorOptions o;
  o.phi = 0.05;
  const auto c = generate_well_prepared(PolynomialBlob(Vec3::Zero(), 1.0), 300, o);
  const auto s = compute_stats(c);
  const auto v0 = velocities_mf0(c), v1 = velocities_mf1(c);
  double gap = 0;
  for (std::size_t i = 0; i < c.size(); ++i) gap = std::max(gap, (v1[i] - v0[i]).norm());
  const double C = 3.0 / (8 * kPi) * std::sqrt(6.0) / (8 * kPi) * c.setup.gravity.norm();
  EXPECT_LE(gap, 5 * o.phi.value() * s.alpha[1] * C * s.alpha[1]);
  EXPECT_GT(gap, 0.0);
}

TEST(Velocities, TranslationAndPermutation) {
  auto c = random_cloud(25, 8, 0.01);
  const auto v = velocities_mf1(c);
  auto shifted = c;
  for (auto& p : shifted.positions) p += Vec3(10.0, -3.0, 0.5);
  EXPECT_LT(max_rel(velocities_mf1(shifted), v), 1e-12);
  auto perm = c;
  std::reverse(perm.positions.begin(), perm.positions.end());
  auto vp = velocities_mf1(perm);
  std::reverse(vp.begin(), vp.end());
  EXPECT_LT(max_rel(vp, v), 1e-13);
}

TEST(Velocities, ContinuumCorrectionSampling) {
  auto c = random_cloud(10, 2, 0.01);
  const auto grid = GridSpec::cube(Vec3::Zero(), 4.0, 8);
  VelocityField zero(grid);
  EXPECT_EQ(velocities_mf1c(c, zero), velocities_mf0(c));
  VelocityField unit(grid);
  std::fill(unit.component(2).begin(), unit.component(2).end(), 1.0);
  const auto v = velocities_mf1c(c, unit), v0 = velocities_mf0(c);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR((v[i] - v0[i])[2], 1.0, 1e-14);
  c.positions[0] = Vec3(5, 0, 0);
  EXPECT_THROW(velocities_mf1c(c, zero), std::domain_error);
}

TEST(Integrate, FreeFallAndRigidPair) {
  ParticleConfiguration one;
  one.positions = {Vec3(0, 0, 0)};
  one.setup.radius = 0.2;
  one.setup.gravity = Vec3(0, 0, -1);
  const auto t1 = integrate(one, VelocityModel::mf0(), 1.0, 0.3);
  EXPECT_NEAR(t1.times.back(), 1.0, 1e-15);
  EXPECT_LT((t1.snapshots.back().positions[0] - Vec3(0, 0, -1 / (6 * kPi * 0.2))).norm(), 1e-14);

  ParticleConfiguration two;
  two.positions = {Vec3(0, 0, 0), Vec3(0, 0, 1)};
  two.setup.particle_count = 2;
  two.setup.radius = 0.05;
  two.setup.gravity = Vec3(0, 0, -1);
  const auto t2 = integrate(two, VelocityModel::mf1(), 2.0, 0.05);
  for (const auto& snap : t2.snapshots) {
    EXPECT_NEAR((snap.positions[1] - snap.positions[0]).norm(), 1.0, 1e-13);
  }
  for (std::size_t s = 1; s < t2.times.size(); ++s) EXPECT_GT(t2.times[s], t2.times[s - 1]);
}

TEST(Integrate, FourthOrderInTime) {
  GeneratorOptions o;
  o.phi = 0.02;
  o.gravity = Vec3(0, 0, -10);
  const auto c = generate_well_prepared(PolynomialBlob(Vec3::Zero(), 1.0), 64, o);
  IntegrateOptions io;
  io.output_stride = 1000000;
  io.record_model_gap = false;
  auto final_pos = [&](double dt) { return integrate(c, VelocityModel::mf0(), 1.0, dt, io).snapshots.back().positions; };
  const auto a = final_pos(0.2), b = final_pos(0.1), d = final_pos(0.05);
  double e1 = 0, e2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    e1 = std::max(e1, (a[i] - b[i]).norm());
    e2 = std::max(e2, (b[i] - d[i]).norm());
  }
  EXPECT_GE(std::log2(e1 / e2), 3.5) << e1 << " " << e2;
}

TEST(Integrate, DeterministicTraceAndContact) {
  GeneratorOptions o;
  o.phi = 0.02;
  const auto c = generate_well_prepared(PolynomialBlob(Vec3::Zero(), 1.0), 50, o);
  std::ostringstream a, b;
  write_trace_csv(a, integrate(c, VelocityModel::mf1(), 0.2, 0.05));
  write_trace_csv(b, integrate(c, VelocityModel::mf1(), 0.2, 0.05));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, 38), "t,i,x,y,z,dmin,alpha2,alpha3,model_gap");

  // a converging background flow u = (−x, 0, 0) drives two particles into contact at t = ln 5
  ParticleConfiguration pair;
  pair.positions = {Vec3(-0.5, 0, 0), Vec3(0.5, 0, 0)};
  pair.setup.particle_count = 2;
  pair.setup.radius = 0.1;
  pair.setup.gravity = Vec3(0, 0, 1e-9);
  const auto grid = GridSpec::cube(Vec3::Zero(), 2.0, 16);
  VelocityField squeeze(grid);
  for (int k = 0; k < 16; ++k)
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) squeeze.component(0)[grid.index(i, j, k)] = -grid.center(i, j, k)[0];
  const auto model = VelocityModel::mf1c([&](double, const ParticleConfiguration&) { return squeeze; });
  try {
    integrate(pair, model, 5.0, 0.01);
    FAIL() << "expected contact";
  } catch (const ContactError& e) {
    EXPECT_NEAR(e.time(), std::log(5.0), 0.02);
  }
}
