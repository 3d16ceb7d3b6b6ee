#include <sedlab/kernels.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace sedlab;

namespace {

constexpr double kPi = std::numbers::pi;

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

// central-difference Jacobian of x -> f(x)
template <class F>
Mat3 jacobian(F f, const Vec3& x, double h) {
  Mat3 J;
  for (int b = 0; b < 3; ++b) {
    Vec3 e = Vec3::Zero();
    e[b] = h;
    J.col(b) = (f(x + e) - f(x - e)) / (2 * h);
  }
  return J;
}

double rel(const Mat3& a, const Mat3& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST(Kernels, OseenClosedForm) {
  const Mat3 at_e1 = oseen(Vec3(1, 0, 0));
  EXPECT_NEAR(at_e1(0, 0), 1 / (4 * kPi), 1e-15);
  EXPECT_NEAR(at_e1(1, 1), 1 / (8 * kPi), 1e-15);
  EXPECT_NEAR(at_e1(2, 2), 1 / (8 * kPi), 1e-15);
  EXPECT_NEAR(at_e1(0, 1), 0.0, 1e-15);
  EXPECT_LT(rel(oseen(Vec3(2, 0, 0)), 0.5 * at_e1), 1e-15);
  EXPECT_EQ(oseen(Vec3(0, 1, 0)), oseen(Vec3(0, -1, 0)));
  EXPECT_THROW(oseen(Vec3::Zero()), DomainError);
  EXPECT_THROW(oseen_laplacian(Vec3(1e-13, 0, 0)), DomainError);
}

TEST(Kernels, LaplacianClosedForm) {
  const Mat3 L = oseen_laplacian(Vec3(1, 0, 0));
  EXPECT_NEAR(L(0, 0), -2 / (4 * kPi), 1e-15);
  EXPECT_NEAR(L(1, 1), 1 / (4 * kPi), 1e-15);
  EXPECT_NEAR(L(2, 2), 1 / (4 * kPi), 1e-15);
  EXPECT_LT(rel(oseen_laplacian(Vec3(2, 0, 0)), L / 8.0), 1e-15);
}

TEST(Kernels, StrainAndStressletExamples) {
  const Mat3 s = stokeslet_strain(Vec3(1, 0, 0), Vec3(1, 0, 0)).matrix();
  EXPECT_LT(rel(s, Vec3(-2, 1, 1).asDiagonal() * (1 / (8 * kPi))), 1e-15);
  EXPECT_NEAR(stokeslet_strain(Vec3(1, 0, 0), Vec3(0, 1, 0)).matrix().norm(), 0.0, 1e-18);
  EXPECT_LT(rel(stokeslet_strain(Vec3(2, 0, 0), Vec3(1, 0, 0)).matrix(), s / 4.0), 1e-15);

  const StrainMatrix S(Mat3(Vec3(-2, 1, 1).asDiagonal()) / (8 * kPi));
  const Vec3 v1 = stresslet_velocity(Vec3(1, 0, 0), S);
  EXPECT_NEAR(v1[0], 3 / (32 * kPi * kPi), 1e-15);
  EXPECT_NEAR(v1[0], 0.0094988, 1e-7);
  EXPECT_NEAR(v1.tail<2>().norm(), 0.0, 1e-18);
  const Vec3 v2 = stresslet_velocity(Vec3(0, 1, 0), S);
  EXPECT_NEAR(v2[1], -3 / (64 * kPi * kPi), 1e-15);
  EXPECT_EQ(stresslet_velocity(Vec3(0.3, 1, 2), StrainMatrix()), Vec3::Zero());
  Mat3 asym = Mat3::Zero();
  asym(0, 1) = 1.0;
  EXPECT_THROW(StrainMatrix{asym}, std::invalid_argument);
}

TEST(Kernels, SurfaceConsistencyPinsLaplacianSign) {
  std::mt19937_64 rng(7);
  PhysicalSetup setup;
  setup.particle_count = 100;
  setup.radius = 0.03;
  for (int k = 0; k < 1000; ++k) {
    setup.gravity = random_unit(rng) * 3.0;
    const Vec3 target = setup.gravity / (6 * kPi * setup.particle_count * setup.radius);
    const Vec3 got = single_particle_field(setup.radius * random_unit(rng), setup);
    ASSERT_LE((got - target).norm(), 1e-12 * target.norm());
  }
  setup.gravity = Vec3(1, 0, 0);
  EXPECT_EQ(single_particle_field(Vec3(0, 0.5 * setup.radius, 0), setup), setup.self_drift());
  // far field ~ 1/(N|x|)
  const double a = single_particle_field(Vec3(0, 0, 100), setup).norm();
  const double b = single_particle_field(Vec3(0, 0, 200), setup).norm();
  EXPECT_NEAR(a / b, 2.0, 1e-3);
}

TEST(Kernels, SymmetryHomogeneityAdjointness) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 200; ++k) {
    const Vec3 x = random_point(rng), g = random_unit(rng);
    const double lam = 0.37 + 3.0 * k / 200.0;
    const Mat3 P = oseen(x);
    EXPECT_LT(rel(P, P.transpose()), 1e-15);
    EXPECT_LT(rel(oseen(-x), P), 1e-15);
    EXPECT_LT(rel(oseen(lam * x), P / lam), 1e-13);
    EXPECT_LT(rel(stokeslet_strain(lam * x, g).matrix(), stokeslet_strain(x, g).matrix() / (lam * lam)), 1e-13);
    EXPECT_LT(rel(oseen_laplacian(lam * x), oseen_laplacian(x) / (lam * lam * lam)), 1e-13);
    EXPECT_NEAR(oseen_laplacian(x).trace(), 0.0, 1e-14 * oseen_laplacian(x).norm());

    const StrainMatrix S(random_sym(rng));
    const Vec3 a = random_unit(rng);
    const double lhs = a.dot(stresslet_velocity(x, S));
    const double rhs = (S.matrix().cwiseProduct(stokeslet_strain(x, a).matrix())).sum();
    EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::max(std::abs(rhs), S.matrix().norm() / x.squaredNorm()));
  }
}

TEST(Kernels, DivergenceFree) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 200; ++k) {
    const Vec3 x = random_point(rng), g = random_unit(rng);
    const double h = 1e-5 * x.norm();
    const Mat3 J = jacobian([&](const Vec3& y) { return Vec3(oseen(y) * g); }, x, h);
    EXPECT_LE(std::abs(J.trace()), 1e-6 * J.norm());
    const StrainMatrix S(random_sym(rng));
    const Mat3 Js = jacobian([&](const Vec3& y) { return stresslet_velocity(y, S); }, x, h);
    EXPECT_LE(std::abs(Js.trace()), 1e-6 * Js.norm());
  }
}

// Closed forms against numerical differentiation of Φ.
TEST(Kernels, FiniteDifferenceOracle) {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 100; ++k) {
    const Vec3 x = random_point(rng), g = random_unit(rng);
    const double h = 1e-4 * x.norm();
    const Mat3 J = jacobian([&](const Vec3& y) { return Vec3(oseen(y) * g); }, x, h);
    // errors are measured against the natural size of each kernel, since entries can cancel
    const double strain_scale = g.norm() / (8 * kPi * x.squaredNorm());
    EXPECT_LT((0.5 * (J + J.transpose()) - stokeslet_strain(x, g).matrix()).norm(), 1e-6 * strain_scale);

    // ΔΦ by the 7-point stencil, per entry
    const double hl = 2e-4 * x.norm();
    Mat3 lap = -6.0 * oseen(x);
    for (int a = 0; a < 3; ++a) {
      Vec3 e = Vec3::Zero();
      e[a] = hl;
      lap += oseen(x + e) + oseen(x - e);
    }
    lap /= hl * hl;
    EXPECT_LT(rel(lap, oseen_laplacian(x)), 1e-6);

    // ∇Φ:S as the directional derivatives of Φ contracted with S
    const StrainMatrix S(random_sym(rng));
    Vec3 v = Vec3::Zero();
    for (int a = 0; a < 3; ++a) {
      Vec3 e = Vec3::Zero();
      e[a] = h;
      const Mat3 dP = (oseen(x + e) - oseen(x - e)) / (2 * h);  // ∂ₐΦ
      v += dP * S.matrix().col(a);
    }
    EXPECT_LE((v - stresslet_velocity(x, S)).norm(), 1e-6 * S.matrix().norm() / (8 * kPi * x.squaredNorm()));
  }
}

TEST(Kernels, GrowthAndLipschitzBounds) {
  std::mt19937_64 rng(5);
  // regression constant for |x||∇(Φg)| |x| / |g|; the analytic supremum is 3√2/(8π)·... ≈ 0.146
  constexpr double kGradientConstant = 0.16;
  for (int k = 0; k < 2000; ++k) {
    const Vec3 x = random_point(rng), g = random_unit(rng);
    EXPECT_LE((oseen(x) * g).norm(), g.norm() / (4 * kPi * x.norm()) * (1 + 1e-14));
    const Mat3 J = jacobian([&](const Vec3& y) { return Vec3(oseen(y) * g); }, x, 1e-5 * x.norm());
    EXPECT_LE(x.norm() * J.norm(), kGradientConstant * g.norm() / x.norm());
  }
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 10000; ++k) {
    const Vec3 x(u(rng), u(rng), u(rng)), y(u(rng), u(rng), u(rng));
    if (x.norm() < 1e-3 || y.norm() < 1e-3) continue;
    const double lhs = (oseen(x) - oseen(y)).norm();
    EXPECT_LE(lhs, 10.0 * (x - y).norm() * (1 / x.squaredNorm() + 1 / y.squaredNorm()));
  }
}

TEST(Kernels, SetupDerivedQuantities) {
  PhysicalSetup s;
  s.particle_count = 1000;
  s.radius = 0.01;
  EXPECT_DOUBLE_EQ(s.volume_fraction(), 4 * kPi / 3 * 1000 * 1e-6);
  EXPECT_DOUBLE_EQ(s.interaction_strength(), 10.0);
  const auto t = PhysicalSetup::with_volume_fraction(Vec3(0, 0, -1), 512, 0.05);
  EXPECT_NEAR(t.volume_fraction(), 0.05, 1e-15);
  s.radius = -1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}
