#include <sedlab/kernels.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sedlab {

namespace {

constexpr double kPi = std::numbers::pi;

double checked_norm(const Vec3& x, const char* what) {
  const double r = x.norm();
  if (!(r >= kMinSeparation)) {
    throw DomainError(std::string(what) + ": evaluation at |x| < 1e-12");
  }
  return r;
}

}  // namespace

void PhysicalSetup::validate() const {
  if (particle_count < 1) throw std::invalid_argument("PhysicalSetup: particle_count must be >= 1");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("PhysicalSetup: radius must be > 0");
  if (!gravity.allFinite()) throw std::invalid_argument("PhysicalSetup: gravity must be finite");
}

PhysicalSetup PhysicalSetup::with_volume_fraction(const Vec3& gravity, int particle_count, double phi) {
  if (particle_count < 1) throw std::invalid_argument("with_volume_fraction: particle_count must be >= 1");
  if (!(phi > 0.0)) throw std::invalid_argument("with_volume_fraction: phi must be > 0");
  PhysicalSetup s;
  s.gravity = gravity;
  s.particle_count = particle_count;
  s.radius = std::cbrt(3.0 * phi / (4.0 * kPi * particle_count));
  return s;
}

StrainMatrix::StrainMatrix(const Mat3& m, double tol) : m_(m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw std::invalid_argument("StrainMatrix: matrix is not symmetric");
  }
  m_ = 0.5 * (m + m.transpose());
}

Mat3 oseen(const Vec3& x) {
  const double r = checked_norm(x, "oseen");
  return (Mat3::Identity() / r + x * x.transpose() / (r * r * r)) / (8.0 * kPi);
}

Mat3 oseen_laplacian(const Vec3& x) {
  const double r = checked_norm(x, "oseen_laplacian");
  const Vec3 n = x / r;
  return (Mat3::Identity() - 3.0 * n * n.transpose()) / (4.0 * kPi * r * r * r);
}

Vec3 single_particle_field(const Vec3& x, const PhysicalSetup& setup) {
  const double r = x.norm();
  const double n = setup.particle_count;
  const double big_r = setup.radius;
  if (r <= big_r) return setup.gravity / (6.0 * kPi * n * big_r);
  return (oseen(x) * setup.gravity + (big_r * big_r / 6.0) * (oseen_laplacian(x) * setup.gravity)) / n;
}

StrainMatrix stokeslet_strain(const Vec3& x, const Vec3& g) {
  const double r = checked_norm(x, "stokeslet_strain");
  const Vec3 n = x / r;
  const Mat3 m = (x.dot(g) / (8.0 * kPi * r * r * r)) * (Mat3::Identity() - 3.0 * n * n.transpose());
  return StrainMatrix(m);
}

Vec3 stresslet_velocity(const Vec3& x, const StrainMatrix& s) {
  const double r = checked_norm(x, "stresslet_velocity");
  const Vec3 n = x / r;
  const double nsn = n.dot(s.matrix() * n);
  return x * ((s.trace() - 3.0 * nsn) / (8.0 * kPi * r * r * r));
}

}  // namespace sedlab
