#pragma once

// Closed-form Stokes kernels: the Oseen tensor, its Laplacian, the translating-sphere
// field and the force-dipole (stresslet) pair that appears in the first reflection.
//
// All kernels are homogeneous functions of the separation x and are singular at x = 0.
// Evaluation closer than kMinSeparation raises DomainError; callers exclude self-pairs.

#include <sedlab/types.hpp>

#include <cmath>
#include <numbers>

namespace sedlab {

inline constexpr double kMinSeparation = 1e-12;

struct PhysicalSetup {
  Vec3 gravity{0.0, 0.0, -1.0};
  int particle_count = 1;
  double radius = 0.01;

  /// φ_N = (4π/3) N R³
  double volume_fraction() const {
    return 4.0 * std::numbers::pi / 3.0 * particle_count * radius * radius * radius;
  }
  /// γ_N = N R
  double interaction_strength() const { return particle_count * radius; }
  /// Uniform drift g / (6π γ_N) shared by every particle (and by the continuum transport).
  Vec3 self_drift() const { return gravity / (6.0 * std::numbers::pi * interaction_strength()); }

  void validate() const;

  /// Radius chosen so that (4π/3) N R³ = phi.
  static PhysicalSetup with_volume_fraction(const Vec3& gravity, int particle_count, double phi);
};

/// Symmetric 3×3 rate-of-strain tensor.
class StrainMatrix {
 public:
  StrainMatrix() : m_(Mat3::Zero()) {}
  /// Throws std::invalid_argument if `m` is not symmetric to `tol` (relative to its size).
  explicit StrainMatrix(const Mat3& m, double tol = 1e-10);

  const Mat3& matrix() const { return m_; }
  double trace() const { return m_.trace(); }
  StrainMatrix& operator+=(const StrainMatrix& o) {
    m_ += o.m_;
    return *this;
  }

 private:
  Mat3 m_;
};

/// Φ(x) = (1/8π)(I/|x| + x⊗x/|x|³).
Mat3 oseen(const Vec3& x);

/// ΔΦ(x) = (1/4π)(I − 3 x̂⊗x̂)/|x|³.
Mat3 oseen_laplacian(const Vec3& x);

/// Velocity field of one sedimenting sphere centred at the origin. Rigid translation
/// g/(6πNR) inside the ball, (1/N)(Φ + (R²/6)ΔΦ)g outside; continuous on |x| = R.
Vec3 single_particle_field(const Vec3& x, const PhysicalSetup& setup);

/// Symmetric gradient of x ↦ Φ(x)g: ((x·g)/(8π|x|³))(I − 3x̂⊗x̂).
StrainMatrix stokeslet_strain(const Vec3& x, const Vec3& g);

/// Velocity induced at x by a force dipole of strength S at the origin, ∇Φ(x):S.
/// Adjoint of stokeslet_strain: a·stresslet_velocity(x,S) = S : stokeslet_strain(x,a).
Vec3 stresslet_velocity(const Vec3& x, const StrainMatrix& s);

namespace detail {

// Unchecked hot-loop variants. Caller guarantees |x| >= kMinSeparation.

inline Vec3 oseen_apply(const Vec3& x, const Vec3& g) {
  const double r2 = x.squaredNorm();
  const double inv_r = 1.0 / std::sqrt(r2);
  const double c = inv_r / (8.0 * std::numbers::pi);
  return c * (g + x * (x.dot(g) / r2));
}

/// Upper triangle of stokeslet_strain as (xx, yy, zz, xy, xz, yz).
inline void stokeslet_strain6(const Vec3& x, const Vec3& g, double out[6]) {
  const double r2 = x.squaredNorm();
  const double inv_r = 1.0 / std::sqrt(r2);
  const double inv_r3 = inv_r * inv_r * inv_r;
  const double a = x.dot(g) * inv_r3 / (8.0 * std::numbers::pi);
  const double b = 3.0 / r2;
  out[0] = a * (1.0 - b * x[0] * x[0]);
  out[1] = a * (1.0 - b * x[1] * x[1]);
  out[2] = a * (1.0 - b * x[2] * x[2]);
  out[3] = -a * b * x[0] * x[1];
  out[4] = -a * b * x[0] * x[2];
  out[5] = -a * b * x[1] * x[2];
}

/// stresslet_velocity with S given as (xx, yy, zz, xy, xz, yz).
inline Vec3 stresslet_apply6(const Vec3& x, const double s[6]) {
  const double r2 = x.squaredNorm();
  const double inv_r = 1.0 / std::sqrt(r2);
  const double inv_r3 = inv_r * inv_r * inv_r;
  const double tr = s[0] + s[1] + s[2];
  const double xsx = s[0] * x[0] * x[0] + s[1] * x[1] * x[1] + s[2] * x[2] * x[2] +
                     2.0 * (s[3] * x[0] * x[1] + s[4] * x[0] * x[2] + s[5] * x[1] * x[2]);
  const double c = inv_r3 / (8.0 * std::numbers::pi) * (tr - 3.0 * xsx / r2);
  return c * x;
}

}  // namespace detail

}  // namespace sedlab
