#pragma once

// Analytic and gridded probability densities that the configuration generator can sample.
//
// Each density exposes a "reference" description: a uniform lattice is laid out in a simple
// reference domain (unit ball or box) and pushed forward by a monotone transport map onto the
// target density. Uniform densities use the identity map.

#include <sedlab/grid.hpp>
#include <sedlab/types.hpp>

#include <array>
#include <memory>

namespace sedlab {

enum class ReferenceShape { kBall, kBox };

class ParticleDensity {
 public:
  virtual ~ParticleDensity() = default;

  virtual double value(const Vec3& x) const = 0;
  /// Point returned for N = 1.
  virtual Vec3 support_center() const = 0;
  /// Axis-aligned bounding box of the support (lo, hi).
  virtual std::array<Vec3, 2> support_box() const = 0;

  virtual ReferenceShape reference_shape() const = 0;
  /// Reference-domain box side lengths (box references only).
  virtual Vec3 reference_extent() const { return Vec3::Ones(); }
  /// Transport map from the reference domain (unit ball centred at 0, or [0,e]³) to the density.
  virtual Vec3 map_from_reference(const Vec3& u) const = 0;
};

/// ρ(x) = c_ψ a⁻³ (1 − |x−c|²/a²)³₊ with c_ψ = 315/(64π); C² with compact support.
class PolynomialBlob final : public ParticleDensity {
 public:
  PolynomialBlob(Vec3 center, double radius);

  static constexpr double kNormalization = 315.0 / (64.0 * 3.14159265358979323846);

  double value(const Vec3& x) const override;
  Vec3 support_center() const override { return center_; }
  std::array<Vec3, 2> support_box() const override;
  ReferenceShape reference_shape() const override { return ReferenceShape::kBall; }
  Vec3 map_from_reference(const Vec3& u) const override;

  double radius() const { return radius_; }
  double peak() const { return kNormalization / (radius_ * radius_ * radius_); }
  /// Fraction of mass inside |x−c| ≤ s·a.
  static double radial_cdf(double s);

 private:
  Vec3 center_;
  double radius_;
};

class UniformBall final : public ParticleDensity {
 public:
  UniformBall(Vec3 center, double radius);
  double value(const Vec3& x) const override;
  Vec3 support_center() const override { return center_; }
  std::array<Vec3, 2> support_box() const override;
  ReferenceShape reference_shape() const override { return ReferenceShape::kBall; }
  Vec3 map_from_reference(const Vec3& u) const override { return center_ + radius_ * u; }

 private:
  Vec3 center_;
  double radius_;
};

class UniformBox final : public ParticleDensity {
 public:
  UniformBox(Vec3 lo, Vec3 hi);
  double value(const Vec3& x) const override;
  Vec3 support_center() const override { return 0.5 * (lo_ + hi_); }
  std::array<Vec3, 2> support_box() const override { return {lo_, hi_}; }
  ReferenceShape reference_shape() const override { return ReferenceShape::kBox; }
  Vec3 reference_extent() const override { return hi_ - lo_; }
  Vec3 map_from_reference(const Vec3& u) const override { return lo_ + u; }

 private:
  Vec3 lo_, hi_;
};

/// Piecewise-constant density on the cells of a DensityField, sampled through the
/// Knothe–Rosenblatt (triangular) map from the unit cube.
class GridDensity final : public ParticleDensity {
 public:
  explicit GridDensity(const DensityField& field);
  double value(const Vec3& x) const override;
  Vec3 support_center() const override;
  std::array<Vec3, 2> support_box() const override;
  ReferenceShape reference_shape() const override { return ReferenceShape::kBox; }
  Vec3 map_from_reference(const Vec3& u) const override;

 private:
  DensityField field_;
  std::vector<double> cell_mass_;  // normalised per-cell masses
};

}  // namespace sedlab
