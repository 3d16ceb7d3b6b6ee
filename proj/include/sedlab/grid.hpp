#pragma once

// Regular 3-D cell-centred grids and the scalar / vector fields living on them.
// Storage is x-fastest: index = i + nx * (j + ny * k).

#include <sedlab/types.hpp>

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace sedlab {

struct GridSpec {
  Vec3 origin{0.0, 0.0, 0.0};  ///< lower corner of the unpadded box
  double cell = 1.0;           ///< uniform spacing h
  std::array<int, 3> dims{1, 1, 1};
  double padding_factor = 2.0;  ///< free-space enlargement used by the Stokes solver

  /// Padded dims: smallest power of two >= padding_factor * dims.
  std::array<int, 3> padded_dims() const;
  std::size_t size() const { return std::size_t(dims[0]) * dims[1] * dims[2]; }
  std::size_t index(int i, int j, int k) const { return std::size_t(i) + std::size_t(dims[0]) * (j + std::size_t(dims[1]) * k); }
  Vec3 center(int i, int j, int k) const {
    return origin + cell * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
  Vec3 extent() const { return cell * Vec3(dims[0], dims[1], dims[2]); }
  double cell_volume() const { return cell * cell * cell; }
  bool contains(const Vec3& p) const;

  /// Throws std::invalid_argument on non-positive cell / dims, padding < 2 or non power-of-two padded dims.
  void validate() const;

  /// Cube of `n` cells per side centred at `center` with side length `side`.
  static GridSpec cube(const Vec3& center, double side, int n, double padding_factor = 2.0);

  bool operator==(const GridSpec& o) const;
};

/// Non-negative scalar density on a grid (units length^-3).
class DensityField {
 public:
  DensityField() = default;
  /// Negative entries above -1e-12 are clipped to zero; larger negativity throws std::invalid_argument.
  DensityField(GridSpec grid, std::vector<double> values);

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double total_mass() const { return total_mass_; }
  double max_value() const;

  /// Throws unless the total mass is within `tol` of 1.
  void require_probability(double tol = 1e-3) const;

  /// Trilinear interpolation, zero outside the grid box.
  double interpolate(const Vec3& p) const;

  /// Copy scaled by `factor` (used for mass renormalisation).
  DensityField scaled(double factor) const;

 private:
  GridSpec grid_;
  std::vector<double> values_;
  double total_mass_ = 0.0;
};

/// Vector field on a grid, one component array per direction.
class VelocityField {
 public:
  VelocityField() = default;
  explicit VelocityField(GridSpec grid);  // zero field
  VelocityField(GridSpec grid, std::array<std::vector<double>, 3> components, double divergence_norm = 0.0);

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& component(int c) const { return comps_[c]; }
  std::vector<double>& component(int c) { return comps_[c]; }
  Vec3 at(std::size_t idx) const { return {comps_[0][idx], comps_[1][idx], comps_[2][idx]}; }

  /// Relative spectral divergence residual recorded by the producing solver.
  double divergence_norm() const { return divergence_norm_; }
  void set_divergence_norm(double d) { divergence_norm_ = d; }

  /// Trilinear interpolation with the sample point clamped into the grid box.
  Vec3 interpolate(const Vec3& p) const;
  double max_magnitude() const;

  VelocityField& operator+=(const VelocityField& o);

 private:
  GridSpec grid_;
  std::array<std::vector<double>, 3> comps_;
  double divergence_norm_ = 0.0;
};

/// Cell-centre samples of `f`.
DensityField sample_density(const GridSpec& grid, const std::function<double(const Vec3&)>& f);

/// Raw little-endian float64 blob (x-fastest, components interleaved per cell) plus a text sidecar
/// `<path>.hdr` holding the GridSpec.
void write_field(const std::string& path, const GridSpec& grid, const std::vector<const std::vector<double>*>& comps);
void write_density(const std::string& path, const DensityField& f);
void write_velocity(const std::string& path, const VelocityField& v);
DensityField read_density(const std::string& path);
VelocityField read_velocity(const std::string& path);

}  // namespace sedlab
