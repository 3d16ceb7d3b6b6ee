#include <sedlab/densities.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sedlab {

namespace {

// Invert a piecewise-linear CDF defined by per-cell masses on [x0, x0 + n h]; `target` in [0, total].
double invert_cells(const std::vector<double>& mass, double x0, double h, double target, int* cell_out) {
  double cum = 0.0;
  const int n = static_cast<int>(mass.size());
  for (int c = 0; c < n; ++c) {
    if (mass[c] > 0.0 && cum + mass[c] >= target) {
      const double frac = std::clamp((target - cum) / mass[c], 0.0, 1.0);
      *cell_out = c;
      return x0 + (c + frac) * h;
    }
    cum += mass[c];
  }
  // target at the very top: last cell with mass
  for (int c = n - 1; c >= 0; --c) {
    if (mass[c] > 0.0) {
      *cell_out = c;
      return x0 + (c + 1) * h;
    }
  }
  throw std::invalid_argument("GridDensity: empty density");
}

}  // namespace

// ---------------------------------------------------------------------------------------------

PolynomialBlob::PolynomialBlob(Vec3 center, double radius) : center_(std::move(center)), radius_(radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("PolynomialBlob: radius must be > 0");
}

double PolynomialBlob::value(const Vec3& x) const {
  const double s2 = (x - center_).squaredNorm() / (radius_ * radius_);
  if (s2 >= 1.0) return 0.0;
  const double w = 1.0 - s2;
  return peak() * w * w * w;
}

std::array<Vec3, 2> PolynomialBlob::support_box() const {
  return {center_ - Vec3::Constant(radius_), center_ + Vec3::Constant(radius_)};
}

double PolynomialBlob::radial_cdf(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double s2 = s * s;
  const double s3 = s2 * s;
  // 4π c ∫_0^s (1−t²)³ t² dt with c = 315/(64π)
  return 315.0 / 16.0 * s3 * (1.0 / 3.0 - s2 * (3.0 / 5.0 - s2 * (3.0 / 7.0 - s2 / 9.0)));
}

Vec3 PolynomialBlob::map_from_reference(const Vec3& u) const {
  const double r = u.norm();
  if (r == 0.0) return center_;
  // radial monotone map: uniform-ball mass fraction r³ ↦ blob radius s with radial_cdf(s) = r³
  const double target = std::min(r, 1.0);
  const double want = target * target * target;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (radial_cdf(mid) < want ? lo : hi) = mid;
  }
  const double s = 0.5 * (lo + hi);
  return center_ + (radius_ * s / r) * u;
}

UniformBall::UniformBall(Vec3 center, double radius) : center_(std::move(center)), radius_(radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("UniformBall: radius must be > 0");
}

double UniformBall::value(const Vec3& x) const {
  if ((x - center_).norm() > radius_) return 0.0;
  return 3.0 / (4.0 * 3.14159265358979323846 * radius_ * radius_ * radius_);
}

std::array<Vec3, 2> UniformBall::support_box() const {
  return {center_ - Vec3::Constant(radius_), center_ + Vec3::Constant(radius_)};
}

UniformBox::UniformBox(Vec3 lo, Vec3 hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (!((hi_ - lo_).minCoeff() > 0.0)) throw std::invalid_argument("UniformBox: empty box");
}

double UniformBox::value(const Vec3& x) const {
  for (int a = 0; a < 3; ++a) {
    if (x[a] < lo_[a] || x[a] > hi_[a]) return 0.0;
  }
  return 1.0 / (hi_ - lo_).prod();
}

// ---------------------------------------------------------------------------------------------

GridDensity::GridDensity(const DensityField& field) : field_(field) {
  if (!(field.total_mass() > 0.0)) throw std::invalid_argument("GridDensity: zero mass");
  const double inv = field.grid().cell_volume() / field.total_mass();
  cell_mass_.resize(field.values().size());
  for (std::size_t i = 0; i < cell_mass_.size(); ++i) cell_mass_[i] = field.values()[i] * inv;
}

double GridDensity::value(const Vec3& x) const {
  const auto& g = field_.grid();
  const Vec3 u = (x - g.origin) / g.cell;
  const int i = int(std::floor(u[0])), j = int(std::floor(u[1])), k = int(std::floor(u[2]));
  if (i < 0 || j < 0 || k < 0 || i >= g.dims[0] || j >= g.dims[1] || k >= g.dims[2]) return 0.0;
  return cell_mass_[g.index(i, j, k)] / g.cell_volume();
}

Vec3 GridDensity::support_center() const {
  const auto& g = field_.grid();
  Vec3 c = Vec3::Zero();
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) c += cell_mass_[g.index(i, j, k)] * g.center(i, j, k);
  return c;
}

std::array<Vec3, 2> GridDensity::support_box() const {
  const auto& g = field_.grid();
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        if (cell_mass_[g.index(i, j, k)] <= 0.0) continue;
        const Vec3 c = g.center(i, j, k);
        lo = lo.cwiseMin(c - Vec3::Constant(g.cell / 2));
        hi = hi.cwiseMax(c + Vec3::Constant(g.cell / 2));
      }
  return {lo, hi};
}

Vec3 GridDensity::map_from_reference(const Vec3& u) const {
  const auto& g = field_.grid();
  const auto& d = g.dims;
  std::vector<double> mx(d[0], 0.0);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) mx[i] += cell_mass_[g.index(i, j, k)];
  int ci = 0, cj = 0, ck = 0;
  const double x = invert_cells(mx, g.origin[0], g.cell, std::clamp(u[0], 0.0, 1.0), &ci);

  std::vector<double> my(d[1], 0.0);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j) my[j] += cell_mass_[g.index(ci, j, k)];
  double ty = 0.0;
  for (double m : my) ty += m;
  const double y = invert_cells(my, g.origin[1], g.cell, std::clamp(u[1], 0.0, 1.0) * ty, &cj);

  std::vector<double> mz(d[2], 0.0);
  for (int k = 0; k < d[2]; ++k) mz[k] = cell_mass_[g.index(ci, cj, k)];
  double tz = 0.0;
  for (double m : mz) tz += m;
  const double z = invert_cells(mz, g.origin[2], g.cell, std::clamp(u[2], 0.0, 1.0) * tz, &ck);
  return {x, y, z};
}

}  // namespace sedlab
