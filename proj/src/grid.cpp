#include <sedlab/grid.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace sedlab {

namespace {

int next_pow2(int v) {
  int p = 1;
  while (p < v) p <<= 1;
  return p;
}

// Continuous cell coordinate for trilinear weights; returns base index and fraction.
inline void locate(double u, int n, int& i0, double& t) {
  const double f = std::floor(u);
  i0 = static_cast<int>(f);
  t = u - f;
  (void)n;
}

}  // namespace

std::array<int, 3> GridSpec::padded_dims() const {
  std::array<int, 3> p{};
  for (int a = 0; a < 3; ++a) p[a] = next_pow2(static_cast<int>(std::ceil(padding_factor * dims[a] - 1e-9)));
  return p;
}

bool GridSpec::contains(const Vec3& p) const {
  const Vec3 hi = origin + extent();
  for (int a = 0; a < 3; ++a) {
    if (p[a] < origin[a] || p[a] > hi[a]) return false;
  }
  return true;
}

void GridSpec::validate() const {
  if (!(cell > 0.0)) throw std::invalid_argument("GridSpec: cell must be > 0");
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw std::invalid_argument("GridSpec: dims must be >= 1");
  }
  if (!(padding_factor >= 2.0)) throw std::invalid_argument("GridSpec: padding_factor must be >= 2");
  for (int p : padded_dims()) {
    if (!std::has_single_bit(static_cast<unsigned>(p))) throw std::invalid_argument("GridSpec: padded dims not powers of two");
  }
}

GridSpec GridSpec::cube(const Vec3& center, double side, int n, double padding_factor) {
  GridSpec g;
  g.cell = side / n;
  g.dims = {n, n, n};
  g.origin = center - Vec3::Constant(side / 2.0);
  g.padding_factor = padding_factor;
  return g;
}

bool GridSpec::operator==(const GridSpec& o) const {
  return origin == o.origin && cell == o.cell && dims == o.dims && padding_factor == o.padding_factor;
}

DensityField::DensityField(GridSpec grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw std::invalid_argument("DensityField: value count does not match grid");
  double mass = 0.0;
  for (double& v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("DensityField: non-finite value");
    if (v < 0.0) {
      if (v < -1e-12) throw std::invalid_argument("DensityField: negative density " + std::to_string(v));
      v = 0.0;
    }
    mass += v;
  }
  total_mass_ = mass * grid_.cell_volume();
}

double DensityField::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

void DensityField::require_probability(double tol) const {
  if (std::abs(total_mass_ - 1.0) > tol) {
    throw std::invalid_argument("DensityField: total mass " + std::to_string(total_mass_) + " is not 1");
  }
}

double DensityField::interpolate(const Vec3& p) const {
  const auto& d = grid_.dims;
  const Vec3 u = (p - grid_.origin) / grid_.cell - Vec3::Constant(0.5);
  int i0[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    locate(u[a], d[a], i0[a], t[a]);
    if (i0[a] < -1 || i0[a] >= d[a]) return 0.0;
  }
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int i = i0[0] + (c & 1), j = i0[1] + ((c >> 1) & 1), k = i0[2] + ((c >> 2) & 1);
    if (i < 0 || j < 0 || k < 0 || i >= d[0] || j >= d[1] || k >= d[2]) continue;
    const double w = ((c & 1) ? t[0] : 1.0 - t[0]) * (((c >> 1) & 1) ? t[1] : 1.0 - t[1]) *
                     (((c >> 2) & 1) ? t[2] : 1.0 - t[2]);
    acc += w * values_[grid_.index(i, j, k)];
  }
  return acc;
}

DensityField DensityField::scaled(double factor) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= factor;
  return DensityField(grid_, std::move(v));
}

VelocityField::VelocityField(GridSpec grid) : grid_(std::move(grid)) {
  for (auto& c : comps_) c.assign(grid_.size(), 0.0);
}

VelocityField::VelocityField(GridSpec grid, std::array<std::vector<double>, 3> components, double divergence_norm)
    : grid_(std::move(grid)), comps_(std::move(components)), divergence_norm_(divergence_norm) {
  for (const auto& c : comps_) {
    if (c.size() != grid_.size()) throw std::invalid_argument("VelocityField: component size does not match grid");
  }
}

Vec3 VelocityField::interpolate(const Vec3& p) const {
  const auto& d = grid_.dims;
  const Vec3 u = (p - grid_.origin) / grid_.cell - Vec3::Constant(0.5);
  int i0[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    const double ua = std::clamp(u[a], 0.0, double(d[a] - 1));
    locate(ua, d[a], i0[a], t[a]);
    if (i0[a] >= d[a] - 1) {
      i0[a] = std::max(d[a] - 2, 0);
      t[a] = d[a] > 1 ? ua - i0[a] : 0.0;
    }
  }
  Vec3 acc = Vec3::Zero();
  for (int c = 0; c < 8; ++c) {
    const int i = std::min(i0[0] + (c & 1), d[0] - 1);
    const int j = std::min(i0[1] + ((c >> 1) & 1), d[1] - 1);
    const int k = std::min(i0[2] + ((c >> 2) & 1), d[2] - 1);
    const double w = ((c & 1) ? t[0] : 1.0 - t[0]) * (((c >> 1) & 1) ? t[1] : 1.0 - t[1]) *
                     (((c >> 2) & 1) ? t[2] : 1.0 - t[2]);
    if (w == 0.0) continue;
    const std::size_t idx = grid_.index(i, j, k);
    acc += w * Vec3(comps_[0][idx], comps_[1][idx], comps_[2][idx]);
  }
  return acc;
}

double VelocityField::max_magnitude() const {
  double m = 0.0;
  for (std::size_t i = 0; i < grid_.size(); ++i) m = std::max(m, at(i).norm());
  return m;
}

VelocityField& VelocityField::operator+=(const VelocityField& o) {
  if (!(o.grid_ == grid_)) throw std::invalid_argument("VelocityField: grid mismatch");
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < comps_[c].size(); ++i) comps_[c][i] += o.comps_[c][i];
  }
  divergence_norm_ = std::max(divergence_norm_, o.divergence_norm_);
  return *this;
}

DensityField sample_density(const GridSpec& grid, const std::function<double(const Vec3&)>& f) {
  std::vector<double> v(grid.size());
  for (int k = 0; k < grid.dims[2]; ++k)
    for (int j = 0; j < grid.dims[1]; ++j)
      for (int i = 0; i < grid.dims[0]; ++i) v[grid.index(i, j, k)] = f(grid.center(i, j, k));
  return DensityField(grid, std::move(v));
}

// ---------------------------------------------------------------------------------------------
// Binary blob + sidecar header.

namespace {

void write_le_double(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

double read_le_double(std::istream& is) {
  std::uint64_t bits = 0;
  is.read(reinterpret_cast<char*>(&bits), sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

struct Header {
  GridSpec grid;
  int components = 1;
};

Header read_header(const std::string& path) {
  std::ifstream in(path + ".hdr");
  if (!in) throw std::runtime_error("cannot open " + path + ".hdr");
  Header h;
  std::string key;
  while (in >> key) {
    if (key == "origin") in >> h.grid.origin[0] >> h.grid.origin[1] >> h.grid.origin[2];
    else if (key == "cell") in >> h.grid.cell;
    else if (key == "dims") in >> h.grid.dims[0] >> h.grid.dims[1] >> h.grid.dims[2];
    else if (key == "padding_factor") in >> h.grid.padding_factor;
    else if (key == "components") in >> h.components;
    else throw std::runtime_error("unknown header key '" + key + "' in " + path + ".hdr");
  }
  return h;
}

std::vector<std::vector<double>> read_blob(const std::string& path, const Header& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<double>> comps(h.components, std::vector<double>(h.grid.size()));
  for (std::size_t i = 0; i < h.grid.size(); ++i)
    for (int c = 0; c < h.components; ++c) comps[c][i] = read_le_double(in);
  if (!in) throw std::runtime_error("truncated field blob " + path);
  return comps;
}

}  // namespace

void write_field(const std::string& path, const GridSpec& grid, const std::vector<const std::vector<double>*>& comps) {
  {
    std::ofstream hdr(path + ".hdr");
    hdr << std::setprecision(17);
    hdr << "origin " << grid.origin[0] << ' ' << grid.origin[1] << ' ' << grid.origin[2] << '\n'
        << "cell " << grid.cell << '\n'
        << "dims " << grid.dims[0] << ' ' << grid.dims[1] << ' ' << grid.dims[2] << '\n'
        << "padding_factor " << grid.padding_factor << '\n'
        << "components " << comps.size() << '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (const auto* c : comps) write_le_double(out, (*c)[i]);
}

void write_density(const std::string& path, const DensityField& f) { write_field(path, f.grid(), {&f.values()}); }

void write_velocity(const std::string& path, const VelocityField& v) {
  write_field(path, v.grid(), {&v.component(0), &v.component(1), &v.component(2)});
}

DensityField read_density(const std::string& path) {
  const Header h = read_header(path);
  if (h.components != 1) throw std::runtime_error(path + " is not a scalar field");
  auto comps = read_blob(path, h);
  return DensityField(h.grid, std::move(comps[0]));
}

VelocityField read_velocity(const std::string& path) {
  const Header h = read_header(path);
  if (h.components != 3) throw std::runtime_error(path + " is not a vector field");
  auto comps = read_blob(path, h);
  return VelocityField(h.grid, {std::move(comps[0]), std::move(comps[1]), std::move(comps[2])});
}

}  // namespace sedlab
