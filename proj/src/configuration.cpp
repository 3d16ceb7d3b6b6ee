#include <sedlab/configuration.hpp>

#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sedlab {

namespace {

constexpr double kPsiNorm = 315.0 / (64.0 * std::numbers::pi);

// n1 n2 n3 = n with the most uniform spacings e_a / n_a.
std::array<int, 3> box_factorization(int n, const Vec3& e) {
  std::array<int, 3> best{n, 1, 1};
  double best_ratio = std::numeric_limits<double>::infinity();
  for (int a = 1; a <= n; ++a) {
    if (n % a) continue;
    const int rest = n / a;
    for (int b = 1; b <= rest; ++b) {
      if (rest % b) continue;
      const int c = rest / b;
      const Vec3 h(e[0] / a, e[1] / b, e[2] / c);
      const double ratio = h.maxCoeff() / h.minCoeff();
      if (ratio < best_ratio - 1e-12) {
        best_ratio = ratio;
        best = {a, b, c};
      }
    }
  }
  return best;
}

std::vector<Vec3> ball_lattice(double h, const Vec3& offset) {
  std::vector<Vec3> nodes;
  const int m = static_cast<int>(std::ceil(1.0 / h)) + 1;
  for (int k = -m; k <= m; ++k)
    for (int j = -m; j <= m; ++j)
      for (int i = -m; i <= m; ++i) {
        const Vec3 p = h * (Vec3(i, j, k) + offset);
        if (p.squaredNorm() < 1.0) nodes.push_back(p);
      }
  return nodes;
}

// Lattice spacing giving exactly n nodes inside the unit ball; the offset is generic so that
// nodes cross the sphere one at a time as h varies.
std::vector<Vec3> ball_lattice_exact(int n, detail::Rng& rng, double* spacing) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    const Vec3 offset(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5);
    const double h0 = std::cbrt(4.0 * std::numbers::pi / 3.0 / n);
    double lo = 0.25 * h0, hi = 4.0 * h0;
    if (ball_lattice(hi, offset).size() > std::size_t(n)) continue;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      auto nodes = ball_lattice(mid, offset);
      if (nodes.size() == std::size_t(n)) {
        *spacing = mid;
        return nodes;
      }
      (nodes.size() > std::size_t(n) ? lo : hi) = mid;
    }
  }
  throw std::runtime_error("generate_well_prepared: could not place exactly " + std::to_string(n) + " lattice nodes");
}

}  // namespace

void ParticleConfiguration::validate() const {
  setup.validate();
  if (positions.size() != std::size_t(setup.particle_count)) {
    throw std::invalid_argument("ParticleConfiguration: position count does not match particle_count");
  }
  for (const auto& p : positions) {
    if (!p.allFinite()) throw std::invalid_argument("ParticleConfiguration: non-finite position");
  }
  std::size_t i = 0, j = 0;
  const double d = min_distance(positions, &i, &j);
  if (!(d > 2.0 * setup.radius)) {
    throw std::invalid_argument("ParticleConfiguration: particles " + std::to_string(i) + " and " + std::to_string(j) +
                                " overlap (distance " + std::to_string(d) + " <= 2R)");
  }
}

double min_distance(const std::vector<Vec3>& pts, std::size_t* bi, std::size_t* bj) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d2 = (pts[i] - pts[j]).squaredNorm();
      if (d2 < best) {
        best = d2;
        if (bi) *bi = i;
        if (bj) *bj = j;
      }
    }
  return std::sqrt(best);
}

ConfigurationStats compute_stats(const ParticleConfiguration& cfg, double q) {
  const std::size_t n = cfg.size();
  if (n < 2) throw std::invalid_argument("compute_stats: need at least two particles");
  const auto& x = cfg.positions;
  std::vector<detail::Neumaier> s1(n), s2(n), s3(n), sl(n);
  ConfigurationStats st;
  st.q = q;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r2 = (x[i] - x[j]).squaredNorm();
      if (!(r2 >= kMinSeparation * kMinSeparation)) {
        throw DomainError("compute_stats: particles " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
      }
      if (r2 < best) {
        best = r2;
        st.closest_i = i;
        st.closest_j = j;
      }
      const double inv = 1.0 / std::sqrt(r2);
      const double inv2 = inv * inv;
      const double lq = std::pow(r2, -q);
      s1[i].add(inv), s1[j].add(inv);
      s2[i].add(inv2), s2[j].add(inv2);
      s3[i].add(inv2 * inv), s3[j].add(inv2 * inv);
      sl[i].add(lq), sl[j].add(lq);
    }
  const double r3 = std::pow(cfg.setup.radius, 3);
  for (std::size_t i = 0; i < n; ++i) {
    st.alpha[0] = std::max(st.alpha[0], s1[i].sum() / n);
    st.alpha[1] = std::max(st.alpha[1], s2[i].sum() / n);
    st.alpha[2] = std::max(st.alpha[2], s3[i].sum() / n);
    st.lambda_q = std::max(st.lambda_q, r3 * sl[i].sum());
  }
  st.d_min = std::sqrt(best);
  st.c0 = r3 / (st.d_min * st.d_min * st.d_min);
  return st;
}

double GeneratorOptions::volume_fraction(int n) const {
  if (phi) return *phi;
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("GeneratorOptions: theta must lie in (0,1)");
  double p0;
  if (phi0) {
    p0 = *phi0;
  } else {
    const double nm = std::max(reference_n_max, 2);
    p0 = 0.2 * std::pow(nm, theta) / std::log(nm);
  }
  return p0 * std::pow(double(n), -theta);
}

ParticleConfiguration generate_well_prepared(const ParticleDensity& density, int n, const GeneratorOptions& opts) {
  if (n < 1) throw std::invalid_argument("generate_well_prepared: N must be >= 1");
  if (!opts.phi && !(opts.theta > 0.0 && opts.theta < 1.0)) {
    throw std::invalid_argument("generate_well_prepared: theta must lie in (0, 1)");
  }
  ParticleConfiguration cfg;
  cfg.setup = PhysicalSetup::with_volume_fraction(opts.gravity, n, opts.volume_fraction(n));
  if (n == 1) {
    cfg.positions = {density.support_center()};
    return cfg;
  }

  detail::Rng rng(opts.seed);
  std::vector<Vec3> nodes;
  Vec3 spacing;
  const bool ball = density.reference_shape() == ReferenceShape::kBall;
  if (ball) {
    double h = 0.0;
    nodes = ball_lattice_exact(n, rng, &h);
    spacing = Vec3::Constant(h);
  } else {
    const Vec3 e = density.reference_extent();
    const auto f = box_factorization(n, e);
    spacing = Vec3(e[0] / f[0], e[1] / f[1], e[2] / f[2]);
    if (spacing.maxCoeff() > 2.0 * spacing.minCoeff()) {
      throw std::runtime_error("generate_well_prepared: support too small/elongated for " + std::to_string(n) +
                               " lattice nodes");
    }
    nodes.reserve(n);
    for (int k = 0; k < f[2]; ++k)
      for (int j = 0; j < f[1]; ++j)
        for (int i = 0; i < f[0]; ++i) nodes.push_back(spacing.cwiseProduct(Vec3(i + 0.5, j + 0.5, k + 0.5)));
  }
  const double h = spacing.minCoeff();

  int overlaps = 0;
  for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
    std::vector<Vec3> ref(nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      Vec3 p;
      do {
        const Vec3 jit(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5);
        p = nodes[a] + 0.5 * spacing.cwiseProduct(jit);
      } while (ball && p.squaredNorm() >= 1.0);
      ref[a] = p;
    }
    if (min_distance(ref) < 0.4 * h) continue;
    std::vector<Vec3> phys(ref.size());
    for (std::size_t a = 0; a < ref.size(); ++a) phys[a] = density.map_from_reference(ref[a]);
    if (min_distance(phys) <= 2.0 * cfg.setup.radius) {
      ++overlaps;
      continue;
    }
    cfg.positions = std::move(phys);
    return cfg;
  }
  throw std::runtime_error("generate_well_prepared: separation test failed after " + std::to_string(opts.max_retries) +
                           " retries (" + std::to_string(overlaps) + " with overlapping spheres of radius " +
                           std::to_string(cfg.setup.radius) + "; lower phi or widen the support)");
}

DensityField mollified_density(const ParticleConfiguration& cfg, const GridSpec& grid, std::optional<double> width) {
  const std::size_t n = cfg.size();
  if (n == 0) throw std::invalid_argument("mollified_density: empty configuration");
  double w;
  if (width) {
    w = *width;
  } else {
    if (n < 2) throw std::invalid_argument("mollified_density: width required for a single particle");
    w = min_distance(cfg.positions);
  }
  if (!(w > 0.0)) throw std::invalid_argument("mollified_density: d_min must be > 0");

  const Vec3 lo = grid.origin, hi = grid.origin + grid.extent();
  for (std::size_t p = 0; p < n; ++p) {
    const Vec3& x = cfg.positions[p];
    for (int a = 0; a < 3; ++a) {
      if (x[a] - w < lo[a] || x[a] + w > hi[a]) {
        throw std::invalid_argument("mollified_density: grid does not cover the support of particle " + std::to_string(p));
      }
    }
  }

  std::vector<double> v(grid.size(), 0.0);
  std::vector<std::pair<std::size_t, double>> bump;
  const double hv = grid.cell_volume();
  for (const Vec3& x : cfg.positions) {
    bump.clear();
    std::array<int, 3> c0{}, c1{};
    for (int a = 0; a < 3; ++a) {
      c0[a] = std::max(0, int(std::floor((x[a] - w - lo[a]) / grid.cell)));
      c1[a] = std::min(grid.dims[a] - 1, int(std::floor((x[a] + w - lo[a]) / grid.cell)));
    }
    double sum = 0.0;
    for (int k = c0[2]; k <= c1[2]; ++k)
      for (int j = c0[1]; j <= c1[1]; ++j)
        for (int i = c0[0]; i <= c1[0]; ++i) {
          const double s2 = (grid.center(i, j, k) - x).squaredNorm() / (w * w);
          if (s2 >= 1.0) continue;
          const double t = 1.0 - s2;
          const double val = kPsiNorm * t * t * t / (w * w * w);
          bump.emplace_back(grid.index(i, j, k), val);
          sum += val * hv;
        }
    if (sum <= 0.0) {
      // bump narrower than a cell: deposit into the containing cell
      const Vec3 u = (x - lo) / grid.cell;
      const int i = std::clamp(int(u[0]), 0, grid.dims[0] - 1), j = std::clamp(int(u[1]), 0, grid.dims[1] - 1),
                k = std::clamp(int(u[2]), 0, grid.dims[2] - 1);
      v[grid.index(i, j, k)] += 1.0 / (n * hv);
      continue;
    }
    const double scale = 1.0 / (n * sum);
    for (const auto& [idx, val] : bump) v[idx] += val * scale;
  }
  return DensityField(grid, std::move(v));
}

void write_configuration(std::ostream& os, const ParticleConfiguration& cfg) {
  os << std::setprecision(17);
  const auto& g = cfg.setup.gravity;
  os << cfg.size() << ' ' << cfg.setup.radius << ' ' << g[0] << ' ' << g[1] << ' ' << g[2] << '\n';
  for (const auto& p : cfg.positions) os << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
}

void write_configuration(const std::string& path, const ParticleConfiguration& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_configuration(out, cfg);
}

ParticleConfiguration read_configuration(std::istream& is) {
  ParticleConfiguration cfg;
  std::size_t n = 0;
  if (!(is >> n >> cfg.setup.radius >> cfg.setup.gravity[0] >> cfg.setup.gravity[1] >> cfg.setup.gravity[2])) {
    throw std::runtime_error("read_configuration: malformed header");
  }
  cfg.setup.particle_count = static_cast<int>(n);
  cfg.positions.resize(n);
  for (auto& p : cfg.positions) {
    if (!(is >> p[0] >> p[1] >> p[2])) throw std::runtime_error("read_configuration: truncated position table");
  }
  return cfg;
}

ParticleConfiguration read_configuration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_configuration(in);
}

}  // namespace sedlab
