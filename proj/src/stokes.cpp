#include <sedlab/stokes.hpp>

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace sedlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTaperStart = 0.5;

int next_pow2(int v) {
  int p = 1;
  while (p < v) p <<= 1;
  return p;
}

struct FftwReal {
  double* p = nullptr;
  explicit FftwReal(std::size_t n) : p(fftw_alloc_real(n)) {
    if (!p) throw std::bad_alloc();
  }
  ~FftwReal() { fftw_free(p); }
  FftwReal(const FftwReal&) = delete;
  FftwReal& operator=(const FftwReal&) = delete;
};

struct FftwComplex {
  fftw_complex* p = nullptr;
  explicit FftwComplex(std::size_t n) : p(fftw_alloc_complex(n)) {
    if (!p) throw std::bad_alloc();
  }
  ~FftwComplex() { fftw_free(p); }
  FftwComplex(const FftwComplex&) = delete;
  FftwComplex& operator=(const FftwComplex&) = delete;
};

// Signed index of mode m on an axis of length n; Nyquist returns 0 for derivative symbols.
inline int signed_mode(int m, int n) { return m <= n / 2 ? m : m - n; }
inline double deriv_wavenumber(int m, int n, double h) {
  if (2 * m == n) return 0.0;
  return 2.0 * kPi * signed_mode(m, n) / (n * h);
}

}  // namespace

double truncated_biharmonic_hat(double k, double L) {
  const double s = k * L;
  const double L4 = L * L * L * L;
  if (s < 0.1) {
    const double s2 = s * s;
    return 0.5 * L4 * (0.25 - s2 * (1.0 / 36.0 - s2 * (1.0 / 960.0 - s2 * (1.0 / 50400.0 - s2 / 4354560.0))));
  }
  const double c = std::cos(s), sn = std::sin(s);
  const double s2 = s * s;
  return 0.5 * L4 * (-c / s2 + 2.0 * sn / (s2 * s) + 2.0 * (c - 1.0) / (s2 * s2));
}

// Transforms on the padded grid of kernels sampled from the truncated biharmonic.
// Odd kernels are stored by their imaginary part.
struct KernelSet {
  std::vector<double> biharm;
  std::array<std::vector<double>, 3> lap_grad;  // ∂_a ΔB
  std::array<std::vector<double>, 10> third;    // ∂_a∂_b∂_c B, a ≤ b ≤ c
  bool strain_ready = false;
};

inline int third_slot(int a, int b, int c) {
  if (a > b) std::swap(a, b);
  if (b > c) std::swap(b, c);
  if (a > b) std::swap(a, b);
  static constexpr int table[3][3][3] = {{{0, 1, 2}, {-1, 3, 4}, {-1, -1, 5}},
                                         {{-1, -1, -1}, {-1, 6, 7}, {-1, -1, 8}},
                                         {{-1, -1, -1}, {-1, -1, -1}, {-1, -1, 9}}};
  return table[a][b][c];
}

struct StokesSolver::Impl {
  std::array<int, 3> n{};  // physical dims
  std::array<int, 3> P{};  // padded dims
  std::size_t real_size = 0, spec_size = 0;
  int hx = 0;  // P[0]/2+1
  double h = 1.0;
  std::shared_ptr<KernelSet> kernels;
  std::array<std::vector<double>, 3> kvec;  // derivative wavenumbers per axis (x uses half range)

  FftwReal rbuf;
  FftwComplex cbuf;
  std::vector<std::complex<double>> fhat[3];
  fftw_plan fwd = nullptr, bwd = nullptr;

  Impl(const GridSpec& g)
      : n(g.dims),
        P(g.padded_dims()),
        real_size(std::size_t(P[0]) * P[1] * P[2]),
        spec_size(std::size_t(P[0] / 2 + 1) * P[1] * P[2]),
        hx(P[0] / 2 + 1),
        h(g.cell),
        rbuf(real_size),
        cbuf(spec_size) {
    fwd = fftw_plan_dft_r2c_3d(P[2], P[1], P[0], rbuf.p, cbuf.p, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_3d(P[2], P[1], P[0], cbuf.p, rbuf.p, FFTW_ESTIMATE);
    for (int a = 0; a < 3; ++a) {
      const int len = a == 0 ? hx : P[a];
      kvec[a].resize(len);
      for (int m = 0; m < len; ++m) kvec[a][m] = deriv_wavenumber(m, P[a], h);
    }
    for (auto& f : fhat) f.resize(spec_size);
    using Key = std::tuple<double, std::array<int, 3>, std::array<int, 3>>;
    static std::map<Key, std::shared_ptr<KernelSet>> cache;
    const Key key{h, n, P};
    auto it = cache.find(key);
    if (it != cache.end()) {
      kernels = it->second;
    } else {
      kernels = std::make_shared<KernelSet>();
      build_kernels(false);
      if (cache.size() > 2) cache.clear();
      cache[key] = kernels;
    }
  }

  ~Impl() {
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }

  // Each kernel is synthesised from its continuous symbol on a grid large enough that the
  // truncation sphere does not wrap, sampled at offsets |m_a| < n_a and transformed on the
  // padded grid. Derivatives are taken before the cut so the cut stays out of their symbols.
  void build_kernels(bool strain) {
    const double diag = h * std::sqrt(double(n[0]) * n[0] + double(n[1]) * n[1] + double(n[2]) * n[2]);
    const double L = diag * (1.0 + 1e-6);
    std::array<int, 3> Q{};
    for (int a = 0; a < 3; ++a) Q[a] = next_pow2(n[a] + int(std::ceil(L / h)) + 2);
    const int qx = Q[0] / 2 + 1;
    const std::size_t qspec = std::size_t(qx) * Q[1] * Q[2];
    const std::size_t qreal = std::size_t(Q[0]) * Q[1] * Q[2];
    FftwComplex spec(qspec);
    FftwReal vals(qreal);
    fftw_plan plan = fftw_plan_dft_c2r_3d(Q[2], Q[1], Q[0], spec.p, vals.p, FFTW_ESTIMATE);
    std::vector<double> bhat(qspec);
    std::array<std::vector<double>, 3> qk;
    for (int a = 0; a < 3; ++a) {
      qk[a].resize(a == 0 ? qx : Q[a]);
      for (std::size_t m = 0; m < qk[a].size(); ++m) qk[a][m] = deriv_wavenumber(int(m), Q[a], h);
    }
    for (int kz = 0; kz < Q[2]; ++kz) {
      const double wz = 2.0 * kPi * signed_mode(kz, Q[2]) / (Q[2] * h);
      for (int ky = 0; ky < Q[1]; ++ky) {
        const double wy = 2.0 * kPi * signed_mode(ky, Q[1]) / (Q[1] * h);
        for (int kx = 0; kx < qx; ++kx) {
          const double wx = 2.0 * kPi * kx / (Q[0] * h);
          bhat[kx + std::size_t(qx) * (ky + std::size_t(Q[1]) * kz)] =
              truncated_biharmonic_hat(std::sqrt(wx * wx + wy * wy + wz * wz), L);
        }
      }
    }
    const double inv = 1.0 / double(qreal);
    // Derivative symbols jump to zero at the Nyquist plane; without a taper the resulting
    // grid-scale ripple in the kernels is cut at the box and feeds back near the Nyquist.
    std::array<std::vector<double>, 3> taper;
    for (int a = 0; a < 3; ++a) {
      taper[a].resize(qk[a].size());
      for (std::size_t m = 0; m < qk[a].size(); ++m) {
        const double t = std::abs(2.0 * signed_mode(int(m), Q[a])) / Q[a];
        taper[a][m] = t <= kTaperStart ? 1.0 : std::pow(std::cos(0.5 * kPi * (t - kTaperStart) / (1.0 - kTaperStart)), 2);
      }
    }

    // symbol(k, B̂) gives the multiplier; odd kernels are purely imaginary
    auto make = [&](auto&& symbol, bool odd) {
      for (int kz = 0; kz < Q[2]; ++kz)
        for (int ky = 0; ky < Q[1]; ++ky)
          for (int kx = 0; kx < qx; ++kx) {
            const std::size_t idx = kx + std::size_t(qx) * (ky + std::size_t(Q[1]) * kz);
            double v = symbol(Vec3(qk[0][kx], qk[1][ky], qk[2][kz]), bhat[idx]);
            if (odd) v *= taper[0][kx] * taper[1][ky] * taper[2][kz];
            spec.p[idx][0] = odd ? 0.0 : v;
            spec.p[idx][1] = odd ? v : 0.0;
          }
      fftw_execute(plan);
      std::fill(rbuf.p, rbuf.p + real_size, 0.0);
      for (int mz = -(n[2] - 1); mz <= n[2] - 1; ++mz)
        for (int my = -(n[1] - 1); my <= n[1] - 1; ++my)
          for (int mx = -(n[0] - 1); mx <= n[0] - 1; ++mx) {
            const std::size_t qi = std::size_t((mx + Q[0]) % Q[0]) +
                                   std::size_t(Q[0]) * ((my + Q[1]) % Q[1] + std::size_t(Q[1]) * ((mz + Q[2]) % Q[2]));
            const std::size_t pi = std::size_t((mx + P[0]) % P[0]) +
                                   std::size_t(P[0]) * ((my + P[1]) % P[1] + std::size_t(P[1]) * ((mz + P[2]) % P[2]));
            rbuf.p[pi] = vals.p[qi] * inv;
          }
      fftw_execute_dft_r2c(fwd, rbuf.p, cbuf.p);
      std::vector<double> out(spec_size);
      for (std::size_t i = 0; i < spec_size; ++i) out[i] = cbuf.p[i][odd ? 1 : 0];
      return out;
    };

    if (kernels->biharm.empty()) {
      kernels->biharm = make([](const Vec3&, double b) { return b; }, false);
    }
    if (strain && !kernels->strain_ready) {
      for (int a = 0; a < 3; ++a)
        kernels->lap_grad[a] = make([a](const Vec3& k, double b) { return -k[a] * k.squaredNorm() * b; }, true);
      for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b)
          for (int c = b; c < 3; ++c)
            kernels->third[third_slot(a, b, c)] =
                make([a, b, c](const Vec3& k, double bh) { return -k[a] * k[b] * k[c] * bh; }, true);
      kernels->strain_ready = true;
    }
    fftw_destroy_plan(plan);
  }

  void forward(const std::vector<double>& f, std::vector<std::complex<double>>& out) {
    std::fill(rbuf.p, rbuf.p + real_size, 0.0);
    for (int k = 0; k < n[2]; ++k)
      for (int j = 0; j < n[1]; ++j) {
        const double* src = f.data() + std::size_t(n[0]) * (j + std::size_t(n[1]) * k);
        double* dst = rbuf.p + std::size_t(P[0]) * (j + std::size_t(P[1]) * k);
        std::copy(src, src + n[0], dst);
      }
    fftw_execute_dft_r2c(fwd, rbuf.p, cbuf.p);
    for (std::size_t i = 0; i < spec_size; ++i) out[i] = {cbuf.p[i][0], cbuf.p[i][1]};
  }

  // Inverse transform of `in` (unnormalised), restricted to the physical box.
  std::vector<double> backward(const std::vector<std::complex<double>>& in) {
    for (std::size_t i = 0; i < spec_size; ++i) {
      cbuf.p[i][0] = in[i].real();
      cbuf.p[i][1] = in[i].imag();
    }
    fftw_execute_dft_c2r(bwd, cbuf.p, rbuf.p);
    const double scale = 1.0 / double(real_size);
    std::vector<double> out(std::size_t(n[0]) * n[1] * n[2]);
    for (int k = 0; k < n[2]; ++k)
      for (int j = 0; j < n[1]; ++j) {
        const double* src = rbuf.p + std::size_t(P[0]) * (j + std::size_t(P[1]) * k);
        double* dst = out.data() + std::size_t(n[0]) * (j + std::size_t(n[1]) * k);
        for (int i = 0; i < n[0]; ++i) dst[i] = src[i] * scale;
      }
    return out;
  }

  template <class F>
  void for_each_mode(F&& f) const {
    for (int kz = 0; kz < P[2]; ++kz)
      for (int ky = 0; ky < P[1]; ++ky)
        for (int kx = 0; kx < hx; ++kx) {
          const std::size_t idx = kx + std::size_t(hx) * (ky + std::size_t(P[1]) * kz);
          f(idx, Vec3(kvec[0][kx], kvec[1][ky], kvec[2][kz]));
        }
  }
};

StokesSolver::StokesSolver(const GridSpec& grid) : grid_(grid) {
  grid_.validate();
  impl_ = std::make_unique<Impl>(grid_);
}

StokesSolver::~StokesSolver() = default;

std::shared_ptr<StokesSolver> StokesSolver::for_grid(const GridSpec& grid) {
  // The transform kernel is cached separately; only the most recent solver is kept here.
  static std::shared_ptr<StokesSolver> last;
  if (!last || !(last->grid() == grid)) last = std::make_shared<StokesSolver>(grid);
  return last;
}

namespace {

double boundary_fraction(const GridSpec& g, const std::vector<double>& f) {
  double total = 0.0, edge = 0.0;
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const double v = std::abs(f[g.index(i, j, k)]);
        total += v;
        if (i == 0 || j == 0 || k == 0 || i == g.dims[0] - 1 || j == g.dims[1] - 1 || k == g.dims[2] - 1) edge += v;
      }
  return total > 0.0 ? edge / total : 0.0;
}

}  // namespace

StokesResult StokesSolver::solve(const Components3* force, const Components6* stress, bool want_strain) const {
  Impl& m = *impl_;
  const std::size_t cells = grid_.size();
  auto check = [&](const std::vector<double>& c) {
    if (c.size() != cells) throw std::invalid_argument("StokesSolver: source size does not match grid");
    if (boundary_fraction(grid_, c) > 1e-2) {
      throw std::domain_error("StokesSolver: source reaches the box boundary; enlarge the grid");
    }
  };

  for (auto& f : m.fhat) std::fill(f.begin(), f.end(), std::complex<double>(0.0));
  std::vector<std::complex<double>> tmp(m.spec_size);
  if (force) {
    for (int c = 0; c < 3; ++c) {
      check((*force)[c]);
      m.forward((*force)[c], tmp);
      for (std::size_t i = 0; i < m.spec_size; ++i) m.fhat[c][i] += tmp[i];
    }
  }
  if (stress) {
    const std::complex<double> I(0.0, 1.0);
    for (int s = 0; s < 6; ++s) {
      check((*stress)[s]);
      m.forward((*stress)[s], tmp);
      // (div σ)_i = ∂_j σ_ij; each off-diagonal entry feeds two rows
      const int a = s < 3 ? s : (s == 3 ? 0 : (s == 4 ? 0 : 1));
      const int b = s < 3 ? s : (s == 3 ? 1 : (s == 4 ? 2 : 2));
      m.for_each_mode([&](std::size_t idx, const Vec3& k) {
        m.fhat[a][idx] += I * k[b] * tmp[idx];
        if (a != b) m.fhat[b][idx] += I * k[a] * tmp[idx];
      });
    }
  }

  std::array<std::vector<std::complex<double>>, 3> uhat;
  for (auto& u : uhat) u.resize(m.spec_size);
  double div2 = 0.0, mag2 = 0.0;
  m.for_each_mode([&](std::size_t idx, const Vec3& k) {
    const double k2 = k.squaredNorm();
    const double kh = m.kernels->biharm[idx];
    const std::complex<double> kf = k[0] * m.fhat[0][idx] + k[1] * m.fhat[1][idx] + k[2] * m.fhat[2][idx];
    for (int c = 0; c < 3; ++c) uhat[c][idx] = kh * (k[c] * kf - k2 * m.fhat[c][idx]);
    const std::complex<double> ku = k[0] * uhat[0][idx] + k[1] * uhat[1][idx] + k[2] * uhat[2][idx];
    div2 += std::norm(ku);
    mag2 += k2 * (std::norm(uhat[0][idx]) + std::norm(uhat[1][idx]) + std::norm(uhat[2][idx]));
  });

  StokesResult res;
  Components3 comps;
  for (int c = 0; c < 3; ++c) comps[c] = m.backward(uhat[c]);
  res.velocity = VelocityField(grid_, std::move(comps), mag2 > 0.0 ? std::sqrt(div2 / mag2) : 0.0);

  if (want_strain) {
    // e_ab = ½(∂_a G_bj + ∂_b G_aj) * F_j with ∂_a G_bj = δ_bj ∂_aΔB − ∂_a∂_b∂_j B
    m.build_kernels(true);
    const KernelSet& K = *m.kernels;
    const std::complex<double> I(0.0, 1.0);
    for (int s = 0; s < 6; ++s) {
      const int a = s < 3 ? s : (s == 5 ? 1 : 0);
      const int b = s < 3 ? s : (s == 3 ? 1 : 2);
      const std::vector<double>* t[3];
      for (int j = 0; j < 3; ++j) t[j] = &K.third[third_slot(a, b, j)];
      for (std::size_t idx = 0; idx < m.spec_size; ++idx) {
        std::complex<double> acc = 0.5 * (K.lap_grad[a][idx] * m.fhat[b][idx] + K.lap_grad[b][idx] * m.fhat[a][idx]);
        for (int j = 0; j < 3; ++j) acc -= (*t[j])[idx] * m.fhat[j][idx];
        tmp[idx] = I * acc;
      }
      res.strain[s] = m.backward(tmp);
    }
  }
  return res;
}

StokesResult StokesSolver::solve_density(const DensityField& tau, const Vec3& g, bool want_strain) const {
  Components3 f;
  for (int c = 0; c < 3; ++c) {
    f[c].resize(tau.values().size());
    for (std::size_t i = 0; i < f[c].size(); ++i) f[c][i] = tau.values()[i] * g[c];
  }
  return solve(&f, nullptr, want_strain);
}

}  // namespace sedlab
