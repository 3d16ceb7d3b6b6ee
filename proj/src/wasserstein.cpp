#include <sedlab/wasserstein.hpp>

#include <sedlab/max_flow.hpp>
#include <sedlab/network_simplex.hpp>

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

namespace sedlab {

void DiscreteMeasure::validate() const {
  if (points.empty()) throw std::invalid_argument("DiscreteMeasure: empty");
  if (points.size() != weights.size()) throw std::invalid_argument("DiscreteMeasure: points/weights size mismatch");
  double s = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("DiscreteMeasure: weights must be positive");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("DiscreteMeasure: weights sum to " + std::to_string(s));
  for (const auto& p : points) {
    if (!p.allFinite()) throw std::invalid_argument("DiscreteMeasure: non-finite point");
  }
}

DiscreteMeasure DiscreteMeasure::empirical(std::vector<Vec3> points) {
  DiscreteMeasure m;
  const double w = 1.0 / double(points.size());
  m.weights.assign(points.size(), w);
  m.points = std::move(points);
  return m;
}

DiscreteMeasure DiscreteMeasure::weighted(std::vector<Vec3> points, std::vector<double> weights) {
  const double s = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(s > 0.0)) throw std::invalid_argument("DiscreteMeasure: zero total weight");
  for (double& w : weights) w /= s;
  DiscreteMeasure m;
  m.points = std::move(points);
  m.weights = std::move(weights);
  return m;
}

namespace {

void check_inputs(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol, std::vector<double>* b) {
  auto basic = [](const DiscreteMeasure& m, const char* name) {
    if (m.points.empty() || m.points.size() != m.weights.size()) {
      throw std::invalid_argument(std::string("transport: malformed measure ") + name);
    }
    for (double w : m.weights) {
      if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument(std::string("transport: non-positive weight in ") + name);
    }
  };
  basic(mu, "mu");
  basic(nu, "nu");
  const double sa = std::accumulate(mu.weights.begin(), mu.weights.end(), 0.0);
  const double sb = std::accumulate(nu.weights.begin(), nu.weights.end(), 0.0);
  if (std::abs(sa - sb) > tol) {
    throw InfeasibleError("transport: total masses differ (" + std::to_string(sa) + " vs " + std::to_string(sb) + ")");
  }
  *b = nu.weights;
  for (double& w : *b) w *= sa / sb;
}

double bbox_diagonal(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  Vec3 lo = mu.points[0], hi = mu.points[0];
  for (const auto* m : {&mu, &nu})
    for (const auto& p : m->points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  return (hi - lo).norm();
}

std::vector<int> projection_order(const std::vector<Vec3>& pts) {
  const Vec3 dir = Vec3(1.0, 0.6180339887, 0.3819660113).normalized();
  std::vector<int> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return pts[a].dot(dir) < pts[b].dot(dir); });
  return order;
}

// Uniform cell index over a point set (CSR layout).
class CellIndex {
 public:
  CellIndex(const std::vector<Vec3>& pts, double cell) : pts_(pts) {
    lo_ = pts[0];
    Vec3 hi = pts[0];
    for (const auto& p : pts) {
      lo_ = lo_.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec3 ext = hi - lo_;
    cell_ = std::max(cell, ext.maxCoeff() / 127.0);
    if (!(cell_ > 0.0)) cell_ = 1.0;
    for (int a = 0; a < 3; ++a) dims_[a] = int(ext[a] / cell_) + 1;
    starts_.assign(std::size_t(dims_[0]) * dims_[1] * dims_[2] + 1, 0);
    std::vector<std::size_t> key(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      key[i] = index(coord(pts[i]));
      ++starts_[key[i] + 1];
    }
    for (std::size_t c = 1; c < starts_.size(); ++c) starts_[c] += starts_[c - 1];
    items_.resize(pts.size());
    std::vector<std::size_t> fill(starts_.begin(), starts_.end() - 1);
    for (std::size_t i = 0; i < pts.size(); ++i) items_[fill[key[i]]++] = int(i);
  }

  // Calls f(j, dist) for every indexed point within distance t of x.
  template <class F>
  void within(const Vec3& x, double t, F&& f) const {
    const int r = int(std::ceil(t / cell_));
    const auto c = coord(x);
    for (int k = std::max(0, c[2] - r); k <= std::min(dims_[2] - 1, c[2] + r); ++k)
      for (int j = std::max(0, c[1] - r); j <= std::min(dims_[1] - 1, c[1] + r); ++j)
        for (int i = std::max(0, c[0] - r); i <= std::min(dims_[0] - 1, c[0] + r); ++i) {
          const std::size_t cell = index({i, j, k});
          for (std::size_t s = starts_[cell]; s < starts_[cell + 1]; ++s) {
            const int q = items_[s];
            const double d = (pts_[q] - x).norm();
            if (d <= t) f(q, d);
          }
        }
  }

 private:
  std::array<int, 3> coord(const Vec3& p) const {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) c[a] = std::clamp(int((p[a] - lo_[a]) / cell_), 0, dims_[a] - 1);
    return c;
  }
  std::size_t index(const std::array<int, 3>& c) const {
    return std::size_t(c[0]) + std::size_t(dims_[0]) * (c[1] + std::size_t(dims_[1]) * c[2]);
  }

  const std::vector<Vec3>& pts_;
  Vec3 lo_;
  double cell_ = 1.0;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<std::size_t> starts_;
  std::vector<int> items_;
};

}  // namespace

Coupling wasserstein_p(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p, const TransportOptions& opts) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("wasserstein_p: p must lie in [1, inf)");
  std::vector<double> b;
  check_inputs(mu, nu, opts.mass_tol, &b);
  const int m = int(mu.size()), n = int(nu.size());
  const auto& X = mu.points;
  const auto& Y = nu.points;
  auto cost = [&](int i, int j) {
    const double d2 = (X[i] - Y[j]).squaredNorm();
    if (p == 2.0) return d2;
    if (p == 1.0) return std::sqrt(d2);
    return std::pow(std::sqrt(d2), p);
  };
  if (std::size_t(m + n - 1) > opts.pair_cap) {
    throw CapacityError("wasserstein_p: " + std::to_string(m) + "x" + std::to_string(n) +
                        " problem exceeds the pair cap " + std::to_string(opts.pair_cap));
  }

  TransportSimplex ns(mu.weights, b, projection_order(X), projection_order(Y), cost);
  std::unordered_set<std::uint64_t> present;
  auto key = [&](int i, int j) { return std::uint64_t(i) * std::uint64_t(n) + std::uint64_t(j); };
  for (std::size_t a = 0; a < ns.arc_count(); ++a) present.insert(key(ns.arc_source(int(a)), ns.arc_sink(int(a))));
  auto add = [&](int i, int j) {
    if (present.insert(key(i, j)).second) ns.add_arc(i, j, cost(i, j));
  };

  // nearest-neighbour seeding, trimmed to the cap
  const std::size_t budget = opts.pair_cap > ns.arc_count() ? opts.pair_cap - ns.arc_count() : 0;
  const int k = std::min<int>({opts.neighbors, n, m, int(budget / std::size_t(m + n))});
  if (k > 0) {
    std::vector<std::pair<double, int>> row;
    for (int i = 0; i < m; ++i) {
      row.clear();
      for (int j = 0; j < n; ++j) row.push_back({(X[i] - Y[j]).squaredNorm(), j});
      std::partial_sort(row.begin(), row.begin() + std::min<int>(k, n), row.end());
      for (int r = 0; r < std::min(k, n); ++r) add(i, row[r].second);
    }
    for (int j = 0; j < n; ++j) {
      row.clear();
      for (int i = 0; i < m; ++i) row.push_back({(X[i] - Y[j]).squaredNorm(), i});
      std::partial_sort(row.begin(), row.begin() + std::min<int>(k, m), row.end());
      for (int r = 0; r < std::min(k, m); ++r) add(row[r].second, j);
    }
  }

  const double diam = bbox_diagonal(mu, nu);
  const double scale = std::max(p == 2.0 ? diam * diam : std::pow(diam, p), 1e-300);
  const double eps = 1e-12 * scale;
  Coupling out;
  while (true) {
    ns.solve(eps);
    ++out.pricing_rounds;
    // full pricing: most negative reduced cost per source row
    std::vector<std::pair<int, int>> entering;
    for (int i = 0; i < m; ++i) {
      double best = -eps;
      int arg = -1;
      for (int j = 0; j < n; ++j) {
        const double rc = ns.reduced_cost(i, j, cost(i, j));
        if (rc < best) {
          best = rc;
          arg = j;
        }
      }
      if (arg >= 0 && !present.count(key(i, arg))) entering.push_back({i, arg});
    }
    if (entering.empty()) break;
    if (ns.arc_count() + entering.size() > opts.pair_cap) {
      throw CapacityError("wasserstein_p: restricted problem needs more than " + std::to_string(opts.pair_cap) + " arcs");
    }
    for (auto [i, j] : entering) add(i, j);
  }

  double total = 0.0;
  for (std::size_t a = 0; a < ns.arc_count(); ++a) {
    const double f = ns.flow(int(a));
    if (f <= 0.0) continue;
    const int i = ns.arc_source(int(a)), j = ns.arc_sink(int(a));
    const double d = (X[i] - Y[j]).norm();
    out.plan.push_back({i, j, f, d});
    total += f * cost(i, j);
    out.bottleneck = std::max(out.bottleneck, d);
  }
  std::sort(out.plan.begin(), out.plan.end(),
            [](const TransportArc& a, const TransportArc& c) { return a.src != c.src ? a.src < c.src : a.dst < c.dst; });
  out.p = p;
  out.cost_p = std::pow(std::max(total, 0.0), 1.0 / p);
  out.pivots = ns.pivots();
  return out;
}

namespace {

struct FlowCheck {
  bool feasible = false;
  std::vector<TransportArc> plan;
};

FlowCheck bottleneck_feasible(const DiscreteMeasure& mu, const std::vector<double>& b, const DiscreteMeasure& nu,
                              const CellIndex& index, double t, bool want_plan, std::size_t cap) {
  const int m = int(mu.size()), n = int(nu.size());
  std::size_t count = 0;
  for (int i = 0; i < m; ++i) index.within(mu.points[i], t, [&](int, double) { ++count; });
  if (count > cap) {
    throw CapacityError("wasserstein_inf: threshold network needs " + std::to_string(count) + " arcs (cap " +
                        std::to_string(cap) + ")");
  }
  const int s = m + n, sink = m + n + 1;
  MaxFlow mf(m + n + 2);
  for (int i = 0; i < m; ++i) mf.add_edge(s, i, mu.weights[i]);
  for (int j = 0; j < n; ++j) mf.add_edge(m + j, sink, b[j]);
  std::vector<std::pair<int, double>> arcs;  // edge id -> distance
  std::vector<int> ids;
  arcs.reserve(count);
  ids.reserve(count);
  for (int i = 0; i < m; ++i) {
    index.within(mu.points[i], t, [&](int j, double d) {
      ids.push_back(mf.add_edge(i, m + j, std::min(mu.weights[i], b[j])));
      arcs.push_back({j, d});
    });
  }
  const double total = std::accumulate(mu.weights.begin(), mu.weights.end(), 0.0);
  const double f = mf.run(s, sink, 1e-300);
  FlowCheck res;
  res.feasible = f >= total * (1.0 - 1e-10);
  if (want_plan && res.feasible) {
    for (std::size_t a = 0; a < ids.size(); ++a) {
      const double x = mf.flow(ids[a]);
      if (x > 0.0) res.plan.push_back({mf.from(ids[a]), arcs[a].first, x, arcs[a].second});
    }
  }
  return res;
}

}  // namespace

Coupling wasserstein_inf(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const TransportOptions& opts) {
  std::vector<double> b;
  check_inputs(mu, nu, opts.mass_tol, &b);
  const int m = int(mu.size()), n = int(nu.size());

  // lower bound: every atom has to reach its nearest partner
  double lb = 0.0;
  {
    const double cell = std::max(bbox_diagonal(mu, nu) / 64.0, 1e-12);
    CellIndex iy(nu.points, cell), ix(mu.points, cell);
    auto nearest = [&](const CellIndex& idx, const Vec3& x) {
      double best = std::numeric_limits<double>::infinity();
      for (double r = cell; std::isinf(best); r *= 2.0) idx.within(x, r, [&](int, double d) { best = std::min(best, d); });
      return best;
    };
    for (int i = 0; i < m; ++i) lb = std::max(lb, nearest(iy, mu.points[i]));
    for (int j = 0; j < n; ++j) lb = std::max(lb, nearest(ix, nu.points[j]));
  }

  const double diam = bbox_diagonal(mu, nu);
  auto feasible = [&](double t, bool plan) {
    CellIndex idx(nu.points, std::max(t, 1e-12));
    return bottleneck_feasible(mu, b, nu, idx, t, plan, opts.flow_arc_cap);
  };

  // bracket: lo infeasible (or the lower bound itself), hi feasible
  double lo = lb, hi = lb;
  if (!feasible(lb, false).feasible) {
    double step = std::max(lb, 1e-12 * std::max(diam, 1e-300));
    hi = lb + step;
    while (!feasible(hi, false).feasible) {
      lo = hi;
      step *= 2.0;
      hi = lb + step;
      if (hi > 2.0 * diam + 1.0) throw std::logic_error("wasserstein_inf: no feasible threshold");
    }
    while (hi - lo > 1e-13 * hi) {
      const double mid = 0.5 * (lo + hi);
      if (feasible(mid, false).feasible) hi = mid;
      else lo = mid;
    }
    // snap to the smallest feasible pairwise distance in (lo, hi]
    std::vector<double> cand;
    CellIndex idx(nu.points, std::max(hi, 1e-12));
    for (int i = 0; i < m; ++i) {
      idx.within(mu.points[i], hi, [&](int, double d) {
        if (d > lo) cand.push_back(d);
      });
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    std::size_t a = 0, z = cand.size();
    while (a < z) {
      const std::size_t mid = (a + z) / 2;
      if (feasible(cand[mid], false).feasible) z = mid;
      else a = mid + 1;
    }
    hi = a < cand.size() ? cand[a] : hi;
  }

  Coupling out;
  auto res = feasible(hi, true);
  out.plan = std::move(res.plan);
  std::sort(out.plan.begin(), out.plan.end(),
            [](const TransportArc& x, const TransportArc& y) { return x.src != y.src ? x.src < y.src : x.dst < y.dst; });
  for (const auto& arc : out.plan) out.bottleneck = std::max(out.bottleneck, arc.dist);
  out.p = std::numeric_limits<double>::infinity();
  out.cost_p = out.bottleneck;
  return out;
}

DiscreteMeasure quantize(const DensityField& field, std::size_t max_atoms, double threshold) {
  if (max_atoms < 1) throw CapacityError("quantize: max_atoms must be >= 1");
  const GridSpec& g = field.grid();
  const double total = field.total_mass();
  if (!(total > 0.0)) throw std::invalid_argument("quantize: empty field");
  field.require_probability();
  const double hv = g.cell_volume();
  const int max_dim = *std::max_element(g.dims.begin(), g.dims.end());
  for (int level = 0;; ++level) {
    const int bs = 1 << level;
    std::array<int, 3> nb{};
    for (int a = 0; a < 3; ++a) nb[a] = (g.dims[a] + bs - 1) / bs;
    std::vector<double> mass(std::size_t(nb[0]) * nb[1] * nb[2], 0.0);
    for (int k = 0; k < g.dims[2]; ++k)
      for (int j = 0; j < g.dims[1]; ++j)
        for (int i = 0; i < g.dims[0]; ++i) {
          const double v = field.values()[g.index(i, j, k)] * hv;
          if (v < threshold * total) continue;
          mass[std::size_t(i / bs) + std::size_t(nb[0]) * (j / bs + std::size_t(nb[1]) * (k / bs))] += v;
        }
    std::size_t count = 0;
    for (double x : mass) count += x > 0.0;
    if (count <= max_atoms) {
      DiscreteMeasure out;
      const double block = g.cell * bs;
      for (int k = 0; k < nb[2]; ++k)
        for (int j = 0; j < nb[1]; ++j)
          for (int i = 0; i < nb[0]; ++i) {
            const double x = mass[std::size_t(i) + std::size_t(nb[0]) * (j + std::size_t(nb[1]) * k)];
            if (x <= 0.0) continue;
            out.points.push_back(g.origin + block * Vec3(i + 0.5, j + 0.5, k + 0.5));
            out.weights.push_back(x);
          }
      const double s = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
      for (double& w : out.weights) w /= s;
      out.displacement_bound = block * std::sqrt(3.0) / 2.0;
      return out;
    }
    if (bs >= max_dim) {
      throw CapacityError("quantize: " + std::to_string(count) + " atoms remain after maximal coarsening");
    }
  }
}

double sobolev_w12_distance(const DensityField& f, const DensityField& g) {
  if (!(f.grid() == g.grid())) throw std::invalid_argument("sobolev_w12_distance: grid mismatch");
  const GridSpec& gs = f.grid();
  const auto P = gs.padded_dims();
  const std::size_t nreal = std::size_t(P[0]) * P[1] * P[2];
  const int hx = P[0] / 2 + 1;
  const std::size_t nspec = std::size_t(hx) * P[1] * P[2];
  double* in = fftw_alloc_real(nreal);
  fftw_complex* out = fftw_alloc_complex(nspec);
  std::fill(in, in + nreal, 0.0);
  const double hv = gs.cell_volume();
  for (int k = 0; k < gs.dims[2]; ++k)
    for (int j = 0; j < gs.dims[1]; ++j)
      for (int i = 0; i < gs.dims[0]; ++i) {
        const std::size_t idx = gs.index(i, j, k);
        in[i + std::size_t(P[0]) * (j + std::size_t(P[1]) * k)] = (f.values()[idx] - g.values()[idx]) * hv;
      }
  fftw_plan plan = fftw_plan_dft_r2c_3d(P[2], P[1], P[0], in, out, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  const double two_pi = 2.0 * std::numbers::pi;
  double acc = 0.0;
  for (int kz = 0; kz < P[2]; ++kz) {
    const int sz = kz <= P[2] / 2 ? kz : kz - P[2];
    const double wz = two_pi * sz / (P[2] * gs.cell);
    for (int ky = 0; ky < P[1]; ++ky) {
      const int sy = ky <= P[1] / 2 ? ky : ky - P[1];
      const double wy = two_pi * sy / (P[1] * gs.cell);
      for (int kx = 0; kx < hx; ++kx) {
        if (kx == 0 && ky == 0 && kz == 0) continue;
        const double wx = two_pi * kx / (P[0] * gs.cell);
        const std::size_t idx = kx + std::size_t(hx) * (ky + std::size_t(P[1]) * kz);
        const double a2 = out[idx][0] * out[idx][0] + out[idx][1] * out[idx][1];
        // half spectrum: interior x-modes stand for themselves and their conjugates
        const double mult = (kx == 0 || 2 * kx == P[0]) ? 1.0 : 2.0;
        acc += mult * a2 / (wx * wx + wy * wy + wz * wz);
      }
    }
  }
  fftw_free(in);
  fftw_free(out);
  const double volume = double(nreal) * hv;
  return std::sqrt(acc / volume);
}

void write_coupling_csv(std::ostream& os, const Coupling& c) {
  os << "src_idx,dst_idx,mass,dist\n" << std::setprecision(17);
  for (const auto& a : c.plan) os << a.src << ',' << a.dst << ',' << a.mass << ',' << a.dist << '\n';
}

void write_coupling_csv(const std::string& path, const Coupling& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_coupling_csv(out, c);
}

}  // namespace sedlab
