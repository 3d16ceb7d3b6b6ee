#include <sedlab/microdynamics.hpp>

#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace sedlab {

namespace {

void check_pair(const Vec3& d, std::size_t i, std::size_t j) {
  if (!(d.squaredNorm() >= kMinSeparation * kMinSeparation)) {
    throw DomainError("particles " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
  }
}

struct Acc3 {
  detail::Neumaier c[3];
  void add(const Vec3& v) {
    c[0].add(v[0]);
    c[1].add(v[1]);
    c[2].add(v[2]);
  }
  Vec3 sum() const { return {c[0].sum(), c[1].sum(), c[2].sum()}; }
};

// (1/N) Σ_{j≠i} Φ(Xᵢ−Xⱼ)g for every i.
std::vector<Vec3> stokeslet_sums(const ParticleConfiguration& cfg) {
  const auto& x = cfg.positions;
  const std::size_t n = x.size();
  const Vec3 g = cfg.setup.gravity;
  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Acc3 acc;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec3 d = x[i] - x[j];
      check_pair(d, i, j);
      acc.add(detail::oseen_apply(d, g));
    }
    out[i] = acc.sum() / double(n);
  }
  return out;
}

}  // namespace

std::vector<Vec3> velocities_mf0(const ParticleConfiguration& cfg) {
  std::vector<Vec3> v = stokeslet_sums(cfg);
  const Vec3 self = cfg.setup.self_drift();
  for (auto& vi : v) vi += self;
  return v;
}

std::vector<std::array<double, 6>> ambient_strains(const ParticleConfiguration& cfg) {
  const auto& x = cfg.positions;
  const std::size_t n = x.size();
  const Vec3 g = cfg.setup.gravity;
  std::vector<std::array<double, 6>> s(n);
  for (std::size_t j = 0; j < n; ++j) {
    detail::Neumaier acc[6];
    double e[6];
    for (std::size_t k = 0; k < n; ++k) {
      if (k == j) continue;
      const Vec3 d = x[j] - x[k];
      check_pair(d, j, k);
      detail::stokeslet_strain6(d, g, e);
      for (int c = 0; c < 6; ++c) acc[c].add(e[c]);
    }
    for (int c = 0; c < 6; ++c) s[j][c] = acc[c].sum() / double(n);
  }
  return s;
}

std::vector<Vec3> velocities_mf1(const ParticleConfiguration& cfg) {
  std::vector<Vec3> v = velocities_mf0(cfg);
  const double phi = cfg.setup.volume_fraction();
  if (phi == 0.0) return v;
  const auto s = ambient_strains(cfg);
  const auto& x = cfg.positions;
  const std::size_t n = x.size();
  const double pref = 5.0 * phi / double(n);
  for (std::size_t i = 0; i < n; ++i) {
    Acc3 acc;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      acc.add(detail::stresslet_apply6(x[i] - x[j], s[j].data()));
    }
    v[i] += pref * acc.sum();
  }
  return v;
}

std::vector<Vec3> velocities_mf1c(const ParticleConfiguration& cfg, const VelocityField& correction) {
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    if (!correction.grid().contains(cfg.positions[i])) {
      throw std::domain_error("velocities_mf1c: particle " + std::to_string(i) + " outside the correction field");
    }
  }
  std::vector<Vec3> v = velocities_mf0(cfg);
  for (std::size_t i = 0; i < cfg.size(); ++i) v[i] += correction.interpolate(cfg.positions[i]);
  return v;
}

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kMF0: return "MF0";
    case ModelKind::kMF1: return "MF1";
    case ModelKind::kMF1C: return "MF1C";
  }
  return "?";
}

ModelKind model_from_string(const std::string& s) {
  if (s == "MF0" || s == "mf0") return ModelKind::kMF0;
  if (s == "MF1" || s == "mf1") return ModelKind::kMF1;
  if (s == "MF1C" || s == "mf1c") return ModelKind::kMF1C;
  throw std::invalid_argument("unknown velocity model '" + s + "'");
}

double default_time_step(const ParticleConfiguration& cfg, const std::vector<Vec3>& v) {
  double vmax = 0.0;
  for (const auto& vi : v) vmax = std::max(vmax, vi.norm());
  const double dmin = min_distance(cfg.positions);
  if (vmax == 0.0 || !std::isfinite(dmin)) return 0.05;
  return std::min(0.05, 0.1 * dmin / vmax);
}

SimulationTrace integrate(const ParticleConfiguration& cfg0, const VelocityModel& model, double t_end, double dt,
                          const IntegrateOptions& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be > 0");
  if (!(t_end >= 0.0)) throw std::invalid_argument("integrate: t_end must be >= 0");
  if (model.kind == ModelKind::kMF1C && !model.correction) {
    throw std::invalid_argument("integrate: MF1C model has no correction field attached");
  }
  cfg0.validate();
  const std::size_t n = cfg0.size();
  const double contact = 2.0 * cfg0.setup.radius * (1.0 + 1e-6);
  const int steps = t_end > 0.0 ? int(std::ceil(t_end / dt - 1e-9)) : 0;
  const double h = steps > 0 ? t_end / steps : 0.0;
  const int stride = std::max(1, opts.output_stride);

  VelocityField field;
  double next_refresh = 0.0;
  auto rhs = [&](const ParticleConfiguration& c) -> std::vector<Vec3> {
    switch (model.kind) {
      case ModelKind::kMF0: return velocities_mf0(c);
      case ModelKind::kMF1: return velocities_mf1(c);
      case ModelKind::kMF1C: return velocities_mf1c(c, field);
    }
    throw std::logic_error("integrate: unknown model");
  };

  SimulationTrace trace;
  auto record = [&](const ParticleConfiguration& c) {
    trace.times.push_back(c.time);
    trace.snapshots.push_back(c);
    if (n >= 2) {
      trace.stats.push_back(compute_stats(c, opts.stats_q));
    } else {
      ConfigurationStats st;
      st.d_min = std::numeric_limits<double>::infinity();
      trace.stats.push_back(st);
    }
    double gap = 0.0;
    if (opts.record_model_gap && n >= 2) {
      const auto v0 = velocities_mf0(c);
      const auto v1 = velocities_mf1(c);
      for (std::size_t i = 0; i < n; ++i) gap = std::max(gap, (v1[i] - v0[i]).norm());
    }
    trace.model_gap.push_back(gap);
  };

  ParticleConfiguration cur = cfg0;
  record(cur);
  ParticleConfiguration stage = cur;
  for (int s = 1; s <= steps; ++s) {
    if (model.kind == ModelKind::kMF1C && cur.time >= next_refresh - 1e-12) {
      field = model.correction(cur.time, cur);
      next_refresh = cur.time + std::max(model.refresh_interval, 0.0);
    }
    const auto k1 = rhs(cur);
    for (std::size_t i = 0; i < n; ++i) stage.positions[i] = cur.positions[i] + 0.5 * h * k1[i];
    const auto k2 = rhs(stage);
    for (std::size_t i = 0; i < n; ++i) stage.positions[i] = cur.positions[i] + 0.5 * h * k2[i];
    const auto k3 = rhs(stage);
    for (std::size_t i = 0; i < n; ++i) stage.positions[i] = cur.positions[i] + h * k3[i];
    const auto k4 = rhs(stage);
    for (std::size_t i = 0; i < n; ++i) {
      cur.positions[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!cur.positions[i].allFinite()) {
        throw std::runtime_error("integrate: non-finite position for particle " + std::to_string(i) + " at t=" +
                                 std::to_string(s * h));
      }
    }
    cur.time = s * h;
    if (n >= 2) {
      std::size_t a = 0, b = 0;
      const double d = min_distance(cur.positions, &a, &b);
      if (d <= contact) throw ContactError(cur.time, a, b, d);
    }
    if (s % stride == 0 || s == steps) record(cur);
  }
  return trace;
}

void write_trace_csv(std::ostream& os, const SimulationTrace& trace) {
  os << "t,i,x,y,z,dmin,alpha2,alpha3,model_gap\n" << std::setprecision(17);
  for (std::size_t s = 0; s < trace.times.size(); ++s) {
    const auto& c = trace.snapshots[s];
    const auto& st = trace.stats[s];
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& p = c.positions[i];
      os << trace.times[s] << ',' << i << ',' << p[0] << ',' << p[1] << ',' << p[2] << ',' << st.d_min << ','
         << st.alpha[1] << ',' << st.alpha[2] << ',' << trace.model_gap[s] << '\n';
    }
  }
}

void write_trace_csv(const std::string& path, const SimulationTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_trace_csv(out, trace);
}

}  // namespace sedlab
