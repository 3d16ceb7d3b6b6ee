#include <sedlab/lab.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sedlab {

namespace {

namespace pt = boost::property_tree;

// section -> keys; anything else in the file is rejected
const std::map<std::string, std::set<std::string>> kKnown = {
    {"setup",
     {"blob_shape", "blob_radius", "blob_center", "gravity", "t_end", "dt", "output_stride", "atoms_per_particle", "seed", "stats_q",
      "wp_every_output", "wp_at_end", "with_effective", "pair_cap"}},
    {"grid", {"center", "side", "n"}},
    {"sweep", {"N_values", "theta", "phi0", "phi", "model"}},
    {"output", {"dir"}},
};

Vec3 parse_vec3(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  Vec3 v;
  if (!(is >> v[0] >> v[1] >> v[2])) throw std::invalid_argument("config: " + key + " needs three numbers");
  std::string rest;
  if (is >> rest) throw std::invalid_argument("config: " + key + " has trailing text '" + rest + "'");
  return v;
}

std::vector<int> parse_ints(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  std::vector<int> out;
  int v;
  while (is >> v) out.push_back(v);
  if (!is.eof()) throw std::invalid_argument("config: " + key + " must be a list of integers");
  return out;
}

}  // namespace

SweepPlan parse_sweep_plan(std::istream& is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = kKnown.find(section);
    if (it == kKnown.end() || body.empty()) throw std::invalid_argument("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw std::invalid_argument("config: unknown key " + section + "." + key);
    }
  }

  SweepPlan plan;
  ExperimentSetup& s = plan.setup;
  try {
    const auto shape = tree.get<std::string>("setup.blob_shape", "polynomial");
    if (shape == "polynomial") s.blob_shape = BlobShape::kPolynomial;
    else if (shape == "uniform") s.blob_shape = BlobShape::kUniform;
    else throw std::invalid_argument("config: setup.blob_shape must be polynomial or uniform, got " + shape);
    s.blob_radius = tree.get("setup.blob_radius", s.blob_radius);
    if (auto v = tree.get_optional<std::string>("setup.blob_center")) s.blob_center = parse_vec3("setup.blob_center", *v);
    if (auto v = tree.get_optional<std::string>("setup.gravity")) s.gravity = parse_vec3("setup.gravity", *v);
    s.t_end = tree.get("setup.t_end", s.t_end);
    s.dt = tree.get("setup.dt", s.dt);
    s.output_stride = tree.get("setup.output_stride", s.output_stride);
    s.atoms_per_particle = tree.get("setup.atoms_per_particle", s.atoms_per_particle);
    s.seed = tree.get("setup.seed", s.seed);
    s.stats_q = tree.get("setup.stats_q", s.stats_q);
    s.wp_every_output = tree.get("setup.wp_every_output", s.wp_every_output);
    s.wp_at_end = tree.get("setup.wp_at_end", s.wp_at_end);
    s.with_effective = tree.get("setup.with_effective", s.with_effective);
    s.transport.pair_cap = tree.get("setup.pair_cap", s.transport.pair_cap);

    Vec3 center = s.grid.origin + 0.5 * s.grid.extent();
    if (auto v = tree.get_optional<std::string>("grid.center")) center = parse_vec3("grid.center", *v);
    const double side = tree.get("grid.side", s.grid.extent()[0]);
    const int n = tree.get("grid.n", s.grid.dims[0]);
    if (n < 1 || !(side > 0.0)) throw std::invalid_argument("config: grid.n and grid.side must be positive");
    s.grid = GridSpec::cube(center, side, n);

    if (auto v = tree.get_optional<std::string>("sweep.N_values")) plan.N_values = parse_ints("sweep.N_values", *v);
    plan.theta = tree.get("sweep.theta", plan.theta);
    if (auto v = tree.get_optional<double>("sweep.phi0")) plan.phi0 = *v;
    if (auto v = tree.get_optional<double>("sweep.phi")) plan.phi = *v;
    plan.model = model_from_string(tree.get<std::string>("sweep.model", "MF0"));
    plan.output_dir = tree.get("output.dir", plan.output_dir);
  } catch (const pt::ptree_bad_data& e) {
    throw std::invalid_argument(std::string("config: bad value: ") + e.what());
  }
  plan.validate();
  return plan;
}

SweepPlan load_sweep_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  return parse_sweep_plan(in);
}

std::string default_config_text() {
  return R"(# sedlab sweep configuration; every key is optional and shown with its default.

[setup]
# initial density: polynomial blob or uniform ball of this radius and centre
blob_shape = polynomial
blob_radius = 2
blob_center = 0 0 0
gravity = 0 0 -16
t_end = 0.5
dt = 0.02
# output every this many steps
output_stride = 5
# tracer atoms per particle when quantising the initial density
atoms_per_particle = 8
seed = 1
# exponent q in lambda_q
stats_q = 1
# W1/W2 at every output (otherwise only first and last)
wp_every_output = false
# W1/W2 at the last output
wp_at_end = true
# also evolve the effective-viscosity system
with_effective = true
# arc cap of the restricted transport problem
pair_cap = 50000000

[grid]
center = 0 0 -0.6
side = 6.4
n = 64

[sweep]
N_values = 512 1024 2048 4096
# phi = phi0 * N^-theta; phi0 defaults to 0.2 * 4096^theta / log 4096
theta = 0.5
# phi0 =
# fixed phi for every N, overrides the schedule
# phi =
# MF0, MF1 or MF1C
model = MF0

[output]
dir = out
)";
}

}  // namespace sedlab
