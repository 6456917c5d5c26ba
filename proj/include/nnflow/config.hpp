#pragma once

// Run configuration: a single JSON document describing the problem, the
// continuation schedule, the solver controls, and the output layout.  The
// parse -> serialize -> parse round trip is the identity on the canonical
// form, and the canonical serialization is what gets hashed into run ids.

#include "nnflow/constitutive.hpp"
#include "nnflow/fields.hpp"
#include "nnflow/grid.hpp"
#include "nnflow/outer.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnflow {

// Body forces: either a constant vector or a named analytic preset sampled
// onto the grid.
struct ForcingSpec {
  std::string preset = "uniform"; // "uniform" | "shear" | "vortex-forcing"
  std::vector<double> amplitude{0.0, 0.0}; // per-component scale (size d)

  void validate(int d) const {
    if (preset != "uniform" && preset != "shear" && preset != "vortex-forcing")
      throw std::invalid_argument("ForcingSpec: unknown preset '" + preset + "'");
    if ((int)amplitude.size() != d)
      throw std::invalid_argument("ForcingSpec: amplitude needs one entry per dimension");
    for (double a : amplitude)
      if (!std::isfinite(a)) throw std::invalid_argument("ForcingSpec: non-finite amplitude");
  }
};

template <int Dim>
VectorField<Dim> sample_forcing(const Grid<Dim>& g, const ForcingSpec& spec) {
  spec.validate(Dim);
  const double pi = 3.14159265358979323846;
  VectorField<Dim> f(g);
  for (int c = 0; c < g.cells(); ++c) {
    const auto x = g.cell_center(c);
    for (int a = 0; a < Dim; ++a) {
      double v = spec.amplitude[a];
      if (spec.preset == "shear") {
        // amplitude modulated by the transverse coordinate
        const int b = (a + 1) % Dim;
        v *= std::sin(pi * x[b] / g.extent[b]);
      } else if (spec.preset == "vortex-forcing") {
        // solenoidal-looking swirl pattern
        const int b = (a + 1) % Dim;
        const double s = (a % 2 == 0) ? 1.0 : -1.0;
        v *= s * std::sin(2.0 * pi * x[a] / g.extent[a]) * std::cos(pi * x[b] / g.extent[b]);
      }
      f.v(c, a) = v;
    }
  }
  return f;
}

struct RunConfig {
  // problem block
  int d = 2;
  std::vector<double> extent = {1.0, 1.0};
  std::vector<int> n = {32, 32};
  double M = 1.0;
  double gamma = 2.0;
  double a = 1.0;
  double r = 2.0;
  double mu0 = 1.0;
  double lambda0 = 0.0;
  double q = 4.0;
  ForcingSpec f;
  ForcingSpec g;

  // ladder block
  double alpha0 = 1e-1, delta0 = 1e-1, eta0 = 1e-1, eps0 = 3e-1;
  int joint_rungs = 3;
  std::vector<double> eps_tail = {1e-1, 3e-2};
  double floor_ade = 1e-8;

  // hb block (optional)
  struct HBConfig {
    double tau_star = 1.0;
    double nu = 1.0;
    double r = 1.8;
    double eps_reg0 = 1e-1;
    std::vector<double> eps_reg_tail = {1e-2, 1e-3};
    double alpha_hb = 1.0;
    double beta = 0.0;
  };
  std::optional<HBConfig> hb;

  // solver block
  double outer_tol = 1e-8;
  int outer_max = 500;
  double theta = 0.5;
  double momentum_tol = 1e-9;
  int momentum_max = 200;
  std::uint64_t seed = 0x6e6e666c6f77ULL;

  // output block
  std::string out_dir = "out";
  bool dump_fields = true;

  void validate() const {
    if (d != 2 && d != 3) throw std::invalid_argument("RunConfig: d must be 2 or 3");
    if ((int)extent.size() != d || (int)n.size() != d)
      throw std::invalid_argument("RunConfig: extent/n must have d entries");
    if (!hb && !admissible(d, r, gamma).admissible)
      throw std::invalid_argument("RunConfig: (d, r, gamma) outside the admissible set");
    f.validate(d);
    g.validate(d);
    if (!(q > d)) throw std::invalid_argument("RunConfig: q must exceed d");
  }
};

namespace detail {

inline nlohmann::json forcing_json(const ForcingSpec& s) {
  return nlohmann::json{{"preset", s.preset}, {"amplitude", s.amplitude}};
}

inline ForcingSpec forcing_from_json(const nlohmann::json& j) {
  ForcingSpec s;
  s.preset = j.value("preset", "uniform");
  s.amplitude = j.at("amplitude").get<std::vector<double>>();
  return s;
}

} // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["problem"] = {{"d", c.d},         {"extent", c.extent}, {"n", c.n},
                  {"M", c.M},         {"gamma", c.gamma},   {"a", c.a},
                  {"r", c.r},         {"mu0", c.mu0},       {"lambda0", c.lambda0},
                  {"q", c.q},         {"f", detail::forcing_json(c.f)},
                  {"g", detail::forcing_json(c.g)}};
  j["ladder"] = {{"alpha0", c.alpha0},   {"delta0", c.delta0}, {"eta0", c.eta0},
                 {"eps0", c.eps0},       {"joint_rungs", c.joint_rungs},
                 {"eps_tail", c.eps_tail}, {"floor_ade", c.floor_ade}};
  if (c.hb)
    j["hb"] = {{"tau_star", c.hb->tau_star}, {"nu", c.hb->nu},
               {"r", c.hb->r},               {"eps_reg0", c.hb->eps_reg0},
               {"eps_reg_tail", c.hb->eps_reg_tail},
               {"alpha_hb", c.hb->alpha_hb}, {"beta", c.hb->beta}};
  j["solver"] = {{"outer_tol", c.outer_tol},       {"outer_max", c.outer_max},
                 {"theta", c.theta},               {"momentum_tol", c.momentum_tol},
                 {"momentum_max", c.momentum_max}, {"seed", c.seed}};
  j["output"] = {{"dir", c.out_dir}, {"dump_fields", c.dump_fields}};
  return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  const auto& p = j.at("problem");
  c.d = p.at("d").get<int>();
  c.extent = p.at("extent").get<std::vector<double>>();
  c.n = p.at("n").get<std::vector<int>>();
  c.M = p.value("M", 1.0);
  c.gamma = p.at("gamma").get<double>();
  c.a = p.value("a", 1.0);
  c.r = p.at("r").get<double>();
  c.mu0 = p.value("mu0", 1.0);
  c.lambda0 = p.value("lambda0", 0.0);
  c.q = p.value("q", 4.0);
  c.f = detail::forcing_from_json(p.at("f"));
  c.g = detail::forcing_from_json(p.at("g"));
  const auto& l = j.at("ladder");
  c.alpha0 = l.value("alpha0", 1e-1);
  c.delta0 = l.value("delta0", 1e-1);
  c.eta0 = l.value("eta0", 1e-1);
  c.eps0 = l.value("eps0", 3e-1);
  c.joint_rungs = l.value("joint_rungs", 3);
  c.eps_tail = l.value("eps_tail", std::vector<double>{});
  c.floor_ade = l.value("floor_ade", 1e-8);
  if (j.contains("hb")) {
    const auto& h = j.at("hb");
    RunConfig::HBConfig hb;
    hb.tau_star = h.value("tau_star", 1.0);
    hb.nu = h.value("nu", 1.0);
    hb.r = h.value("r", 1.8);
    hb.eps_reg0 = h.value("eps_reg0", 1e-1);
    hb.eps_reg_tail = h.value("eps_reg_tail", std::vector<double>{});
    hb.alpha_hb = h.value("alpha_hb", 1.0);
    hb.beta = h.value("beta", 0.0);
    c.hb = hb;
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    c.outer_tol = s.value("outer_tol", 1e-8);
    c.outer_max = s.value("outer_max", 500);
    c.theta = s.value("theta", 0.5);
    c.momentum_tol = s.value("momentum_tol", 1e-9);
    c.momentum_max = s.value("momentum_max", 200);
    c.seed = s.value("seed", (std::uint64_t)0x6e6e666c6f77ULL);
  }
  if (j.contains("output")) {
    c.out_dir = j.at("output").value("dir", "out");
    c.dump_fields = j.at("output").value("dump_fields", true);
  }
  c.validate();
  return c;
}

// FNV-1a over the canonical serialization; stable across runs of one build.
inline std::uint64_t config_hash(const RunConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Materialize the grid and schedule for a given dimension.
template <int Dim> Grid<Dim> make_grid(const RunConfig& c) {
  if (c.d != Dim) throw std::invalid_argument("make_grid: dimension mismatch");
  std::array<int, Dim> n{};
  std::array<double, Dim> extent{};
  for (int a = 0; a < Dim; ++a) {
    n[a] = c.n[a];
    extent[a] = c.extent[a];
  }
  return Grid<Dim>(n, extent, false);
}

template <int Dim> LevelParams<Dim> make_start_params(const RunConfig& c) {
  LevelParams<Dim> p;
  p.alpha = c.alpha0;
  p.delta = c.delta0;
  p.eps = c.eps0;
  p.eta = c.eta0;
  p.q = c.q;
  p.M = c.M;
  p.pressure = PressureLaw{c.a, c.gamma};
  p.power = PowerLawParams{c.mu0, c.lambda0, c.r};
  p.outer_tol = c.outer_tol;
  p.outer_max = c.outer_max;
  p.theta = c.theta;
  p.momentum_tol = c.momentum_tol;
  p.momentum_max = c.momentum_max;
  if (c.hb) {
    typename LevelParams<Dim>::HBBlock hb;
    hb.stress = HBRegParams{c.hb->tau_star, c.hb->nu, c.hb->r, c.hb->eps_reg0};
    hb.alpha_hb = c.hb->alpha_hb;
    hb.beta = c.hb->beta;
    p.hb = std::move(hb);
  }
  return p;
}

template <int Dim> LadderSchedule<Dim> make_schedule(const RunConfig& c) {
  return LadderSchedule<Dim>::joint_then_eps(make_start_params<Dim>(c), c.joint_rungs, c.eps_tail,
                                             c.floor_ade);
}

} // namespace nnflow
