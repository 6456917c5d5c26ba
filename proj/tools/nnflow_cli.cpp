// Command-line front end: batch orchestration of solves, verification suites,
// and studies.  Subcommands:
//
//   admissible       exponent-admissibility check, exit 0 iff admissible
//   solve            run the continuation ladder from a JSON config
//   verify           run a named verification suite, exit 0 iff all checks pass
//   stability-study  solve under oscillatory forcing perturbations, tabulate
//                    distances to the unperturbed state (exploratory, no gate)
//   report           render a run's manifest + diagnostics as a per-rung table
//
// Exit codes: 0 success / admissible / all checks passed; 1 not admissible or
// failed checks; 2 bad usage, unknown suite, or invalid config; 3 solver
// failure (partial manifest still written).
//
// All solve outputs land inside the configured output directory, each file
// written atomically.  Diagnostics CSVs contain no timings, so reruns of an
// identical config produce bit-identical CSVs; wall-clock timings live in the
// manifest.  NNFLOW_THREADS caps the worker fan-out for independent solves in
// a study (a single ladder is inherently sequential).

#include <nnflow/analysis.hpp>
#include <nnflow/config.hpp>
#include <nnflow/io.hpp>
#include <nnflow/outer.hpp>
#include <nnflow/verify.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace nnflow;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int env_threads() {
  const char* s = std::getenv("NNFLOW_THREADS");
  if (s == nullptr) return 1;
  const int n = std::atoi(s);
  return n > 0 ? n : 1;
}

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

// ---------------------------------------------------------------------------
// admissible
// ---------------------------------------------------------------------------

int cmd_admissible(int d, double r, double gamma) {
  const AdmissibilityReport rep = admissible(d, r, gamma);
  std::printf("d=%d r=%g gamma=%g: %s (branch %s)\n", d, r, gamma,
              rep.admissible ? "admissible" : "not admissible", rep.branch.c_str());
  std::printf("  r_lower = %g\n", rep.r_lower);
  std::printf("  gamma_lower = %g\n", rep.gamma_lower);
  if (rep.admissible) {
    std::printf("  q1* = %g%s\n", rep.q1_star, rep.open_ended ? " (supremum, not attained)" : "");
    std::printf("  q2* = %g%s\n", rep.q2_star, rep.open_ended ? " (supremum, not attained)" : "");
  }
  return rep.admissible ? 0 : 1;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

struct RungRecord {
  json manifest_entry;
  std::vector<io::DiagnosticsRow> rows;
};

template <int Dim> struct SolveOutputs {
  std::vector<RungRecord> rungs;
  std::string status = "ok";
  int failed_rung = -1;
  std::string failure;
};

template <int Dim>
std::vector<io::DiagnosticsRow> rung_diagnostics(int rung_id, const LevelParams<Dim>& p,
                                                 const ScalarField<Dim>& rho,
                                                 const VectorField<Dim>& u,
                                                 const OuterReport& rep,
                                                 const VectorField<Dim>& f,
                                                 const VectorField<Dim>& g_force,
                                                 const std::vector<VectorField<Dim>>& battery) {
  std::vector<io::DiagnosticsRow> rows;
  auto add = [&](const char* name, double value) {
    rows.push_back({rung_id, p.eps, p.alpha, p.delta, p.eta, name, value});
  };
  add("outer_iterations", (double)rep.iterations);
  add("converged", rep.converged ? 1.0 : 0.0);
  add("final_update", rep.update_trace.empty() ? 0.0 : rep.update_trace.back());
  add("mass", mass_of(rho));
  add("mass_error_max", rep.mass_error_max);
  add("min_rho", rep.min_rho);
  add("momentum_iterations", (double)rep.last_momentum.iterations);
  add("momentum_residual", rep.last_momentum.final_residual);
  add("eps_grad_quantity", eps_gradient_quantity(rho, p.eps));
  add("energy_residual", energy_identity_residual(rho, u, p, f, g_force).rel_residual);
  add("energy_residual_main_text",
      energy_identity_residual(rho, u, p, f, g_force, EnergyIdentityForm::main_text).rel_residual);

  MomentumProblem<Dim> model;
  model.grid = rho.grid;
  if (p.hb) {
    model.kind = StressKind::herschel_bulkley;
    model.hb = p.hb->stress;
  } else {
    model.power = p.power;
  }
  add("weak_residual_max",
      weak_momentum_residual(rho, u, model, p.pressure, f, g_force, battery).max_normalized);
  return rows;
}

template <int Dim>
SolveOutputs<Dim> execute_ladder(const RunConfig& c, const Grid<Dim>& g, const VectorField<Dim>& f,
                                 const VectorField<Dim>& g_force,
                                 const std::filesystem::path& out_dir) {
  SolveOutputs<Dim> out;
  const auto battery = make_sine_battery<Dim>(g, 2);
  const auto t_run = std::chrono::steady_clock::now();
  double t_prev = 0.0;

  auto record = [&](int rung_id, const LevelParams<Dim>& p, const ScalarField<Dim>& rho,
                    const VectorField<Dim>& u, const OuterReport& rep,
                    std::optional<double> hb_eps_reg) {
    const double t_now = seconds_since(t_run);
    RungRecord rec;
    rec.rows = rung_diagnostics(rung_id, p, rho, u, rep, f, g_force, battery);
    if (hb_eps_reg)
      rec.rows.push_back({rung_id, p.eps, p.alpha, p.delta, p.eta, "hb_eps_reg", *hb_eps_reg});
    rec.manifest_entry = {{"rung_id", rung_id}, {"eps", p.eps},
                          {"alpha", p.alpha},   {"delta", p.delta},
                          {"eta", p.eta},       {"converged", rep.converged},
                          {"iterations", rep.iterations},
                          {"seconds", t_now - t_prev}};
    if (hb_eps_reg) rec.manifest_entry["hb_eps_reg"] = *hb_eps_reg;
    t_prev = t_now;
    if (c.dump_fields) {
      char rho_name[64], u_name[64];
      std::snprintf(rho_name, sizeof rho_name, "fields/rho_%03d.field", rung_id);
      std::snprintf(u_name, sizeof u_name, "fields/u_%03d.field", rung_id);
      io::write_field((out_dir / rho_name).string(), rho);
      io::write_field((out_dir / u_name).string(), u);
      rec.manifest_entry["rho_path"] = rho_name;
      rec.manifest_entry["u_path"] = u_name;
    }
    out.rungs.push_back(std::move(rec));
  };

  const LadderSchedule<Dim> sched = make_schedule<Dim>(c);
  std::vector<RungResult<Dim>> results;
  try {
    const std::function<void(int, const RungResult<Dim>&)> observer =
        [&](int k, const RungResult<Dim>& rr) {
          record(k, rr.params, rr.rho, rr.u, rr.report,
                 c.hb ? std::optional<double>(rr.params.hb->stress.eps_reg) : std::nullopt);
        };
    results = run_ladder(sched, g, f, g_force, observer);
  } catch (const LadderStop& stop) {
    out.status = "solver-failure";
    out.failed_rung = stop.failed_rung;
    out.failure = stop.what();
    return out;
  }

  // yield-stress runs descend the stress-regularization width from the final
  // rung, warm-started, then append the pointwise audits
  if (c.hb && !c.hb->eps_reg_tail.empty()) {
    LevelParams<Dim> p = results.back().params;
    int rung_id = (int)results.size();
    try {
      const HBResult<Dim> hb =
          solve_hb(p, c.hb->eps_reg_tail, g, f, g_force, &results.back().u);
      record(rung_id, p, hb.rho, hb.u, hb.report, c.hb->eps_reg_tail.back());
      auto& rows = out.rungs.back().rows;
      auto add = [&](const char* name, double value) {
        rows.push_back({rung_id, p.eps, p.alpha, p.delta, p.eta, name, value});
      };
      add("hb_max_p_norm", hb.max_p_norm);
      add("hb_max_stalled_s", hb.max_stalled_s);
      add("hb_stalled_cells", (double)hb.stalled_cells);
      add("hb_mass_rule_gap", std::abs(hb.mass - hb.mass_rule));
    } catch (const std::exception& ex) {
      out.status = "solver-failure";
      out.failed_rung = rung_id;
      out.failure = ex.what();
    }
  }
  return out;
}

template <int Dim> int run_solve(const RunConfig& c) {
  const Grid<Dim> g = make_grid<Dim>(c);
  const VectorField<Dim> f = sample_forcing(g, c.f);
  const VectorField<Dim> g_force = sample_forcing(g, c.g);
  const std::filesystem::path out_dir(c.out_dir);
  const auto t0 = std::chrono::steady_clock::now();

  const SolveOutputs<Dim> out = execute_ladder<Dim>(c, g, f, g_force, out_dir);

  std::vector<io::DiagnosticsRow> rows;
  json rung_entries = json::array();
  for (const auto& rec : out.rungs) {
    rows.insert(rows.end(), rec.rows.begin(), rec.rows.end());
    rung_entries.push_back(rec.manifest_entry);
  }
  io::write_diagnostics_csv((out_dir / "diagnostics.csv").string(), rows);

  json manifest;
  manifest["magic"] = "nnflow-manifest";
  manifest["version"] = 1;
  manifest["config_hash"] = hash_hex(config_hash(c));
  manifest["config"] = to_json(c);
  manifest["status"] = out.status;
  manifest["rungs"] = rung_entries;
  manifest["diagnostics_csv"] = "diagnostics.csv";
  manifest["total_seconds"] = seconds_since(t0);
  if (out.status != "ok") {
    manifest["failed_rung"] = out.failed_rung;
    manifest["failure"] = out.failure;
  }
  io::write_json((out_dir / "manifest.json").string(), manifest);

  if (out.status != "ok") {
    std::fprintf(stderr, "solve: %s (rung %d); partial manifest in %s\n", out.failure.c_str(),
                 out.failed_rung, c.out_dir.c_str());
    return 3;
  }
  std::printf("solve: %zu rungs, outputs in %s (config %s)\n", out.rungs.size(),
              c.out_dir.c_str(), hash_hex(config_hash(c)).c_str());
  return 0;
}

int cmd_solve(const std::string& config_path) {
  RunConfig c;
  try {
    c = config_from_json(io::read_json(config_path));
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "solve: invalid config: %s\n", ex.what());
    return 2;
  }
  return c.d == 2 ? run_solve<2>(c) : run_solve<3>(c);
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int cmd_verify(const std::string& suite) {
  std::vector<verify::CheckResult> results;
  try {
    results = verify::run_suite(suite);
  } catch (const std::invalid_argument& ex) {
    std::fprintf(stderr, "verify: %s\n", ex.what());
    std::fprintf(stderr, "known suites:");
    for (const auto& name : verify::suite_names()) std::fprintf(stderr, " %s", name.c_str());
    std::fprintf(stderr, "\n");
    return 2;
  }
  for (const auto& r : results)
    std::printf("%-34s %s  %6.2fs  %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.seconds,
                r.detail.c_str());
  const size_t passed = (size_t)std::count_if(results.begin(), results.end(),
                                              [](const verify::CheckResult& r) { return r.pass; });
  std::printf("%zu/%zu checks passed\n", passed, results.size());
  return verify::all_passed(results) ? 0 : 1;
}

// ---------------------------------------------------------------------------
// stability-study
// ---------------------------------------------------------------------------

template <int Dim>
VectorField<Dim> oscillatory_perturbation(const Grid<Dim>& g, int k) {
  // sin(2 pi k x_1 / L_1) in the first component: weakly null as k grows
  const double pi = 3.14159265358979323846;
  VectorField<Dim> e(g);
  if (k == 0) return e;
  for (int c = 0; c < g.cells(); ++c)
    e.v(c, 0) = std::sin(2.0 * pi * k * g.cell_center(c)[0] / g.extent[0]);
  return e;
}

template <int Dim> int run_stability(const RunConfig& c) {
  const Grid<Dim> g = make_grid<Dim>(c);
  const VectorField<Dim> f = sample_forcing(g, c.f);
  const VectorField<Dim> g_force = sample_forcing(g, c.g);
  const LadderSchedule<Dim> sched = make_schedule<Dim>(c);
  const auto t0 = std::chrono::steady_clock::now();

  const std::vector<int> ks = {0, 4, 8, 16};
  struct Member {
    int k;
    ScalarField<Dim> rho;
    VectorField<Dim> u;
  };
  auto solve_member = [&](int k) -> Member {
    VectorField<Dim> fk(g);
    fk.v = f.v + oscillatory_perturbation<Dim>(g, k).v;
    LadderSchedule<Dim> s = sched;
    auto results = run_ladder(s, g, fk, g_force);
    return Member{k, std::move(results.back().rho), std::move(results.back().u)};
  };

  // the family members are independent solves; fan out up to NNFLOW_THREADS
  const int workers = std::min<int>(env_threads(), (int)ks.size());
  std::vector<Member> members;
  members.reserve(ks.size());
  if (workers <= 1) {
    for (int k : ks) members.push_back(solve_member(k));
  } else {
    std::vector<std::future<Member>> slots;
    size_t next = 0;
    while (members.size() < ks.size()) {
      while (next < ks.size() && (int)slots.size() < workers)
        slots.push_back(std::async(std::launch::async, solve_member, ks[next++]));
      members.push_back(slots.front().get());
      slots.erase(slots.begin());
    }
    std::sort(members.begin(), members.end(),
              [](const Member& a, const Member& b) { return a.k < b.k; });
  }

  const Member& base = members.front(); // k = 0: the unperturbed problem
  const SymTensorField<Dim> Du0 = sym_grad(base.u);
  std::string csv = "k,name,value\n";
  char buf[128];
  std::vector<double> rho_gaps;
  for (const Member& m : members) {
    ScalarField<Dim> drho(g);
    drho.v = m.rho.v - base.rho.v;
    VectorField<Dim> du(g);
    du.v = m.u.v - base.u.v;
    SymTensorField<Dim> dDu = sym_grad(m.u);
    dDu.v -= Du0.v;
    const double rho_gap = lebesgue_norm(drho, 2.0);
    const double u_gap = lebesgue_norm(du, 2.0);
    const double Du_gap = lebesgue_norm(dDu, 2.0);
    rho_gaps.push_back(rho_gap);
    std::snprintf(buf, sizeof buf, "%d,rho_l2_gap,%.17g\n", m.k, rho_gap);
    csv += buf;
    std::snprintf(buf, sizeof buf, "%d,u_l2_gap,%.17g\n", m.k, u_gap);
    csv += buf;
    std::snprintf(buf, sizeof buf, "%d,du_l2_gap,%.17g\n", m.k, Du_gap);
    csv += buf;
    std::printf("k=%2d: |rho_k - rho|_L2 = %.6e  |u_k - u|_L2 = %.6e  |Du_k - Du|_L2 = %.6e\n",
                m.k, rho_gap, u_gap, Du_gap);
  }
  const std::filesystem::path out_dir(c.out_dir);
  io::atomic_write_bytes((out_dir / "stability.csv").string(), csv);

  bool monotone = true;
  for (size_t i = 2; i < rho_gaps.size(); ++i)
    if (rho_gaps[i] > rho_gaps[i - 1]) monotone = false;

  json manifest;
  manifest["magic"] = "nnflow-study-manifest";
  manifest["version"] = 1;
  manifest["config_hash"] = hash_hex(config_hash(c));
  manifest["config"] = to_json(c);
  manifest["status"] = "ok";
  manifest["wavenumbers"] = ks;
  manifest["monotone_density_gaps"] = monotone;
  manifest["metrics_csv"] = "stability.csv";
  manifest["total_seconds"] = seconds_since(t0);
  io::write_json((out_dir / "manifest.json").string(), manifest);

  std::printf("density gaps %s along k; table in %s\n",
              monotone ? "decrease monotonically" : "are not monotone",
              (out_dir / "stability.csv").string().c_str());
  return 0;
}

int cmd_stability(const std::string& config_path) {
  RunConfig c;
  try {
    c = config_from_json(io::read_json(config_path));
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "stability-study: invalid config: %s\n", ex.what());
    return 2;
  }
  try {
    return c.d == 2 ? run_stability<2>(c) : run_stability<3>(c);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "stability-study: %s\n", ex.what());
    return 3;
  }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::string& manifest_path) {
  json manifest;
  try {
    manifest = io::read_json(manifest_path);
    if (manifest.value("magic", "") != "nnflow-manifest")
      throw std::runtime_error("not a run manifest");
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "report: %s: %s\n", manifest_path.c_str(), ex.what());
    return 2;
  }

  // diagnostics: map (rung_id, name) -> value
  std::map<std::pair<int, std::string>, double> diag;
  const auto csv_path = std::filesystem::path(manifest_path).parent_path() /
                        manifest.value("diagnostics_csv", "diagnostics.csv");
  try {
    std::istringstream in(io::read_bytes(csv_path.string()));
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
      // rung_id,eps,alpha,delta,eta,name,value
      std::istringstream row(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(row, cell, ',')) cells.push_back(cell);
      if (cells.size() != 7) continue;
      diag[{std::stoi(cells[0]), cells[5]}] = std::stod(cells[6]);
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "report: cannot read diagnostics: %s\n", ex.what());
    return 2;
  }

  std::printf("run %s  status=%s  total %.1fs\n", manifest.value("config_hash", "?").c_str(),
              manifest.value("status", "?").c_str(), manifest.value("total_seconds", 0.0));
  std::printf("%5s %9s %9s %9s %9s %5s %5s %12s %12s %12s %12s\n", "rung", "eps", "alpha",
              "delta", "eta", "conv", "iter", "update", "mass_err", "energy_res", "weak_res");
  for (const auto& r : manifest["rungs"]) {
    const int id = r.value("rung_id", 0);
    auto get = [&](const char* name) {
      const auto it = diag.find({id, name});
      return it == diag.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
    };
    std::printf("%5d %9.2e %9.2e %9.2e %9.2e %5s %5d %12.3e %12.3e %12.3e %12.3e\n", id,
                r.value("eps", 0.0), r.value("alpha", 0.0), r.value("delta", 0.0),
                r.value("eta", 0.0), r.value("converged", false) ? "yes" : "NO",
                r.value("iterations", 0), get("final_update"), get("mass_error_max"),
                get("energy_residual"), get("weak_residual_max"));
  }
  if (manifest.contains("failed_rung"))
    std::printf("FAILED at rung %d: %s\n", manifest.value("failed_rung", -1),
                manifest.value("failure", "").c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"steady compressible power-law / yield-stress flow: solver and verification"};
  app.require_subcommand(1);

  int adm_d = 2;
  double adm_r = 2.0, adm_gamma = 2.0;
  auto* adm = app.add_subcommand("admissible", "check exponent admissibility");
  adm->add_option("-d,--dim", adm_d, "spatial dimension (2 or 3)")->required();
  adm->add_option("-r,--stress-exponent", adm_r, "stress growth exponent r")->required();
  adm->add_option("--gamma", adm_gamma, "pressure-law exponent gamma")->required();

  std::string solve_config;
  auto* solve = app.add_subcommand("solve", "run the continuation ladder from a JSON config");
  solve->add_option("-c,--config", solve_config, "path to run config JSON")->required();

  std::string verify_suite = "all";
  auto* verify = app.add_subcommand("verify", "run a verification suite");
  verify->add_option("suite", verify_suite, "suite name, or 'all'");

  std::string stability_config;
  auto* stability =
      app.add_subcommand("stability-study", "tabulate state distances under oscillatory forcing");
  stability->add_option("-c,--config", stability_config, "path to run config JSON")->required();

  std::string report_manifest;
  auto* report = app.add_subcommand("report", "render a per-rung table from a run manifest");
  report->add_option("manifest", report_manifest, "path to manifest.json")->required();

  CLI11_PARSE(app, argc, argv);

  if (adm->parsed()) return cmd_admissible(adm_d, adm_r, adm_gamma);
  if (solve->parsed()) return cmd_solve(solve_config);
  if (verify->parsed()) return cmd_verify(verify_suite);
  if (stability->parsed()) return cmd_stability(stability_config);
  if (report->parsed()) return cmd_report(report_manifest);
  return 2;
}
