#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dkg/io.hpp"
#include "dkg/shooting.hpp"

#ifndef DKG_VERSION
#define DKG_VERSION "dev"
#endif

using namespace dkg;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options that form the resolved parameter set: each one is a CLI flag and a manifest key.
class Registry {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T& var, const std::string& desc) {
    CLI::Option* o = app->add_option(flag, var, desc)->capture_default_str();
    push(o, flag, var);
    return o;
  }
  CLI::Option* flag(CLI::App* app, const std::string& flag, bool& var, const std::string& desc) {
    CLI::Option* o = app->add_flag(flag, var, desc);
    push(o, flag, var);
    return o;
  }

  json to_json() const {
    json j = json::object();
    for (const Entry& e : entries_) j[e.key] = e.get();
    return j;
  }

  // Values from a config file, unless the flag was given on the command line.
  void load(const json& j) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const Entry* e = find(it.key());
      if (!e) throw UsageError("unknown config key " + it.key());
      if (e->opt->count() > 0) continue;
      try {
        e->set(it.value());
      } catch (const json::exception&) {
        throw UsageError("bad value for config key " + it.key());
      }
    }
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* opt;
    std::function<json()> get;
    std::function<void(const json&)> set;
  };
  std::vector<Entry> entries_;

  template <class T>
  void push(CLI::Option* o, const std::string& flag, T& var) {
    std::string key = flag.substr(flag.find_first_not_of('-'));
    std::replace(key.begin(), key.end(), '-', '_');
    entries_.push_back({key, o, [&var] { return json(var); }, [&var](const json& v) { var = v.get<T>(); }});
  }
  const Entry* find(const std::string& k) const {
    for (const Entry& e : entries_)
      if (e.key == k) return &e;
    return nullptr;
  }
};

struct Opts {
  // model
  int d = 1;
  double p = 3.0, alpha = 1.0;
  double rmax = 40, tol = 1e-10;
  std::string gs_file;
  int n_grid = 4096;
  // interaction table
  double r_lo = 2, r_hi = 25, dr = 0.05;
  // configuration
  std::string name = "pair_alternating";
  std::string cfg_name;
  int dim = 0;
  bool validate = false, table = false, same_sign = false;
  // reduced
  std::string mode = "first";
  std::string law = "kernel";
  double law_A = 1, law_m = 0;
  double r0 = 10, t_end = 1000;
  int per_decade = 40;
  bool fit = false;
  double fit_lo = 1e4;
  // field
  int n = 1024;
  double L = 0, dt = 0;
  int order = 6;
  double output_every = 0.1, delta = 0.1, delta0 = 0.1, bracket = 0, mu = 0;
  std::vector<double> a_plus;
  double snapshot_every = 0;
  bool allow_inadmissible = false;
  double checkpoint_every = 1, restart_margin = 10;
  int max_bisect = 60, max_bisect_inner = 30, max_segments = 12;
  double compare_lo = 5;
  // audit
  std::vector<double> R = {8, 10, 12, 14, 16};
  std::string history;
  int trials = 6;
  unsigned seed = 1;
  // io
  std::string out, config;
};

struct Run {
  fs::path dir;
  RunManifest m;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  fs::path file(const std::string& name) {
    m.outputs[name] = nullptr;
    return dir / name;
  }
  void finish() {
    for (auto it = m.outputs.begin(); it != m.outputs.end(); ++it) it.value() = file_digest(dir / it.key());
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(dir / "manifest.json", m.to_json());
  }
};

void add_model(CLI::App* s, Registry& r, Opts& o, bool with_gs = true) {
  r.add(s, "--d", o.d, "spatial dimension");
  r.add(s, "--p", o.p, "nonlinearity exponent");
  r.add(s, "--alpha", o.alpha, "damping");
  r.add(s, "--rmax", o.rmax, "ground state radial extent");
  r.add(s, "--tol", o.tol, "ground state shooting tolerance");
  if (with_gs) r.add(s, "--gs", o.gs_file, "ground state CSV to import instead of solving");
}

void add_field(CLI::App* s, Registry& r, Opts& o) {
  r.add(s, "--name", o.name, "configuration name");
  r.flag(s, "--same-sign", o.same_sign, "set all signs to +1");
  r.flag(s, "--allow-inadmissible", o.allow_inadmissible, "run configurations with gamma <= 0");
  r.add(s, "--r0", o.r0, "initial nearest distance");
  r.add(s, "--n", o.n, "grid points per axis");
  r.add(s, "--L", o.L, "box half-width (0: extent + 30)");
  r.add(s, "--dt", o.dt, "time step (0: h/2)");
  r.add(s, "--order", o.order, "splitting order (2, 4, 6)");
  r.add(s, "--t-end", o.t_end, "final time");
  r.add(s, "--output-every", o.output_every, "sampling interval");
  r.add(s, "--delta", o.delta, "bootstrap scale of the exit test");
  r.add(s, "--delta0", o.delta0, "tube radius for the modulation");
  r.add(s, "--mu", o.mu, "diagnostic weight (0: default)");
}

GroundState ground_state(const Opts& o, Run& run) {
  GroundState gs;
  if (!o.gs_file.empty()) {
    gs = read_ground_state_csv(o.gs_file);
    run.m.inputs[o.gs_file] = file_digest(o.gs_file);
    require(gs.params.d == o.d && gs.params.p == o.p, ErrorCode::InvalidParams,
            "--d/--p differ from the imported ground state");
    gs.params.alpha = o.alpha;
    gs.params.validate();
  } else {
    gs = solve_ground_state({o.d, o.p, o.alpha}, o.rmax, o.tol);
  }
  return gs;
}

SignedConfiguration configuration(const std::string& name, int dim) {
  for (int d = std::max(dim, 1); d <= 8; ++d) {
    try {
      return build_catalog(name, d);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DimensionTooSmall || dim > 0) throw;
    }
  }
  fail(ErrorCode::DimensionTooSmall, name + " does not fit in d <= 8");
}

SignedConfiguration model_configuration(const Opts& o) {
  SignedConfiguration c = build_catalog(o.name, o.d);
  return o.same_sign ? same_sign(c) : c;
}

ShootControl control(const Opts& o) {
  ShootControl c;
  c.n = o.n;
  c.L = o.L;
  c.dt = o.dt;
  c.order = o.order;
  c.t_end = o.t_end;
  c.delta = o.delta;
  c.delta0 = o.delta0;
  c.bracket = o.bracket;
  c.output_every = o.output_every;
  c.checkpoint_every = o.checkpoint_every;
  c.max_bisect = o.max_bisect;
  c.max_bisect_inner = o.max_bisect_inner;
  c.max_segments = o.max_segments;
  c.restart_margin = o.restart_margin;
  c.mu = o.mu;
  c.allow_inadmissible = o.allow_inadmissible;
  return c;
}

std::vector<std::string> sample_columns(std::size_t n, int d) {
  std::vector<std::string> cols = {"t",      "r",          "N",        "b",     "btilde",      "E",
                                   "F",      "M",          "qstar",    "energy", "dissipation", "identity_residual",
                                   "eps_norm", "ortho",    "equivariance", "symmetry_defect"};
  for (std::size_t w = 0; w < n; ++w) cols.push_back("a" + std::to_string(w));
  for (std::size_t w = 0; w < n; ++w)
    for (int j = 0; j < d; ++j) cols.push_back("z" + std::to_string(w) + "_" + std::to_string(j));
  for (std::size_t w = 0; w < n; ++w)
    for (int j = 0; j < d; ++j) cols.push_back("ell" + std::to_string(w) + "_" + std::to_string(j));
  return cols;
}

std::vector<double> sample_row(const ModulationSample& m) {
  std::vector<double> r = {m.t,      m.r,           m.N,    m.b,          m.btilde,      m.E,
                           m.F,      m.M,           m.qstar, m.energy,    m.dissipation, m.identity_residual,
                           m.eps_norm, m.ortho,     m.equivariance, m.symmetry_defect};
  r.insert(r.end(), m.a_plus.begin(), m.a_plus.end());
  for (const Point& z : m.z) r.insert(r.end(), z.data(), z.data() + z.size());
  for (const Point& l : m.ell) r.insert(r.end(), l.data(), l.data() + l.size());
  return r;
}

json exit_json(const RunExit& e) {
  return {{"exited", e.exited}, {"t", e.exited ? json(e.t) : json(nullptr)}, {"side", e.side},
          {"slope", std::isnan(e.slope) ? json(nullptr) : json(e.slope)}, {"reason", e.reason}};
}

// ---- subcommands

void cmd_groundstate(const Opts& o, Run& run) {
  GroundState gs = solve_ground_state({o.d, o.p, o.alpha}, o.rmax, o.tol);
  write_ground_state_csv(run.file("groundstate.csv"), gs);
  run.m.results = ground_state_json(gs);
  run.m.results["ode_residual"] = ode_residual(gs);
  run.m.results["monotone"] = is_monotone_decreasing(gs);
  std::cout << "q0 = " << num(gs.q0) << "\nkappa = " << num(gs.kappa) << "\nc1 = " << num(gs.c1)
            << "\ng0 = " << num(gs.g0) << "\n";
}

void cmd_spectrum(const Opts& o, Run& run) {
  GroundState gs = ground_state(o, run);
  SpectralData sd = compute_spectrum(gs, o.n_grid);
  write_json(run.file("spectrum.json"), spectrum_json(sd));
  CsvWriter w(run.file("Y.csv"), spectrum_json(sd), {"r", "Y", "dY"});
  for (double r = 0; r < sd.Y_spline.x_back(); r += 0.01) w.row({r, sd.Y(r), sd.dY(r)});
  run.m.results = spectrum_json(sd);
  std::cout << "nu0_sq = " << num(sd.nu0_sq) << "\nnu+ = " << num(sd.nu_plus) << "\nnu- = " << num(sd.nu_minus)
            << "\nbeta = " << num(sd.beta) << "\n";
}

void cmd_interaction(const Opts& o, Run& run) {
  GroundState gs = ground_state(o, run);
  InteractionKernel k(gs, o.r_lo, o.r_hi, o.dr);
  json h = {{"params", params_json(gs.params)}, {"g0", k.g0()},           {"c1", k.c1()},
            {"fitted_C", k.fitted_C()},         {"quadrature_error", k.quadrature_error()}};
  CsvWriter w(run.file("g_table.csv"), h, {"r", "g", "g0q", "ratio"});
  for (std::size_t i = 0; i < k.table_r().size(); ++i) {
    double r = k.table_r()[i], g0q = k.g0() * gs.q(r);
    w.row({r, k.table_g()[i], g0q, k.table_g()[i] / g0q});
  }
  run.m.results = h;
  std::cout << "g0 = " << num(k.g0()) << "\nfitted C = " << num(k.fitted_C()) << "\n";
}

void cmd_config(const Opts& o, Run& run) {
  if (o.table) {
    std::ofstream f(run.file("table.csv"));
    require(bool(f), ErrorCode::IoError, "cannot write table.csv");
    f << "name,dim,size,gamma,gamma_raw,lambda,lambda_stated,theta,admissible\n";
    json rows = json::array();
    for (const std::string& nm : catalog_names()) {
      SignedConfiguration c = configuration(nm, 0);
      if (o.dim > c.dim) c = build_catalog(nm, o.dim);
      ValidationReport v = validate(c);
      f << nm << "," << c.dim << "," << c.size() << "," << num(c.gamma) << "," << num(c.gamma_raw) << ","
        << num(c.lambda_omega) << "," << num(c.lambda_stated) << "," << num(c.theta_ratio) << ","
        << (v.admissible ? 1 : 0) << "\n";
      std::cout << nm << "  d=" << c.dim << "  gamma=" << num(c.gamma) << "  lambda=" << num(c.lambda_omega)
                << "  admissible=" << (v.admissible ? "true" : "false") << "\n";
      rows.push_back({{"name", nm}, {"gamma", c.gamma}, {"lambda", c.lambda_omega}, {"admissible", v.admissible}});
    }
    run.m.results["table"] = rows;
    if (o.cfg_name.empty()) return;
  }
  require(!o.cfg_name.empty(), ErrorCode::InvalidParams, "--name or --table required");
  SignedConfiguration c = configuration(o.cfg_name, o.dim);
  if (o.same_sign) c = same_sign(c);
  json j = configuration_json(c);
  if (o.validate) {
    ValidationReport v = validate(c);
    j["validation"] = validation_json(v);
    std::cout << "name = " << c.name << "\ndim = " << c.dim << "\ngamma = " << num(v.gamma)
              << "\nlambda = " << num(v.lambda_omega) << "\ntheta = " << num(v.theta_ratio)
              << "\nequivariant = " << (v.equivariant ? "true" : "false")
              << "\nadmissible = " << (v.admissible ? "true" : "false") << "\n";
  } else {
    std::cout << "name = " << c.name << "\ndim = " << c.dim << "\ngamma = " << num(c.gamma) << "\n";
  }
  write_json(run.file("config.json"), j);
  run.m.results["configuration"] = j;
}

void cmd_reduce(const Opts& o, Run& run) {
  require(o.mode == "first" || o.mode == "second" || o.mode == "symmetric", ErrorCode::InvalidParams,
          "mode must be first, second or symmetric");
  require(o.law == "kernel" || o.law == "synthetic", ErrorCode::InvalidParams, "law must be kernel or synthetic");
  GroundState gs = ground_state(o, run);
  std::unique_ptr<InteractionKernel> k;
  ForceLaw law;
  if (o.law == "kernel") {
    k = std::make_unique<InteractionKernel>(gs);
    law = ForceLaw::from_kernel(*k);
  } else {
    law = ForceLaw::synthetic(o.law_A, o.law_m);
  }
  SignedConfiguration c = model_configuration(o);
  json h = {{"params", params_json(gs.params)}, {"name", c.name}, {"signs", c.signs}, {"law", law.kind},
            {"mode", o.mode}};
  if (o.mode == "symmetric") {
    ScalarTrajectory tr = integrate_symmetric(c, law, o.alpha, o.r0, o.t_end, o.per_decade);
    CsvWriter w(run.file("trajectory.csv"), h, {"t", "r"});
    for (std::size_t i = 0; i < tr.t.size(); ++i) w.row({tr.t[i], tr.r[i]});
    run.m.steps = long(tr.t.size());
    run.m.results["r_final"] = tr.r.back();
    run.m.results["c_predicted"] = std::log(gs.kappa * c.gamma_raw * gs.g0 / (2 * o.alpha));
    if (o.fit) {
      AsymptoticFit f = fit_asymptotics(tr, o.d, o.fit_lo);
      run.m.results["fit"] = {{"lambda_fit", f.lambda_fit}, {"lambda_lnln", f.lambda_lnln}, {"c_fit", f.c_fit},
                              {"t_lo", f.t_lo},             {"t_hi", f.t_hi},               {"residual", f.residual},
                              {"s_lo", f.s_lo},             {"s_hi", f.s_hi},               {"s_predicted", f.s_predicted}};
      std::cout << "c_fit = " << num(f.c_fit) << "\nlambda_fit = " << num(f.lambda_fit) << "\n";
    }
    std::cout << "r(t_end) = " << num(tr.r.back()) << "\n";
    return;
  }
  ReducedState s0;
  s0.y = scaled(c, o.r0 * c.lambda_omega).vertices;
  s0.signs = c.signs;
  if (o.mode == "second") s0.ell.assign(c.size(), Point::Zero(c.dim));
  ReducedTrajectory tr = integrate_reduced(s0, law, o.alpha, o.t_end,
                                           log_times(std::min(1e-2, o.t_end), o.t_end, o.per_decade));
  std::vector<std::string> cols = {"t", "r", "qstar"};
  for (std::size_t w = 0; w < c.size(); ++w)
    for (int j = 0; j < c.dim; ++j) cols.push_back("y" + std::to_string(w) + "_" + std::to_string(j));
  if (o.mode == "second")
    for (std::size_t w = 0; w < c.size(); ++w)
      for (int j = 0; j < c.dim; ++j) cols.push_back("ell" + std::to_string(w) + "_" + std::to_string(j));
  CsvWriter w(run.file("trajectory.csv"), h, cols);
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    std::vector<double> row = {tr.t[i], min_pair_distance(tr.y[i]), q_star(gs, tr.y[i])};
    for (const Point& y : tr.y[i]) row.insert(row.end(), y.data(), y.data() + y.size());
    if (o.mode == "second")
      for (const Point& l : tr.ell[i]) row.insert(row.end(), l.data(), l.data() + l.size());
    w.row(row);
  }
  run.m.steps = long(tr.t.size());
  run.m.results["collided"] = tr.collided;
  run.m.results["collision_time"] = tr.collided ? json(tr.collision_time) : json(nullptr);
  run.m.results["r_final"] = min_pair_distance(tr.y.back());
  std::cout << "collided = " << (tr.collided ? "true" : "false") << "\nr(final) = " << num(min_pair_distance(tr.y.back()))
            << "\n";
}

void cmd_simulate(const Opts& o, Run& run) {
  GroundState gs = ground_state(o, run);
  SpectralData sd = compute_spectrum(gs);
  Basis b{gs, sd};
  SignedConfiguration c = model_configuration(o);
  require(o.allow_inadmissible || (c.gamma > 0 && c.size() > 1), ErrorCode::NotAdmissible,
          "configuration is not admissible");
  ShootControl ctl = control(o);
  ctl.stop_at_exit = false;
  Grid g = shooting_grid(c, o.r0, ctl);
  Points z0 = scaled(c, o.r0 * c.lambda_omega).vertices;
  detail::Shooter sh(c, b, ctl, g);
  std::vector<double> A(sh.orbit_list().size(), 0.0);
  require(o.a_plus.empty() || o.a_plus.size() == A.size(), ErrorCode::InvalidParams,
          "--a-plus needs one value per vertex orbit (" + std::to_string(A.size()) + ")");
  if (!o.a_plus.empty()) A = o.a_plus;
  FieldState base = assemble(g, b, z0, {}, c.signs);
  ModulationData md = sh.decompose_at(base, z0, {});
  json h = {{"params", params_json(gs.params)}, {"name", c.name}, {"signs", c.signs}, {"orbits", sh.orbit_list()},
            {"grid", {{"d", g.d}, {"n", g.n}, {"L", g.L}, {"h", g.h()}}}};
  CsvWriter w(run.file("timeseries.csv"), h, sample_columns(c.size(), c.dim));
  double next_snap = 0;
  int snaps = 0;
  sh.sample_hook = [&](const FieldState& st, const ModulationSample& ms) {
    w.row(sample_row(ms));
    if (o.snapshot_every > 0 && st.t >= next_snap - 1e-9) {
      char nm[32];
      std::snprintf(nm, sizeof nm, "snap_%05d.bin", snaps++);
      write_snapshot(run.file(nm), g, st);
      next_snap += o.snapshot_every;
    }
  };
  CandidateRun cr = sh.run(base, md, A);
  run.m.steps = sh.steps();
  double eps = 0, ident = 0, eq = 0;
  for (const ModulationSample& m : cr.history) {
    eps = std::max(eps, m.eps_norm);
    ident = std::max(ident, m.identity_residual);
    eq = std::max(eq, m.equivariance);
  }
  run.m.results = {{"exit", exit_json(cr.exit)},   {"t_final", cr.history.empty() ? 0.0 : cr.history.back().t},
                   {"max_eps_norm", eps},         {"max_identity_residual", ident},
                   {"max_equivariance", eq},      {"a_plus", A},
                   {"snapshots", snaps},          {"mu", ctl.mu > 0 ? ctl.mu : default_mu(sd)}};
  std::cout << "t_final = " << num(cr.history.empty() ? 0.0 : cr.history.back().t)
            << "\nmax identity residual = " << num(ident) << "\nleft tube = " << (cr.exit.exited ? "true" : "false")
            << "\n";
}

void cmd_shoot(const Opts& o, Run& run) {
  GroundState gs = ground_state(o, run);
  SpectralData sd = compute_spectrum(gs);
  Basis b{gs, sd};
  SignedConfiguration c = model_configuration(o);
  ShootControl ctl = control(o);
  ShootingResult r = shoot(c, o.r0, b, ctl);
  Grid g = shooting_grid(c, o.r0, ctl);
  json h = {{"params", params_json(gs.params)}, {"name", c.name}, {"signs", c.signs}, {"orbits", r.orbits},
            {"grid", {{"d", g.d}, {"n", g.n}, {"L", g.L}, {"h", g.h()}}}};
  CsvWriter w(run.file("history.csv"), h, sample_columns(c.size(), c.dim));
  for (const ModulationSample& m : r.history) w.row(sample_row(m));
  json segs = json::array();
  for (const Segment& s : r.segments)
    segs.push_back({{"t_start", s.t_start}, {"half_width", s.half_width}, {"runs", s.runs}, {"A", s.A},
                    {"best_exit", exit_json(s.best_exit)}});
  run.m.steps = r.total_runs;
  run.m.results = {{"survived", r.survived},
                   {"horizon", r.horizon},
                   {"a_plus_initial", r.a_plus_initial},
                   {"lower_exit", exit_json(r.lower_exit)},
                   {"upper_exit", exit_json(r.upper_exit)},
                   {"segments", segs},
                   {"max_eps_norm", r.max_eps_norm},
                   {"max_identity_residual", r.max_identity_residual},
                   {"max_equivariance", r.max_equivariance},
                   {"max_symmetry_defect", r.max_symmetry_defect},
                   {"total_runs", r.total_runs},
                   {"mu", ctl.mu > 0 ? ctl.mu : default_mu(sd)}};
  if (c.size() > 1 && c.gamma > 0 && !r.history.empty() && r.horizon > o.compare_lo) {
    InteractionKernel k(gs);
    ReducedComparison rc = compare_with_reduced(r.history, c.signs, ForceLaw::from_kernel(k), o.alpha, o.compare_lo,
                                                r.horizon);
    CsvWriter wr(run.file("reduced.csv"), h, {"t", "r_field", "r_reduced"});
    for (std::size_t i = 0; i < rc.t.size(); ++i) wr.row({rc.t[i], rc.r_field[i], rc.r_reduced[i]});
    run.m.results["reduced"] = {{"t_lo", o.compare_lo}, {"max_rel_dev", rc.max_rel_dev},
                                {"max_growth_dev", rc.max_growth_dev}};
  }
  std::cout << "survived = " << (r.survived ? "true" : "false") << "\nhorizon = " << num(r.horizon)
            << "\nruns = " << r.total_runs << "\nmax eps = " << num(r.max_eps_norm) << "\n";
}

std::vector<ModulationSample> read_history(const std::string& path, std::vector<int>& signs) {
  CsvTable t = read_csv(path);
  try {
    signs = t.header.at("signs").get<std::vector<int>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, path + ": " + e.what());
  }
  std::size_t n = signs.size();
  int d = 0;
  while (std::find(t.columns.begin(), t.columns.end(), "z0_" + std::to_string(d)) != t.columns.end()) ++d;
  require(d > 0, ErrorCode::IoError, path + ": no center columns");
  std::vector<ModulationSample> hist;
  for (const auto& row : t.rows) {
    ModulationSample m;
    m.t = row[t.col("t")];
    m.eps_norm = row[t.col("eps_norm")];
    m.energy = row[t.col("energy")];
    m.dissipation = row[t.col("dissipation")];
    m.identity_residual = row[t.col("identity_residual")];
    for (std::size_t w = 0; w < n; ++w) {
      Point z(d), l(d);
      for (int j = 0; j < d; ++j) {
        z[j] = row[t.col("z" + std::to_string(w) + "_" + std::to_string(j))];
        l[j] = row[t.col("ell" + std::to_string(w) + "_" + std::to_string(j))];
      }
      m.z.push_back(z);
      m.ell.push_back(l);
    }
    hist.push_back(m);
  }
  return hist;
}

void cmd_audit(const Opts& o, Run& run) {
  GroundState gs = ground_state(o, run);
  SpectralData sd = compute_spectrum(gs);
  Basis b{gs, sd};
  run.m.results["ground_state"] = ground_state_json(gs);
  run.m.results["ground_state"]["ode_residual"] = ode_residual(gs);
  run.m.results["spectrum"] = spectrum_json(sd);
  if (o.d <= 2) {
    double ext = *std::max_element(o.R.begin(), o.R.end());
    Grid g(o.d, o.n, o.L > 0 ? o.L : ext / 2 + 30);
    json h = {{"params", params_json(gs.params)}, {"signs", {1, -1}}};
    CsvWriter w(run.file("static_energy.csv"), h, {"R", "grid_energy", "expansion", "gap", "gap_over_qR"});
    for (const StaticEnergyRow& r : static_energy_audit(b, g, o.R, {1, -1}))
      w.row({r.R, r.grid_energy, r.expansion, r.gap, r.gap_over_qR});
    // coercivity: Gaussian-weighted random polynomials with Y and grad Q removed
    std::mt19937 rng(o.seed);
    std::normal_distribution<double> nd;
    SolitonFields f = sample_soliton(g, b, Point::Zero(o.d), 1);
    std::vector<Field> trials;
    for (int k = 0; k < o.trials; ++k) {
      Field e(g.size());
      std::vector<double> c(6);
      for (double& x : c) x = nd(rng);
      for (std::size_t i = 0; i < g.size(); ++i) {
        Point x = g.point(i);
        double y = o.d == 2 ? x[1] : 0.0;
        e[i] = std::exp(-x.squaredNorm() / 8) * (c[0] + c[1] * x[0] + c[2] * y + c[3] * x[0] * x[0] + c[4] * x[0] * y +
                                                 c[5] * y * y);
      }
      e -= g.dot(e, f.Y) / g.dot(f.Y, f.Y) * f.Y;
      for (int j = 0; j < o.d; ++j) e -= g.dot(e, f.dQ[j]) / g.dot(f.dQ[j], f.dQ[j]) * f.dQ[j];
      trials.push_back(e);
    }
    CoercivityReport cr = coercivity_probe(g, b, trials);
    CsvWriter wc(run.file("coercivity.csv"), {{"params", params_json(gs.params)}, {"seed", o.seed}},
                 {"quad", "h1", "proj", "c_max"});
    for (const CoercivitySample& s : cr.samples) wc.row({s.quad, s.h1, s.proj, s.c_max});
    run.m.results["c_empirical"] = cr.c_empirical;
  }
  if (!o.history.empty()) {
    run.m.inputs[o.history] = file_digest(o.history);
    std::vector<int> signs;
    std::vector<ModulationSample> hist = read_history(o.history, signs);
    EnergyAudit ea = energy_audit(hist, gs, signs);
    CsvWriter w(run.file("energy_audit.csv"), {{"params", params_json(gs.params)}, {"signs", signs}},
                {"t", "energy", "expansion", "gap", "envelope", "dissipation", "identity_residual"});
    for (const EnergyAuditRow& r : ea.rows)
      w.row({r.t, r.energy, r.expansion, r.gap, r.envelope, r.dissipation, r.identity_residual});
    run.m.results["energy_audit"] = {{"energy_nonincreasing", ea.energy_nonincreasing},
                                     {"max_identity_residual", ea.max_identity_residual},
                                     {"max_gap_over_envelope", ea.max_gap_over_envelope}};
    std::cout << "energy nonincreasing = " << (ea.energy_nonincreasing ? "true" : "false")
              << "\nmax identity residual = " << num(ea.max_identity_residual) << "\n";
  }
  std::cout << "ode residual = " << num(ode_residual(gs)) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-soliton lab for the damped nonlinear Klein-Gordon equation"};
  app.set_version_flag("--version", std::string(DKG_VERSION));
  app.require_subcommand(1);
  Opts o;
  struct Sub {
    CLI::App* app;
    Registry reg;
    void (*fn)(const Opts&, Run&);
  };
  std::vector<std::unique_ptr<Sub>> subs;
  auto sub = [&](const std::string& name, const std::string& desc, void (*fn)(const Opts&, Run&)) {
    subs.push_back(std::make_unique<Sub>(Sub{app.add_subcommand(name, desc), {}, fn}));
    Sub& s = *subs.back();
    s.app->add_option("--out", o.out, "output directory (default dkg_out/<subcommand>)");
    s.app->add_option("--config", o.config, "JSON run configuration or manifest")->check(CLI::ExistingFile);
    return &s;
  };

  Sub* s = sub("groundstate", "radial ground state profile", cmd_groundstate);
  add_model(s->app, s->reg, o, false);

  s = sub("spectrum", "linearized spectrum and unstable rates", cmd_spectrum);
  add_model(s->app, s->reg, o);
  s->reg.add(s->app, "--n-grid", o.n_grid, "radial grid size");

  s = sub("interaction", "pair force table", cmd_interaction);
  add_model(s->app, s->reg, o);
  s->reg.add(s->app, "--r-lo", o.r_lo, "table start");
  s->reg.add(s->app, "--r-hi", o.r_hi, "table end");
  s->reg.add(s->app, "--dr", o.dr, "table spacing");

  s = sub("config", "catalog configurations", cmd_config);
  s->reg.add(s->app, "--name", o.cfg_name, "configuration name");
  s->reg.add(s->app, "--dim", o.dim, "ambient dimension (0: smallest)");
  s->reg.flag(s->app, "--validate", o.validate, "run the validation report");
  s->reg.flag(s->app, "--table", o.table, "emit the catalog table");
  s->reg.flag(s->app, "--same-sign", o.same_sign, "set all signs to +1");

  s = sub("reduce", "reduced center dynamics", cmd_reduce);
  add_model(s->app, s->reg, o);
  s->reg.add(s->app, "--name", o.name, "configuration name");
  s->reg.flag(s->app, "--same-sign", o.same_sign, "set all signs to +1");
  s->reg.add(s->app, "--mode", o.mode, "first, second or symmetric")->check(CLI::IsMember({"first", "second", "symmetric"}));
  s->reg.add(s->app, "--law", o.law, "kernel or synthetic")->check(CLI::IsMember({"kernel", "synthetic"}));
  s->reg.add(s->app, "--law-A", o.law_A, "synthetic law amplitude");
  s->reg.add(s->app, "--law-m", o.law_m, "synthetic law power");
  s->reg.add(s->app, "--r0", o.r0, "initial nearest distance");
  s->reg.add(s->app, "--t-end", o.t_end, "final time");
  s->reg.add(s->app, "--per-decade", o.per_decade, "samples per decade of t");
  s->reg.flag(s->app, "--fit", o.fit, "fit the log law (symmetric mode)");
  s->reg.add(s->app, "--fit-lo", o.fit_lo, "start of the fit window");

  s = sub("simulate", "field evolution with modulation tracking", cmd_simulate);
  add_model(s->app, s->reg, o);
  add_field(s->app, s->reg, o);
  s->reg.add(s->app, "--a-plus", o.a_plus, "unstable amplitude per vertex orbit");
  s->reg.add(s->app, "--snapshot-every", o.snapshot_every, "binary field snapshot interval (0: none)");

  s = sub("shoot", "bisection on the unstable directions", cmd_shoot);
  add_model(s->app, s->reg, o);
  add_field(s->app, s->reg, o);
  s->reg.add(s->app, "--bracket", o.bracket, "initial a+ half-width (0: delta^{5/4})");
  s->reg.add(s->app, "--checkpoint-every", o.checkpoint_every, "restart checkpoint interval");
  s->reg.add(s->app, "--restart-margin", o.restart_margin, "restart before exit, units of 1/nu+");
  s->reg.add(s->app, "--max-bisect", o.max_bisect, "outer bisection steps");
  s->reg.add(s->app, "--max-bisect-inner", o.max_bisect_inner, "inner bisection steps");
  s->reg.add(s->app, "--max-segments", o.max_segments, "restart segments");
  s->reg.add(s->app, "--compare-lo", o.compare_lo, "start of the reduced comparison window");

  s = sub("audit", "energy expansion, coercivity and run audits", cmd_audit);
  add_model(s->app, s->reg, o);
  s->reg.add(s->app, "--R", o.R, "pair distances for the static energy audit");
  s->reg.add(s->app, "--n", o.n, "grid points per axis");
  s->reg.add(s->app, "--L", o.L, "box half-width (0: R/2 + 30)");
  s->reg.add(s->app, "--trials", o.trials, "coercivity trial functions");
  s->reg.add(s->app, "--seed", o.seed, "trial RNG seed");
  s->reg.add(s->app, "--history", o.history, "history.csv of a shoot or simulate run")->check(CLI::ExistingFile);

  Sub* chosen = nullptr;
  try {
    app.parse(argc, argv);
    for (auto& x : subs)
      if (x->app->parsed()) chosen = x.get();
    if (!o.config.empty()) {
      json j = read_json(o.config);
      if (j.contains("subcommand")) {
        if (j["subcommand"] != chosen->app->get_name()) throw UsageError("config is a manifest of another subcommand");
        j = j.at("params");
      }
      chosen->reg.load(j);
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n" << chosen->app->help();
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  Run run;
  run.dir = o.out.empty() ? fs::path("dkg_out") / chosen->app->get_name() : fs::path(o.out);
  run.m.subcommand = chosen->app->get_name();
  run.m.params = chosen->reg.to_json();
  run.m.version = DKG_VERSION;
  if (const char* th = std::getenv("DKG_THREADS")) run.m.environment["DKG_THREADS"] = th;
  try {
    fs::create_directories(run.dir);
    chosen->fn(o, run);
    run.finish();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: IoError: " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote " << run.dir.string() << "\n";
  return 0;
}
