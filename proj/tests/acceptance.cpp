// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "dkg/shooting.hpp"

using namespace dkg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double sech(double x) { return 1 / std::cosh(x); }

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0, double e = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

int failures = 0;

void report(int k, const std::string& title, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const Error& e) {
    o.pass = false;
    o.detail = std::string("error ") + e.what();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception ") + e.what();
  }
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", k, title.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

struct Lab {
  GroundState gs;
  SpectralData sd;
  Basis basis() const { return {gs, sd}; }
};

const Lab& lab(int d) {
  static Lab l1{solve_ground_state({1, 3.0, 1.0}), {}};
  static Lab l2{solve_ground_state({2, 3.0, 1.0}), {}};
  static bool init = false;
  if (!init) {
    l1.sd = compute_spectrum(l1.gs);
    l2.sd = compute_spectrum(l2.gs);
    init = true;
  }
  return d == 1 ? l1 : l2;
}

// largest energy identity residual over every field run in this binary
double identity_worst = 0;
int identity_runs = 0;

void tally(double residual) {
  identity_worst = std::max(identity_worst, residual);
  ++identity_runs;
}

}  // namespace

int main() {
  report(1, "ground state oracle", [] {
    Outcome o;
    auto t0 = Clock::now();
    GroundState gs = solve_ground_state({1, 3.0, 1.0});
    double secs = seconds_since(t0);
    double err = 0;
    for (double r = 0; r <= 15; r += 1e-3) err = std::max(err, std::fabs(gs.q(r) - std::sqrt(2.0) * sech(r)));
    o.check(err <= 1e-8, fmt("sup|q - sqrt2 sech| on [0,15] = %.2e", err));
    o.check(std::fabs(gs.c1 - 4.0 / 3) <= 1e-6, fmt("c1 = %.10f", gs.c1));
    o.check(std::fabs(gs.kappa - 2 * std::sqrt(2.0)) <= 1e-6, fmt("kappa = %.10f", gs.kappa));
    o.check(secs < 2, fmt("%.2f s", secs));
    return o;
  });

  report(2, "spectrum oracle", [] {
    Outcome o;
    GroundState gs = solve_ground_state({1, 3.0, 1.0});
    SpectralData sd = compute_spectrum(gs);
    o.check(std::fabs(sd.nu0_sq - 3) <= 1e-6, fmt("nu0^2 = %.10f", sd.nu0_sq));
    o.check(sd.kernel_residual <= 1e-6, fmt("|L Q'|/|Q'| = %.2e", sd.kernel_residual));
    SpectralData exact;
    exact.nu0_sq = 3;
    set_rates(exact, 1.0);
    o.check(exact.nu_plus == 1.0 && exact.nu_minus == -3.0, fmt("formula rates %.17g, %.17g", exact.nu_plus,
                                                                  exact.nu_minus));
    o.check(std::fabs(sd.nu_plus - 1) <= 1e-6 && std::fabs(sd.nu_minus + 3) <= 1e-6,
            fmt("computed rates %.10f, %.10f", sd.nu_plus, sd.nu_minus));
    return o;
  });

  report(3, "interaction asymptotics", [] {
    Outcome o;
    const GroundState& gs = lab(1).gs;
    InteractionKernel k(gs);
    double worst = 0;
    for (double r = 8; r <= 16 + 1e-12; r += 0.25) worst = std::max(worst, r * std::fabs(k.g(r) / (gs.g0 * gs.q(r)) - 1));
    o.check(worst <= 2, fmt("max r|g/(g0 q) - 1| on [8,16] = %.2e (fitted C = %.2e)", worst, k.fitted_C()));
    double v10 = pair_interaction(gs, pt({10})).value, v20 = pair_interaction(gs, pt({20})).value;
    double rel = v10 / (gs.c1 * gs.g0 * gs.q(10)) - 1;
    o.check(std::fabs(rel) <= 0.15, fmt("<f(Q),Q(.+10)>/(c1 g0 q(10)) - 1 = %.2e", rel));
    double ratio = (v20 / v10) / (gs.q(20) / gs.q(10)) - 1;
    o.check(std::fabs(ratio) <= 0.08, fmt("ratio 20/10 against q: %.2e", ratio));
    return o;
  });

  report(4, "configuration table", [] {
    Outcome o;
    auto t0 = Clock::now();
    struct Row {
      std::string name;
      int d;
      double gamma, lambda;
    };
    std::vector<Row> rows = {{"triangle_center", 2, 1, 1},    {"square_center", 2, 1, 1},
                             {"pentagon_center", 2, 1, 1},    {"tetrahedron_center", 3, 1, 1},
                             {"octahedron_center", 3, 1, 1},  {"cube_center", 3, 1, 1},
                             {"icosahedron_center", 3, 1, 1}, {"simplex_center", 4, 1, 1},
                             {"simplex_center", 5, 1, 1},     {"orthoplex_center", 4, 1, 1}};
    for (int K = 2; K <= 6; ++K) {
      double s = std::sin(M_PI / (2 * K));
      rows.push_back({"polygon_alternating(" + std::to_string(2 * K) + ")", 2, 2 * s, 1 / (2 * s)});
    }
    double worst = 0;
    int bad = 0;
    for (const Row& r : rows) {
      SignedConfiguration c = build_catalog(r.name, r.d);
      ValidationReport v = validate(c);
      double e = std::max(std::fabs(c.gamma - r.gamma), std::fabs(c.lambda_omega - r.lambda));
      worst = std::max(worst, e);
      if (e > 1e-12 || !v.admissible) ++bad;
    }
    o.check(bad == 0, fmt("%g admissible entries, max |(gamma, lambda) - table| = %.1e", double(rows.size()), worst));
    SignedConfiguration hex = build_catalog("hexagon_center", 2);
    o.check(hex.gamma == 0 && !validate(hex).admissible, fmt("hexagon_center gamma = %g rejected", hex.gamma));
    SignedConfiguration dod = build_catalog("dodecahedron_center", 3);
    o.check(dod.gamma < 0 && !validate(dod).admissible, fmt("dodecahedron_center gamma = %.4f rejected", dod.gamma));
    double secs = seconds_since(t0);
    o.check(secs < 1, fmt("%.3f s", secs));
    return o;
  });

  report(5, "reduced log-law", [] {
    Outcome o;
    auto t0 = Clock::now();
    const GroundState& gs = lab(1).gs;
    InteractionKernel k(gs);
    SignedConfiguration pair = build_catalog("pair_alternating", 1);
    ScalarTrajectory tr = integrate_symmetric(pair, ForceLaw::from_kernel(k), 1.0, 3.0, 1e8);
    AsymptoticFit f = fit_asymptotics(tr, 1, 1e4, 1e8);
    double c0 = std::log(gs.kappa * pair.gamma_raw * gs.g0 / 2);
    o.check(std::fabs(f.c_fit - c0) <= 1e-2, fmt("d=1: c_fit = %.5f, ln(kappa gamma g0/2alpha) = %.5f", f.c_fit, c0));
    SignedConfiguration p3 = build_catalog("pair_alternating", 3);
    ScalarTrajectory t3 = integrate_symmetric(p3, ForceLaw::synthetic(1.0, 1.0), 1.0, 3.0, 1e8);
    AsymptoticFit f3 = fit_asymptotics(t3, 3, 1e4, 1e8);
    o.check(std::fabs(f3.lambda_fit + 1) <= 0.05, fmt("d=3 synthetic: ln ln t coefficient %.4f (target -1)", f3.lambda_fit));
    double secs = seconds_since(t0);
    o.check(secs < 10, fmt("%.2f s", secs));
    return o;
  });

  report(6, "same-sign collapse vs opposite-sign expansion", [] {
    Outcome o;
    const GroundState& g1 = lab(1).gs;
    const GroundState& g2 = lab(2).gs;
    InteractionKernel k1(g1), k2(g2);
    ForceLaw l1 = ForceLaw::from_kernel(k1), l2 = ForceLaw::from_kernel(k2);
    CollapseReport pair = collapse_experiment({pt({0}), pt({5})}, {1, 1}, l1, 1.0, 1e4, 400);
    o.check(pair.collided, fmt("same-sign pair collides at t = %.2f", pair.collision_time));
    SignedConfiguration tri = same_sign(build_catalog("triangle_center", 2));
    CollapseReport t = collapse_experiment(scaled(tri, 5 * tri.lambda_omega).vertices, tri.signs, l2, 1.0, 1e4, 400);
    o.check(t.collided, fmt("same-sign centered triangle collides at t = %.2f", t.collision_time));
    int expanding = 0, total = 0;
    for (auto [name, d] : std::vector<std::pair<std::string, int>>{{"pair_alternating", 1},
                                                                    {"square_alternating", 2},
                                                                    {"polygon_alternating(6)", 2},
                                                                    {"triangle_center", 2},
                                                                    {"square_center", 2}}) {
      SignedConfiguration c = build_catalog(name, d);
      ReducedState s{0, scaled(c, 6 * c.lambda_omega).vertices, {}, c.signs};
      ReducedTrajectory tr = integrate_reduced(s, d == 1 ? l1 : l2, 1.0, 1e4, log_times(1e-2, 1e4, 20));
      bool mono = !tr.collided;
      for (std::size_t i = 1; i < tr.y.size(); ++i)
        mono = mono && min_pair_distance(tr.y[i]) >= min_pair_distance(tr.y[i - 1]) - 1e-12;
      mono = mono && min_pair_distance(tr.y.back()) > 6.5;
      ++total;
      if (mono) ++expanding;
    }
    o.check(expanding == total, fmt("%g of %g admissible signed configurations expand monotonically",
                                    double(expanding), double(total)));
    return o;
  });

  // criterion 7 runs first, reported last with the identity residual tally of all runs
  Outcome field;
  try {
    const Lab& L = lab(1);
    Grid g(1, 1024, 40);
    FieldState s = assemble(g, L.basis(), {pt({0})}, {}, {1});
    Field u0 = s.u;
    EvolveReport rep = evolve(s, {1, 3.0, 1.0}, 5.0);
    tally(rep.max_residual);
    double drift = (s.u - u0).cwiseAbs().maxCoeff();
    field.check(drift < 1e-6, fmt("stationary Q drift over t=5 = %.2e", drift));

    const double delta = 1e-6;
    FieldState s2 = assemble(g, L.basis(), {pt({0})}, {}, {1});
    SolitonFields f = sample_soliton(g, L.basis(), pt({0}), 1);
    s2.u += delta * f.Y;
    s2.v += delta * L.sd.nu_plus * f.Y;
    std::vector<double> ts, la;
    EvolveOptions opt;
    opt.output_every = 0.25;
    EvolveReport rep2 = evolve(s2, {1, 3.0, 1.0}, 3.0, opt, [&](const FieldState& st, const EnergyRecord&) {
      double a = L.sd.zeta_plus * g.dot(st.u - f.Q, f.Y) + g.dot(st.v, f.Y);
      ts.push_back(st.t);
      la.push_back(std::log(a));
      return true;
    });
    tally(rep2.max_residual);
    double n = double(ts.size()), st = 0, sl = 0, stt = 0, stl = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      st += ts[i];
      sl += la[i];
      stt += ts[i] * ts[i];
      stl += ts[i] * la[i];
    }
    double rate = (n * stl - st * sl) / (n * stt - st * st);
    field.check(std::fabs(rate / L.sd.nu_plus - 1) <= 0.02, fmt("growth rate %.5f vs nu+ = %.5f", rate, L.sd.nu_plus));

    FieldState s3 = assemble(g, L.basis(), {pt({-5}), pt({5})}, {pt({0.05}), pt({-0.02})}, {1, -1});
    tally(evolve(s3, {1, 3.0, 1.0}, 10.0).max_residual);
  } catch (const Error& e) {
    field.check(false, std::string("error ") + e.what());
  }

  report(8, "end-to-end shooting", [] {
    Outcome o;
    auto t0 = Clock::now();
    const Lab& L = lab(1);
    SignedConfiguration c = build_catalog("pair_alternating", 1);
    ShootControl ctl;
    ctl.t_end = 50;
    ShootingResult r = shoot(c, 10, L.basis(), ctl);
    double secs = seconds_since(t0);
    for (const ModulationSample& m : r.history) tally(m.identity_residual);
    o.check(r.survived && std::fabs(r.horizon - 50) < 1e-9,
            fmt("surviving trajectory to t = %.2f (%g runs, %g segments)", r.horizon, r.total_runs,
                double(r.segments.size())));
    InteractionKernel k(L.gs);
    ReducedComparison rc = compare_with_reduced(r.history, c.signs, ForceLaw::from_kernel(k), 1.0, 5, 50);
    o.check(!rc.t.empty() && rc.max_rel_dev < 0.05, fmt("separation vs reduced ODE on [5,50]: max rel dev %.2e",
                                                         rc.max_rel_dev));
    o.check(r.max_eps_norm < ctl.delta0, fmt("max |eps| = %.2e < tube radius %.2f", r.max_eps_norm, ctl.delta0));
    bool ends = r.lower_exit.reason == "btilde" && r.upper_exit.reason == "btilde" && r.lower_exit.slope > 0 &&
                r.upper_exit.slope > 0 && r.lower_exit.side[0] == -r.upper_exit.side[0];
    o.check(ends, fmt("bracket ends exit via btilde, slopes %.3f, %.3f", r.lower_exit.slope, r.upper_exit.slope));
    o.check(secs < 600, fmt("%.1f s", secs));
    return o;
  });

  report(9, "equivariance suite (square_alternating, d=2)", [] {
    Outcome o;
    const Lab& L = lab(2);
    SignedConfiguration c = build_catalog("square_alternating", 2);
    std::vector<GroupElement> G = group_closure(c);
    Grid g(2, 128, 20);
    Points z = scaled(c, 8 * c.lambda_omega).vertices;
    FieldState s = assemble(g, L.basis(), z, {}, c.signs);
    WResult W = build_W(g, L.basis(), std::vector<double>(z.size(), 0.01), z, c.signs);
    s.u += W.W;
    s.v += W.Wv;
    EvolveOptions opt;
    opt.output_every = 0.5;
    double field_res = 0, mod_res = 0;
    Points zg = z, lg;
    EvolveReport rep = evolve(s, {2, 3.0, 1.0}, 2.0, opt, [&](const FieldState& st, const EnergyRecord&) {
      field_res = std::max({field_res, equivariance_residual(g, st.u, G), equivariance_residual(g, st.v, G)});
      // unconstrained decomposition: the symmetry must come out, not be imposed
      ModulationData md = decompose(st, zg, lg, c.signs, L.basis());
      zg = md.z;
      lg = md.ell;
      mod_res = std::max({mod_res, point_equivariance_residual(md.z, G), point_equivariance_residual(md.ell, G)});
      return true;
    });
    tally(rep.max_residual);
    o.check(field_res <= 1e-8, fmt("field %.1e", field_res));
    o.check(mod_res <= 1e-8, fmt("modulation %.1e", mod_res));
    InteractionKernel k(L.gs);
    ReducedState rs{0, z, {}, c.signs};
    ReducedTrajectory tr = integrate_reduced(rs, ForceLaw::from_kernel(k), 1.0, 1e4, log_times(1e-2, 1e4, 20));
    double red = 0;
    for (const Points& y : tr.y) red = std::max(red, point_equivariance_residual(y, G));
    o.check(red <= 1e-8, fmt("reduced %.1e", red));
    return o;
  });

  report(7, "field solver physics", [&] {
    field.check(identity_worst <= 1e-5,
                fmt("energy identity residual max %.2e over %g records from all field runs", identity_worst, double(identity_runs)));
    return field;
  });

  std::printf("%d of 9 criteria failed\n", failures);
  return failures ? 1 : 0;
}
