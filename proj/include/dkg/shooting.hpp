#ifndef DKG_SHOOTING_HPP
#define DKG_SHOOTING_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "configurations.hpp"
#include "field.hpp"
#include "interaction.hpp"
#include "modulation.hpp"
#include "reduced_dynamics.hpp"

namespace dkg {

struct ShootControl {
  int n = 1024;
  double L = 0;              // 0: lambda r0 extent + 30
  double dt = 0;             // 0: h/2
  int order = 6;
  double t_end = 50;
  double delta = 0.1;
  double bracket = 0;        // 0: delta^{5/4}
  double delta0 = 0.1;       // tube radius for the modulation
  double output_every = 0.1;
  double checkpoint_every = 1.0;
  int max_bisect = 60;
  int max_bisect_inner = 30;
  int max_segments = 12;
  double restart_margin = 10;  // in units of 1/nu+
  double mu = 0;
  bool allow_inadmissible = false;
  bool stop_at_exit = true;  // false: keep evolving past the btilde threshold (plain simulation)
};

struct ModulationSample {
  double t = 0;
  Points z, ell;
  std::vector<double> a_plus;
  double r = 0, eps_norm = 0, ortho = 0;
  double E = 0, B = 0, F = 0, N = 0, b = 0, btilde = 0, M = 0, qstar = 0;
  double energy = 0, dissipation = 0, identity_residual = 0;
  double equivariance = 0;     // field and centers, 0 when not checked
  double symmetry_defect = 0;  // largest per-step projection correction since the previous sample
};

struct RunExit {
  bool exited = false;
  double t = INFINITY;
  std::vector<int> side;  // per orbit, sign of the mean a+
  double slope = NAN;     // d/dt btilde at the crossing
  std::string reason;
};

struct CandidateRun {
  std::vector<double> A;
  RunExit exit;
  std::vector<ModulationSample> history;
  std::vector<FieldState> checkpoints;
};

struct Segment {
  double t_start = 0;
  double half_width = 0;
  int runs = 0;
  std::vector<double> A;  // last bracket midpoint per orbit
  RunExit best_exit;
};

struct ShootingResult {
  bool survived = false;
  double horizon = 0;
  std::vector<double> a_plus_initial;  // per orbit, first segment
  RunExit lower_exit, upper_exit;      // first-segment bracket ends
  std::vector<Segment> segments;
  std::vector<ModulationSample> history;
  double max_eps_norm = 0;
  double max_identity_residual = 0;
  double max_equivariance = 0;
  double max_symmetry_defect = 0;
  int total_runs = 0;
  std::vector<std::vector<int>> orbits;
};

namespace detail {

inline bool signed_permutations(const std::vector<GroupElement>& G) {
  for (const GroupElement& e : G)
    for (Eigen::Index i = 0; i < e.R.size(); ++i) {
      double a = std::fabs(e.R.data()[i]);
      if (a > 1e-12 && std::fabs(a - 1) > 1e-12) return false;
    }
  return true;
}

inline std::vector<std::vector<int>> orbits(std::size_t n, const std::vector<GroupElement>& G) {
  std::vector<int> label(n, -1);
  std::vector<std::vector<int>> out;
  for (std::size_t w = 0; w < n; ++w) {
    if (label[w] >= 0) continue;
    out.emplace_back();
    for (const GroupElement& e : G) {
      int v = e.perm[w];
      if (label[v] < 0) {
        label[v] = int(out.size() - 1);
        out.back().push_back(v);
      }
    }
  }
  return out;
}

class Shooter {
 public:
  Shooter(const SignedConfiguration& c, const Basis& b, const ShootControl& ctl, const Grid& g)
      : c_(c), b_(b), ctl_(ctl), g_(g), G_(group_closure(c)) {
    orbits_ = detail::orbits(c.size(), G_);
    grid_sym_ = g.d == c.dim && signed_permutations(G_);
    if (grid_sym_)
      for (const GroupElement& e : G_) maps_.push_back(grid_map(g, e.R));
    dopt_.delta0 = ctl.delta0;
    dopt_.symmetry = &G_;
  }

  const std::vector<std::vector<int>>& orbit_list() const { return orbits_; }
  int runs() const { return runs_; }
  long long steps() const { return steps_; }

  // called with every sampled state of every run
  std::function<void(const FieldState&, const ModulationSample&)> sample_hook;

  std::vector<double> expand(const std::vector<double>& A) const {
    std::vector<double> a(c_.size());
    for (std::size_t k = 0; k < orbits_.size(); ++k)
      for (int w : orbits_[k]) a[w] = A[k];
    return a;
  }

  ModulationData decompose_at(const FieldState& s, const Points& z, const Points& ell) const {
    return decompose(s, z, ell, c_.signs, b_, dopt_);
  }

  // Evolve base + W(a) from base.t to t_end, stopping at the btilde exit.
  CandidateRun run(const FieldState& base, const ModulationData& md_base, const std::vector<double>& A) {
    ++runs_;
    CandidateRun cr;
    cr.A = A;
    FieldState s = base;
    WResult W = build_W(g_, b_, expand(A), md_base.z, c_.signs);
    s.u += W.W;
    s.v += W.Wv;
    const ModelParams mp = b_.params();
    Points z = md_base.z, ell = md_base.ell;
    double next_cp = s.t;
    double prev_bt = NAN, prev_t = NAN;
    auto side_of = [&](const std::vector<double>& ap) {
      std::vector<int> sd;
      for (const auto& o : orbits_) {
        double m = 0;
        for (int w : o) m += ap[w];
        sd.push_back(m >= 0 ? 1 : -1);
      }
      return sd;
    };
    auto observer = [&](const FieldState& st, const EnergyRecord& er) {
      ModulationData md;
      try {
        md = decompose_at(st, z, ell);
      } catch (const Error& e) {
        cr.exit = {true, st.t, cr.history.empty() ? std::vector<int>(orbits_.size(), 0) : side_of(cr.history.back().a_plus),
                   NAN, e.name()};
        return false;
      }
      z = md.z;
      ell = md.ell;
      Diagnostics dg = diagnostics(md, b_, g_, ctl_.mu);
      ModulationSample ms;
      ms.t = st.t;
      ms.z = md.z;
      ms.ell = md.ell;
      ms.a_plus = md.a_plus;
      ms.r = c_.size() > 1 ? min_pair_distance(md.z) : 0.0;
      ms.eps_norm = md.eps_norm;
      ms.ortho = md.ortho_residual;
      ms.E = dg.E;
      ms.B = dg.B;
      ms.F = dg.F;
      ms.N = dg.N;
      ms.b = dg.b;
      ms.M = dg.M;
      ms.qstar = dg.qstar;
      ms.btilde = std::pow(st.t + 1 / ctl_.delta, 2) * dg.b;
      ms.energy = er.energy;
      ms.dissipation = er.dissipation;
      ms.identity_residual = er.residual;
      if (grid_sym_)
        ms.equivariance = std::max({equivariance_residual(g_, st.u, G_), equivariance_residual(g_, st.v, G_),
                                    point_equivariance_residual(md.z, G_), point_equivariance_residual(md.ell, G_)});
      ms.symmetry_defect = defect_;
      defect_ = 0;
      cr.history.push_back(ms);
      if (sample_hook) sample_hook(st, ms);
      if (st.t >= next_cp - 1e-9) {
        cr.checkpoints.push_back(st);
        next_cp += ctl_.checkpoint_every;
      }
      if (ms.btilde >= 1 && !cr.exit.exited) {
        double slope = std::isnan(prev_bt) ? NAN : (ms.btilde - prev_bt) / (st.t - prev_t);
        cr.exit = {true, st.t, side_of(md.a_plus), slope, "btilde"};
        return !ctl_.stop_at_exit;
      }
      prev_bt = ms.btilde;
      prev_t = st.t;
      return true;
    };
    EvolveOptions eo;
    eo.dt = ctl_.dt;
    eo.order = ctl_.order;
    eo.output_every = ctl_.output_every;
    if (grid_sym_)
      eo.constrain = [this](FieldState& st) {
        double c = std::max(project_equivariant(g_, st.u, G_, maps_), project_equivariant(g_, st.v, G_, maps_));
        defect_ = std::max(defect_, c);
        return c;
      };
    defect_ = 0;
    try {
      steps_ += evolve(s, mp, ctl_.t_end, eo, observer).steps;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BlowupDetected) throw;
      cr.exit = {true, s.t, cr.history.empty() ? std::vector<int>(orbits_.size(), 0) : side_of(cr.history.back().a_plus),
                 NAN, e.name()};
    }
    return cr;
  }

  // Nested bisection over the orbit scalars from `level` on.
  CandidateRun solve(const FieldState& base, const ModulationData& md, std::vector<double> A, std::size_t level,
                     double w, RunExit* lo_exit = nullptr, RunExit* hi_exit = nullptr) {
    if (level == orbits_.size()) return run(base, md, A);
    const int iters = level == 0 ? ctl_.max_bisect : ctl_.max_bisect_inner;
    double lo = -w, hi = w;
    A[level] = lo;
    CandidateRun r_lo = solve(base, md, A, level + 1, w);
    A[level] = hi;
    CandidateRun r_hi = solve(base, md, A, level + 1, w);
    if (lo_exit) *lo_exit = r_lo.exit;
    if (hi_exit) *hi_exit = r_hi.exit;
    if (!r_lo.exit.exited || !r_hi.exit.exited)
      fail(ErrorCode::HorizonTooShort, "a bracket end did not leave the tube before t_end");
    int s_lo = r_lo.exit.side[level], s_hi = r_hi.exit.side[level];
    if (s_lo == s_hi) fail(ErrorCode::NoSignChange, "both bracket ends exit on the same side");
    CandidateRun best = r_lo.exit.t >= r_hi.exit.t ? std::move(r_lo) : std::move(r_hi);
    for (int k = 0; k < iters; ++k) {
      double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      A[level] = mid;
      CandidateRun r = solve(base, md, A, level + 1, w);
      if (!r.exit.exited) return r;
      if (r.exit.side[level] == s_lo)
        lo = mid;
      else
        hi = mid;
      if (r.exit.t >= best.exit.t) best = std::move(r);
    }
    return best;
  }

 private:
  const SignedConfiguration& c_;
  Basis b_;
  ShootControl ctl_;
  Grid g_;
  std::vector<GroupElement> G_;
  std::vector<std::vector<int>> orbits_;
  bool grid_sym_ = false;
  std::vector<std::vector<std::size_t>> maps_;
  double defect_ = 0;
  DecomposeOptions dopt_;
  int runs_ = 0;
  long long steps_ = 0;
};

}  // namespace detail

inline Grid shooting_grid(const SignedConfiguration& c, double r0, const ShootControl& ctl) {
  double ext = 0;
  for (const Point& v : c.vertices) ext = std::max(ext, v.norm() * r0 * c.lambda_omega);
  double L = ctl.L > 0 ? ctl.L : ext + 30;
  require(L >= ext + 15, ErrorCode::InvalidParams, "box half-width must exceed the configuration extent by 15");
  return Grid(c.dim, ctl.n, L);
}

// Shooting in the unstable directions: initial data S[lambda r0 vertices, 0, sigma] + W(a), one a+ per orbit,
// bisection on the exit side of btilde = (t + 1/delta)^2 b, restarts from checkpoints when the bracket is exhausted.
inline ShootingResult shoot(const SignedConfiguration& c, double r0, const Basis& b, ShootControl ctl = {}) {
  require(c.dim == b.gs.params.d, ErrorCode::InvalidParams, "configuration and ground state dimension differ");
  require(c.dim == 1 || c.dim == 2, ErrorCode::InvalidParams, "shooting runs in d = 1, 2");
  require(r0 >= 8, ErrorCode::InvalidParams, "r0 must be at least 8");
  require(ctl.allow_inadmissible || (c.gamma > 0 && c.size() > 1), ErrorCode::NotAdmissible,
          "configuration is not admissible");
  require(ctl.t_end > 2 * ctl.output_every, ErrorCode::HorizonTooShort, "t_end shorter than two output intervals");
  if (ctl.bracket <= 0) ctl.bracket = std::pow(ctl.delta, 1.25);
  Grid g = shooting_grid(c, r0, ctl);
  Points z0 = scaled(c, r0 * c.lambda_omega).vertices;
  detail::Shooter sh(c, b, ctl, g);
  ShootingResult res;
  res.orbits = sh.orbit_list();
  FieldState base = assemble(g, b, z0, {}, c.signs);
  ModulationData md = sh.decompose_at(base, z0, {});
  const double nu = b.sd.nu_plus;
  for (int seg = 0; seg < ctl.max_segments; ++seg) {
    Segment sg;
    sg.t_start = base.t;
    double N = double(c.size());
    sg.half_width = seg == 0 ? ctl.bracket : 1.0 / ((base.t + 1 / ctl.delta) * std::sqrt(N));
    std::vector<double> A(res.orbits.size(), 0.0);
    CandidateRun best = seg == 0 ? sh.solve(base, md, A, 0, sg.half_width, &res.lower_exit, &res.upper_exit)
                                 : sh.solve(base, md, A, 0, sg.half_width);
    sg.A = best.A;
    sg.best_exit = best.exit;
    sg.runs = sh.runs() - res.total_runs;
    res.total_runs = sh.runs();
    if (seg == 0) res.a_plus_initial = best.A;
    res.segments.push_back(sg);
    if (!best.exit.exited) {
      res.history.insert(res.history.end(), best.history.begin(), best.history.end());
      res.survived = true;
      break;
    }
    double t_r = best.exit.t - ctl.restart_margin / nu;
    const FieldState* cp = nullptr;
    for (const FieldState& s : best.checkpoints)
      if (s.t > base.t + 1e-9 && s.t <= t_r) cp = &s;
    if (!cp) {
      res.history.insert(res.history.end(), best.history.begin(), best.history.end());
      break;
    }
    for (const ModulationSample& m : best.history)
      if (m.t < cp->t - 1e-9) res.history.push_back(m);
    Points zg = res.history.back().z, lg = res.history.back().ell;
    base = *cp;
    md = sh.decompose_at(base, zg, lg);
  }
  for (const ModulationSample& m : res.history) {
    res.max_eps_norm = std::max(res.max_eps_norm, m.eps_norm);
    res.max_identity_residual = std::max(res.max_identity_residual, m.identity_residual);
    res.max_equivariance = std::max(res.max_equivariance, m.equivariance);
    res.max_symmetry_defect = std::max(res.max_symmetry_defect, m.symmetry_defect);
  }
  res.horizon = res.history.empty() ? 0 : res.history.back().t;
  return res;
}

// Max relative deviation of the modulated nearest distance from the first-order reduced flow on [t_lo, t_hi].
struct ReducedComparison {
  double max_rel_dev = 0;
  double max_growth_dev = 0;  // |(r - r0) - (r_red - r0)| / max |r_red - r0|
  std::vector<double> t, r_field, r_reduced;
};

inline ReducedComparison compare_with_reduced(const std::vector<ModulationSample>& hist, const std::vector<int>& sigma,
                                              const ForceLaw& law, double alpha, double t_lo, double t_hi) {
  require(!hist.empty(), ErrorCode::InvalidParams, "empty modulation history");
  ReducedState s0;
  s0.t = hist.front().t;
  s0.y = hist.front().z;
  for (std::size_t w = 0; w < s0.y.size(); ++w) s0.y[w] += hist.front().ell[w] / (2 * alpha);
  s0.signs = sigma;
  std::vector<double> ts;
  for (const ModulationSample& m : hist)
    if (m.t > s0.t) ts.push_back(m.t);
  ReducedTrajectory tr = integrate_reduced(s0, law, alpha, hist.back().t, ts);
  ReducedComparison rc;
  const double r0 = hist.front().r;
  double scale = 0;
  std::size_t k = 0;
  for (const ModulationSample& m : hist) {
    while (k + 1 < tr.t.size() && tr.t[k] < m.t - 1e-9) ++k;
    if (m.t < t_lo - 1e-9 || m.t > t_hi + 1e-9 || std::fabs(tr.t[k] - m.t) > 1e-9) continue;
    double rr = min_pair_distance(tr.y[k]);
    rc.t.push_back(m.t);
    rc.r_field.push_back(m.r);
    rc.r_reduced.push_back(rr);
    rc.max_rel_dev = std::max(rc.max_rel_dev, std::fabs(m.r - rr) / rr);
    scale = std::max(scale, std::fabs(rr - r0));
  }
  for (std::size_t i = 0; i < rc.t.size(); ++i)
    rc.max_growth_dev = std::max(rc.max_growth_dev, std::fabs(rc.r_field[i] - rc.r_reduced[i]) / std::max(scale, 1e-300));
  return rc;
}

struct EnergyAuditRow {
  double t = 0, energy = 0, expansion = 0, gap = 0, envelope = 0, dissipation = 0, identity_residual = 0;
};

struct EnergyAudit {
  std::vector<EnergyAuditRow> rows;
  bool energy_nonincreasing = true;
  double max_identity_residual = 0;
  double max_gap_over_envelope = 0;
};

inline EnergyAudit energy_audit(const std::vector<ModulationSample>& hist, const GroundState& gs,
                                const std::vector<int>& sigma) {
  EnergyAudit a;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const ModulationSample& m = hist[i];
    EnergyAuditRow r;
    r.t = m.t;
    r.energy = m.energy;
    r.dissipation = m.dissipation;
    r.identity_residual = m.identity_residual;
    r.expansion = energy_expansion(gs, m.z, sigma);
    r.gap = std::fabs(r.energy - r.expansion);
    double q = q_star(gs, m.z), l2 = 0;
    for (const Point& l : m.ell) l2 += l.squaredNorm();
    r.envelope = (q > 0 ? q / std::fabs(std::log(q)) : 0) + m.eps_norm * m.eps_norm + l2;
    a.max_identity_residual = std::max(a.max_identity_residual, r.identity_residual);
    if (r.envelope > 0) a.max_gap_over_envelope = std::max(a.max_gap_over_envelope, r.gap / r.envelope);
    if (i > 0 && r.energy > a.rows.back().energy + 1e-12 * std::fabs(r.energy)) a.energy_nonincreasing = false;
    a.rows.push_back(r);
  }
  return a;
}

// Static audit: E(S[z, 0, sigma]) on the grid against the expansion for pairs at the given distances.
struct StaticEnergyRow {
  double R = 0, grid_energy = 0, expansion = 0, gap = 0, gap_over_qR = 0;
};

inline std::vector<StaticEnergyRow> static_energy_audit(const Basis& b, const Grid& g, const std::vector<double>& R,
                                                        const std::vector<int>& sigma) {
  std::vector<StaticEnergyRow> rows;
  Spectral sp(g);
  for (double r : R) {
    Point z1 = Point::Zero(g.d), z2 = Point::Zero(g.d);
    z1[0] = -r / 2;
    z2[0] = r / 2;
    FieldState s = assemble(g, b, {z1, z2}, {}, sigma);
    StaticEnergyRow row;
    row.R = r;
    row.grid_energy = field_energy(sp, s, b.gs.params.p).energy;
    row.expansion = energy_expansion(b.gs, {z1, z2}, sigma);
    row.gap = std::fabs(row.grid_energy - row.expansion);
    row.gap_over_qR = row.gap / (b.gs.q(r) / r);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace dkg

#endif
