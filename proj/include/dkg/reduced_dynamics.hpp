#ifndef DKG_REDUCED_DYNAMICS_HPP
#define DKG_REDUCED_DYNAMICS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "configurations.hpp"
#include "error.hpp"
#include "interaction.hpp"
#include "ode.hpp"
#include "params.hpp"

namespace dkg {

// Pair force law g(r), with its validity floor.
struct ForceLaw {
  std::function<double(double)> g;
  double r_lo = 2.0;
  std::string kind;

  static ForceLaw from_kernel(const InteractionKernel& k) {
    const InteractionKernel* kp = &k;
    return {[kp](double r) { return kp->g(r); }, k.r_lo(), "kernel"};
  }
  // A r^{-m} e^{-r}
  static ForceLaw synthetic(double A, double m, double r_lo = 2.0) {
    return {[A, m](double r) { return A * std::pow(r, -m) * std::exp(-r); }, r_lo,
            m == 0 ? "exponential" : "power_exponential"};
  }
};

struct ReducedState {
  double t = 0;
  Points y;    // centers (z in second-order mode)
  Points ell;  // velocities, second-order mode only
  std::vector<int> signs;

  bool second_order() const { return !ell.empty(); }
  // y = z + ell/(2 alpha)
  Points shifted_centers(double alpha) const {
    if (!second_order()) return y;
    Points out = y;
    for (std::size_t i = 0; i < y.size(); ++i) out[i] += ell[i] / (2 * alpha);
    return out;
  }
};

namespace detail {

inline Eigen::VectorXd pack(const Points& a, const Points& b) {
  std::size_t n = a.size(), d = n ? a[0].size() : 0;
  Eigen::VectorXd v((a.size() + b.size()) * d);
  for (std::size_t i = 0; i < a.size(); ++i) v.segment(i * d, d) = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) v.segment((n + i) * d, d) = b[i];
  return v;
}

inline void unpack(const Eigen::VectorXd& v, std::size_t n, std::size_t d, Points& a, Points* b) {
  a.resize(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = v.segment(i * d, d);
  if (b) {
    b->resize(n);
    for (std::size_t i = 0; i < n; ++i) (*b)[i] = v.segment((n + i) * d, d);
  }
}

inline double min_distance_packed(const Eigen::VectorXd& v, std::size_t n, std::size_t d) {
  double m = INFINITY;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m = std::min(m, (v.segment(i * d, d) - v.segment(j * d, d)).norm());
  return m;
}

// F_w = -sum_v s_w s_v (y_w - y_v)/|y_w - y_v| g(|y_w - y_v|)
struct PairForces {
  const ForceLaw* law;
  std::vector<int> signs;
  std::size_t n, d;
  void operator()(const Eigen::VectorXd& y, Eigen::VectorXd& f) const {
    f.setZero(n * d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        Eigen::VectorXd dz = y.segment(i * d, d) - y.segment(j * d, d);
        double r = dz.norm();
        // below r_lo the run is stopped as a collision; the step that crosses sees g frozen at r_lo
        Eigen::VectorXd fij = -signs[i] * signs[j] * law->g(std::max(r, law->r_lo)) / r * dz;
        f.segment(i * d, d) += fij;
        f.segment(j * d, d) -= fij;
      }
  }
};

struct FirstOrderRhs {
  PairForces F;
  double alpha;
  Eigen::VectorXd operator()(double, const Eigen::VectorXd& y) const {
    Eigen::VectorXd f;
    F(y, f);
    return f / (2 * alpha);
  }
};

struct SecondOrderRhs {
  PairForces F;
  double alpha;
  Eigen::VectorXd operator()(double, const Eigen::VectorXd& s) const {
    std::size_t m = F.n * F.d;
    Eigen::VectorXd f, out(2 * m);
    F(s.head(m), f);
    out.head(m) = s.tail(m);
    out.tail(m) = -2 * alpha * s.tail(m) + f;
    return out;
  }
};

}  // namespace detail

struct ReducedTrajectory {
  std::vector<double> t;
  std::vector<Points> y, ell;
  bool collided = false;
  double collision_time = INFINITY;
};

// Integrate to t_end, sampling at the given times (sorted, within (t0, t_end]).
// Collisions stop the run and are reported rather than thrown.
inline ReducedTrajectory integrate_reduced(const ReducedState& s0, const ForceLaw& law, double alpha, double t_end,
                                           const std::vector<double>& samples, OdeTolerances tol = {}) {
  require(alpha > 0, ErrorCode::InvalidParams, "alpha must be positive");
  require(!s0.y.empty() && s0.signs.size() == s0.y.size(), ErrorCode::InvalidParams, "bad reduced state");
  const std::size_t n = s0.y.size(), d = s0.y[0].size();
  require(min_pair_distance(s0.y) >= law.r_lo || n == 1, ErrorCode::CollisionDetected, "initial distance below r_lo");
  detail::PairForces F{&law, s0.signs, n, d};
  ReducedTrajectory tr;
  auto record = [&](double t, const Eigen::VectorXd& v) {
    Points a, b;
    detail::unpack(v, n, d, a, s0.second_order() ? &b : nullptr);
    tr.t.push_back(t);
    tr.y.push_back(a);
    if (s0.second_order()) tr.ell.push_back(b);
  };
  auto run = [&](auto rhs) {
    DormandPrince<decltype(rhs)> ode(rhs, s0.t, detail::pack(s0.y, s0.ell), tol);
    record(s0.t, ode.y());
    std::size_t k = 0;
    while (k < samples.size() && samples[k] <= s0.t) ++k;
    while (ode.t() < t_end) {
      double target = k < samples.size() ? std::min(samples[k], t_end) : t_end;
      double t_prev = ode.t();
      Eigen::VectorXd y_prev = ode.y();
      ode.step(target);
      if (n > 1) {
        double m1 = detail::min_distance_packed(ode.y(), n, d);
        if (m1 < law.r_lo) {
          double m0 = detail::min_distance_packed(y_prev, n, d);
          tr.collided = true;
          tr.collision_time = t_prev + (ode.t() - t_prev) * (m0 - law.r_lo) / (m0 - m1);
          record(ode.t(), ode.y());
          return;
        }
      }
      if (k < samples.size() && ode.t() == samples[k]) {
        record(ode.t(), ode.y());
        ++k;
      }
    }
    if (tr.t.back() != ode.t()) record(ode.t(), ode.y());
  };
  if (s0.second_order())
    run(detail::SecondOrderRhs{F, alpha});
  else
    run(detail::FirstOrderRhs{F, alpha});
  return tr;
}

inline ReducedState step_reduced(const ReducedState& s, const ForceLaw& law, double alpha, double dt,
                                 OdeTolerances tol = {}) {
  ReducedTrajectory tr = integrate_reduced(s, law, alpha, s.t + dt, {}, tol);
  require(!tr.collided, ErrorCode::CollisionDetected, "pair distance below r_lo");
  ReducedState out = s;
  out.t = tr.t.back();
  out.y = tr.y.back();
  if (s.second_order()) out.ell = tr.ell.back();
  return out;
}

inline ReducedState step_first_order(const ReducedState& s, const ForceLaw& law, double alpha, double dt,
                                     OdeTolerances tol = {}) {
  require(!s.second_order(), ErrorCode::InvalidParams, "state carries velocities");
  return step_reduced(s, law, alpha, dt, tol);
}

inline ReducedState step_second_order(const ReducedState& s, const ForceLaw& law, double alpha, double dt,
                                      OdeTolerances tol = {}) {
  require(s.second_order(), ErrorCode::InvalidParams, "state has no velocities");
  return step_reduced(s, law, alpha, dt, tol);
}

inline std::vector<double> log_times(double t_lo, double t_hi, int per_decade) {
  std::vector<double> t;
  int n = static_cast<int>(std::ceil(std::log10(t_hi / t_lo) * per_decade));
  for (int i = 0; i <= n; ++i) t.push_back(t_lo * std::pow(t_hi / t_lo, double(i) / n));
  return t;
}

struct ScalarTrajectory {
  std::vector<double> t, r;
};

// Nearest-neighbour distance r(t) of the self-similar solution y = r lambda_Omega vertices, integrated in w = e^r.
// All pairs enter, so the reduction is exact; for large r it approaches r' = gamma_raw g(r) / (2 alpha).
inline ScalarTrajectory integrate_symmetric(const SignedConfiguration& c, const ForceLaw& law, double alpha,
                                            double r0, double t_end, int per_decade = 40, OdeTolerances tol = {}) {
  require(c.gamma > 0 && c.gamma_raw > 0, ErrorCode::NotAdmissible, "configuration has gamma <= 0");
  require(r0 >= law.r_lo, ErrorCode::InvalidParams, "r0 below r_lo");
  std::size_t w = 0;
  for (std::size_t i = 1; i < c.size(); ++i)
    if (c.vertices[i].norm() > c.vertices[w].norm()) w = i;
  const double lam = c.lambda_omega;
  const Point& om = c.vertices[w];
  // r' = (1/lambda) s', s' = F_w(sV).w / (2 alpha |w|^2), s = lambda r
  auto rdot = [&, om](double r) {
    double s = lam * r, acc = 0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (j == w) continue;
      Point dz = om - c.vertices[j];
      double dn = dz.norm();
      acc += -c.signs[w] * c.signs[j] * law.g(s * dn) * dz.dot(om) / dn;
    }
    return acc / (2 * alpha * om.squaredNorm() * lam);
  };
  auto rhs = [&](double, const Eigen::VectorXd& wv) {
    Eigen::VectorXd f(1);
    f[0] = rdot(std::log(wv[0])) * wv[0];
    return f;
  };
  Eigen::VectorXd w0(1);
  w0[0] = std::exp(r0);
  DormandPrince<decltype(rhs)> ode(rhs, 0.0, w0, tol);
  ScalarTrajectory tr;
  tr.t.push_back(0);
  tr.r.push_back(r0);
  for (double t : log_times(std::min(1e-2, t_end), t_end, per_decade)) {
    ode.integrate_to(t);
    tr.t.push_back(t);
    tr.r.push_back(std::log(ode.y()[0]));
  }
  return tr;
}

struct AsymptoticFit {
  double lambda_fit = 0;      // coefficient of ln r ~ ln ln t in r - ln t
  double lambda_lnln = 0;     // same coefficient from the basis {lnln t, 1, lnln t/ln t, 1/ln t}
  double c_fit = 0;
  double t_lo = 0, t_hi = 0;
  double residual = 0;        // sup relative deviation of the c-regression on the window
  double s_lo = 0, s_hi = 0;  // s(t) = r - ln t + m lnln t - c_fit at the window ends
  double s_predicted = 0;     // m^2 lnln t / ln t at t_hi
};

// Fit r(t) = ln t - m ln ln t + c + s(t), m = (d-1)/2, on [t_lo, t_hi].
// c from the regression of Phi(r) = int^r e^s s^m ds against t (exact affine law for g = A r^{-m} e^{-r}).
inline AsymptoticFit fit_asymptotics(const ScalarTrajectory& tr, int d, double t_lo = 1e4, double t_hi = -1) {
  if (t_hi <= 0) t_hi = tr.t.back();
  require(tr.t.back() >= 1e6 && t_hi >= 100 * t_lo && t_lo > 1, ErrorCode::WindowTooShort,
          "need t >= 1e6 and a window of two decades");
  const double m = 0.5 * (d - 1);
  std::vector<double> ts, rs;
  for (std::size_t i = 0; i < tr.t.size(); ++i)
    if (tr.t[i] >= t_lo * (1 - 1e-12) && tr.t[i] <= t_hi * (1 + 1e-12)) {
      ts.push_back(tr.t[i]);
      rs.push_back(tr.r[i]);
    }
  require(ts.size() >= 8, ErrorCode::WindowTooShort, "too few samples in window");
  // Phi(r) e^{-r} r^{-m} = sum_k (-1)^k m(m-1)...(m-k+1) r^{-k}, truncated at the smallest term
  auto phi_scaled = [m](double r) {
    double s = 1, term = 1;
    for (int k = 1; k < 30; ++k) {
      double next = -term * (m - k + 1) / r;
      if (std::fabs(next) >= std::fabs(term) || next == 0) break;
      term = next;
      s += term;
    }
    return s;
  };
  const std::size_t N = ts.size();
  // regress Phi(r_i)/t_i on {1, 1/t_i}: slope A is the constant term (well scaled)
  Eigen::MatrixXd M(N, 2);
  Eigen::VectorXd b(N);
  for (std::size_t i = 0; i < N; ++i) {
    double lphi = rs[i] + m * std::log(rs[i]) + std::log(phi_scaled(rs[i]));
    M(i, 0) = 1;
    M(i, 1) = 1 / ts[i];
    b[i] = std::exp(lphi - std::log(ts[i]));
  }
  Eigen::VectorXd ab = M.colPivHouseholderQr().solve(b);
  AsymptoticFit f;
  f.c_fit = std::log(ab[0]);
  f.residual = ((M * ab - b).array() / ab[0]).abs().maxCoeff();
  f.t_lo = ts.front();
  f.t_hi = ts.back();
  // free fit of r - ln t on {ln r, 1/r, 1, 1/t}
  Eigen::MatrixXd B(N, 4);
  Eigen::VectorXd y(N);
  for (std::size_t i = 0; i < N; ++i) {
    B(i, 0) = std::log(rs[i]);
    B(i, 1) = 1 / rs[i];
    B(i, 2) = 1;
    B(i, 3) = 1 / ts[i];
    y[i] = rs[i] - std::log(ts[i]);
  }
  f.lambda_fit = B.colPivHouseholderQr().solve(y)[0];
  Eigen::MatrixXd C(N, 4);
  for (std::size_t i = 0; i < N; ++i) {
    double L = std::log(ts[i]), LL = std::log(L);
    C(i, 0) = LL;
    C(i, 1) = 1;
    C(i, 2) = LL / L;
    C(i, 3) = 1 / L;
  }
  f.lambda_lnln = C.colPivHouseholderQr().solve(y)[0];
  auto s_at = [&](std::size_t i) { return rs[i] - std::log(ts[i]) + m * std::log(std::log(ts[i])) - f.c_fit; };
  f.s_lo = s_at(0);
  f.s_hi = s_at(N - 1);
  double L = std::log(ts.back());
  f.s_predicted = m * m * std::log(L) / L;
  return f;
}

// Same-sign runs: distance records, collision, episodes where the minimal distance grows.
struct CollapseReport {
  std::vector<double> t, min_distance, max_distance, qstar;
  bool collided = false;
  double collision_time = INFINITY;
  bool max_distance_nonincreasing = true;
  std::vector<std::pair<double, double>> min_increase_intervals;
  double max_min_increase = 0;
};

inline CollapseReport collapse_experiment(const Points& y0, const std::vector<int>& signs, const ForceLaw& law,
                                          double alpha, double t_max, int samples = 2000, bool second_order = false,
                                          const GroundState* gs = nullptr) {
  require(!signs.empty() && std::all_of(signs.begin(), signs.end(), [&](int s) { return s == signs[0]; }),
          ErrorCode::InvalidParams, "collapse experiment needs equal signs");
  ReducedState s;
  s.y = y0;
  s.signs = signs;
  if (second_order) s.ell.assign(y0.size(), Point::Zero(y0[0].size()));
  std::vector<double> ts;
  for (int i = 1; i <= samples; ++i) ts.push_back(t_max * i / samples);
  ReducedTrajectory tr = integrate_reduced(s, law, alpha, t_max, ts);
  CollapseReport rep;
  rep.collided = tr.collided;
  rep.collision_time = tr.collision_time;
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    double mx = 0;
    for (std::size_t a = 0; a < y0.size(); ++a)
      for (std::size_t b = a + 1; b < y0.size(); ++b) mx = std::max(mx, (tr.y[i][a] - tr.y[i][b]).norm());
    rep.t.push_back(tr.t[i]);
    rep.min_distance.push_back(min_pair_distance(tr.y[i]));
    rep.max_distance.push_back(mx);
    rep.qstar.push_back(gs ? q_star(*gs, tr.y[i]) : 0.0);
  }
  double start = -1;
  for (std::size_t i = 1; i < rep.t.size(); ++i) {
    if (rep.max_distance[i] > rep.max_distance[i - 1] * (1 + 1e-12)) rep.max_distance_nonincreasing = false;
    double inc = rep.min_distance[i] - rep.min_distance[i - 1];
    bool up = inc > 1e-12 * rep.min_distance[i - 1];
    if (up) {
      rep.max_min_increase = std::max(rep.max_min_increase, inc);
      if (start < 0) start = rep.t[i - 1];
    } else if (start >= 0) {
      rep.min_increase_intervals.emplace_back(start, rep.t[i - 1]);
      start = -1;
    }
  }
  if (start >= 0) rep.min_increase_intervals.emplace_back(start, rep.t.back());
  return rep;
}

}  // namespace dkg

#endif
