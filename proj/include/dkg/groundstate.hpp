#ifndef DKG_GROUNDSTATE_HPP
#define DKG_GROUNDSTATE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "error.hpp"
#include "interp.hpp"
#include "ode.hpp"
#include "params.hpp"
#include "quadrature.hpp"

namespace dkg {

// sqrt(2/pi) r^{-(d-2)/2} K_{|d-2|/2}(r) ~ r^{-(d-1)/2} e^{-r}: decaying solution of the linear radial equation.
inline double bessel_tail(int d, double r, int k = 0) {
  double mu = 0.5 * (d - 2), nu = std::fabs(mu);
  double pre = std::sqrt(2.0 / M_PI) * std::pow(r, -mu);
  if (r > 600.0) {  // std::cyl_bessel_k underflows
    double lk = 0.5 * std::log(M_PI / (2 * r)) - r + std::log1p((4 * nu * nu - 1) / (8 * r));
    double v = pre * std::exp(lk);
    return k == 0 ? v : v * (-mu / r - 1.0 - 0.5 / r);
  }
  double K = std::cyl_bessel_k(nu, r);
  if (k == 0) return pre * K;
  double dK = -0.5 * (std::cyl_bessel_k(std::fabs(nu - 1), r) + std::cyl_bessel_k(nu + 1, r));
  return pre * (dK - mu / r * K);
}

struct GroundState {
  ModelParams params;
  std::vector<double> r_grid, q_values, dq_values;
  double kappa = 0, c1 = 0, g0 = 0;
  double q0 = 0;
  double kappa_match = 0;   // amplitude of the matched Bessel tail
  double tail_coeff = 0;    // C in ln q + r + m ln r = ln kappa + C/r + ...
  double kappa_spread = 0;  // max deviation of the tail fit
  double energy = 0;        // E(Q, 0)
  QuinticHermite interp;

  double r_max() const { return r_grid.back(); }

  // ODE right side for q''
  double d2q_from(double r, double q, double dq) const {
    double rest = q - nonlin(q, params.p);
    if (r < 1e-10) return (q0 - nonlin(q0, params.p)) / params.d;
    return rest - (params.d - 1) * dq / r;
  }

  double q(double r) const {
    r = std::fabs(r);
    if (r <= r_max()) return interp.eval(r, 0);
    return q_values.back() * bessel_tail(params.d, r) / bessel_tail(params.d, r_max());
  }
  double dq(double r) const {
    double s = r < 0 ? -1.0 : 1.0;
    r = std::fabs(r);
    if (r <= r_max()) return s * interp.eval(r, 1);
    return s * q_values.back() * bessel_tail(params.d, r, 1) / bessel_tail(params.d, r_max());
  }
  double d2q(double r) const {
    r = std::fabs(r);
    if (r < 1e-10) return d2q_from(0, q0, 0);
    return d2q_from(r, q(r), dq(r));
  }
};

inline double eval_q(const GroundState& gs, double r) { return gs.q(r); }

namespace detail {

struct RadialRhs {
  int d;
  double p;
  Eigen::VectorXd operator()(double r, const Eigen::VectorXd& y) const {
    Eigen::VectorXd f(2);
    f[0] = y[1];
    f[1] = y[0] - nonlin(y[0], p) - (d - 1) * y[1] / r;
    return f;
  }
};

inline Eigen::VectorXd series_start(int d, double p, double a, double r) {
  double A = (a - nonlin(a, p)) / (2.0 * d);
  double B = (1.0 - nonlin_deriv(a, p)) * A / (4.0 * (d + 2));
  Eigen::VectorXd y(2);
  y << a + A * r * r + B * r * r * r * r, 2 * A * r + 4 * B * r * r * r;
  return y;
}

// +1 overshoot (crosses zero), -1 undershoot (turns up or stays positive); r_event where decided.
inline int classify_shot(int d, double p, double a, double r_end, double eps0, double& r_event) {
  OdeTolerances tol;
  tol.rtol = 1e-12;
  tol.atol = 1e-300;
  DormandPrince<RadialRhs> ode(RadialRhs{d, p}, eps0, series_start(d, p, a, eps0), tol);
  while (ode.t() < r_end) {
    ode.step(r_end);
    if (ode.y()[0] < 0) {
      r_event = ode.t();
      return 1;
    }
    if (ode.y()[1] > 0) {
      r_event = ode.t();
      return -1;
    }
  }
  r_event = r_end;
  return -1;
}

}  // namespace detail

inline void compute_constants_inplace(GroundState& gs);

// Bisection on q(0) followed by a two-sided Newton match (a, kappa) at r_m.
inline GroundState solve_ground_state(const ModelParams& params, double r_max = 40.0, double tol = 1e-10,
                                      double h = 0.005) {
  params.validate();
  require(r_max >= 10.0 && std::isfinite(r_max), ErrorCode::InvalidParams, "r_max must be >= 10");
  require(tol > 0 && h > 0 && h < 0.1, ErrorCode::InvalidParams, "bad tolerances");
  const int d = params.d;
  const double p = params.p;
  const double eps0 = std::min(1e-3, 0.25 * h);
  double r_ev = 0;

  double lo = 1.0, hi = 10.0;
  while (detail::classify_shot(d, p, hi, r_max, eps0, r_ev) < 0) {
    lo = hi;
    hi *= 2.0;
    require(hi <= 1e4, ErrorCode::NoConvergence, "no overshooting amplitude below 1e4");
  }
  for (int it = 0; it < 200 && hi - lo > 4e-16 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (detail::classify_shot(d, p, mid, r_max, eps0, r_ev) > 0 ? hi : lo) = mid;
  }
  double a = 0.5 * (lo + hi);
  double r_lo = 0, r_hi = 0;
  detail::classify_shot(d, p, lo, r_max, eps0, r_lo);
  detail::classify_shot(d, p, hi, r_max, eps0, r_hi);
  double r_good = std::max(2.5, std::min(r_lo, r_hi) - 6.0);

  OdeTolerances otol;
  otol.rtol = std::min(1e-12, 0.01 * tol);
  otol.atol = 1e-300;

  h = std::min(h, 0.04 * std::pow(a, -0.5 * (p - 1)));  // resolve the core width
  const long n_nodes = std::lround(r_max / h);
  h = r_max / n_nodes;
  const long i_m = std::max(1L, std::lround(2.0 / h));
  const double r_m = i_m * h;

  auto outward = [&](double aa, double r_stop) {
    DormandPrince<detail::RadialRhs> ode(detail::RadialRhs{d, p}, eps0, detail::series_start(d, p, aa, eps0), otol);
    ode.integrate_to(r_stop);
    return ode.y();
  };
  auto inward = [&](double kap) {
    Eigen::VectorXd y0(2);
    y0 << kap * bessel_tail(d, r_max), kap * bessel_tail(d, r_max, 1);
    DormandPrince<detail::RadialRhs> ode(detail::RadialRhs{d, p}, r_max, y0, otol);
    ode.integrate_to(r_m);
    return ode.y();
  };

  double kap = outward(a, r_good)[0] / bessel_tail(d, r_good);
  auto residual = [&](double aa, double kk) {
    Eigen::Vector2d f = (outward(aa, r_m) - inward(kk)).head<2>();
    return f;
  };
  Eigen::Vector2d F = residual(a, kap);
  bool ok = false;
  for (int it = 0; it < 40; ++it) {
    if (F.norm() < 1e-13 * std::max(1.0, a)) {
      ok = true;
      break;
    }
    double da = 1e-7 * a, dk = 1e-7 * kap;
    Eigen::Matrix2d J;
    J.col(0) = (residual(a + da, kap) - F) / da;
    J.col(1) = (residual(a, kap + dk) - F) / dk;
    Eigen::Vector2d step = J.fullPivLu().solve(-F);
    double lam = 1.0;
    for (int ls = 0; ls < 30; ++ls) {
      Eigen::Vector2d Fn = residual(a + lam * step[0], kap + lam * step[1]);
      if (Fn.norm() < F.norm() || ls == 29) {
        a += lam * step[0];
        kap += lam * step[1];
        F = Fn;
        break;
      }
      lam *= 0.5;
    }
  }
  require(ok, ErrorCode::NoConvergence, "two-sided match did not converge");

  GroundState gs;
  gs.params = params;
  gs.q0 = a;
  gs.kappa_match = kap;
  gs.r_grid.resize(n_nodes + 1);
  gs.q_values.resize(n_nodes + 1);
  gs.dq_values.resize(n_nodes + 1);
  for (long i = 0; i <= n_nodes; ++i) gs.r_grid[i] = i * h;
  gs.q_values[0] = a;
  gs.dq_values[0] = 0;
  {
    DormandPrince<detail::RadialRhs> ode(detail::RadialRhs{d, p}, eps0, detail::series_start(d, p, a, eps0), otol);
    for (long i = 1; i <= i_m; ++i) {
      ode.integrate_to(gs.r_grid[i]);
      gs.q_values[i] = ode.y()[0];
      gs.dq_values[i] = ode.y()[1];
    }
  }
  {
    Eigen::VectorXd y0(2);
    y0 << kap * bessel_tail(d, r_max), kap * bessel_tail(d, r_max, 1);
    DormandPrince<detail::RadialRhs> ode(detail::RadialRhs{d, p}, r_max, y0, otol);
    gs.q_values[n_nodes] = y0[0];
    gs.dq_values[n_nodes] = y0[1];
    for (long i = n_nodes - 1; i >= i_m; --i) {
      ode.integrate_to(gs.r_grid[i]);
      if (i == i_m) {
        gs.q_values[i] = 0.5 * (gs.q_values[i] + ode.y()[0]);
        gs.dq_values[i] = 0.5 * (gs.dq_values[i] + ode.y()[1]);
      } else {
        gs.q_values[i] = ode.y()[0];
        gs.dq_values[i] = ode.y()[1];
      }
    }
  }
  std::vector<double> d2(n_nodes + 1);
  for (long i = 0; i <= n_nodes; ++i) d2[i] = gs.d2q_from(gs.r_grid[i], gs.q_values[i], gs.dq_values[i]);
  gs.interp = QuinticHermite(0.0, h, gs.q_values, gs.dq_values, d2);
  compute_constants_inplace(gs);
  return gs;
}

// Rebuild interpolation from stored tables (import path).
inline void rebuild_interp(GroundState& gs) {
  require(gs.r_grid.size() >= 2 && gs.r_grid.front() == 0.0, ErrorCode::InvalidParams, "grid must start at 0");
  double h = gs.r_grid[1] - gs.r_grid[0];
  for (std::size_t i = 1; i < gs.r_grid.size(); ++i)
    require(std::fabs(gs.r_grid[i] - i * h) < 1e-9 * (1 + gs.r_grid[i]), ErrorCode::InvalidParams,
            "grid must be uniform");
  gs.q0 = gs.q_values[0];
  std::vector<double> d2(gs.r_grid.size());
  for (std::size_t i = 0; i < d2.size(); ++i) d2[i] = gs.d2q_from(gs.r_grid[i], gs.q_values[i], gs.dq_values[i]);
  gs.interp = QuinticHermite(0.0, h, gs.q_values, gs.dq_values, d2);
}

// Integral of f(r) r^{d-1} dr over [0, r_max] on the node cells.
template <class F>
double radial_integral(const GroundState& gs, F&& f) {
  const int d = gs.params.d;
  const GaussRule& g = gauss_legendre(7);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < gs.r_grid.size(); ++i) {
    double a = gs.r_grid[i], b = gs.r_grid[i + 1], c = 0.5 * (a + b), hw = 0.5 * (b - a), acc = 0;
    for (int k = 0; k < 7; ++k) {
      double r = c + hw * g.x[k];
      acc += g.w[k] * f(r) * std::pow(r, d - 1);
    }
    s += hw * acc;
  }
  return s;
}

// int_{S^{d-1}} e^{-r w_1} dw
inline double sphere_exp_average(int d, double r) {
  if (d == 1) return 2.0 * std::cosh(r);
  if (r < 1e-8) return sphere_area(d);
  return std::pow(2 * M_PI, 0.5 * d) * std::pow(r, 1.0 - 0.5 * d) * std::cyl_bessel_i(0.5 * d - 1.0, r);
}

struct GroundStateConstants {
  double kappa, c1, g0, tail_coeff, spread;
};

inline GroundStateConstants compute_constants(const GroundState& gs) {
  const int d = gs.params.d;
  const double p = gs.params.p, S = sphere_area(d);
  GroundStateConstants k{};
  k.c1 = S / d * radial_integral(gs, [&](double r) { double v = gs.interp.eval(r, 1); return v * v; });
  require(k.c1 > 0 && std::isfinite(k.c1), ErrorCode::QuadratureError, "c1 not positive");
  double num = radial_integral(gs, [&](double r) {
    return std::pow(gs.interp.eval(r, 0), p) * sphere_exp_average(d, r);
  });
  k.g0 = num / k.c1;
  // ln q + r + m ln r on [r_max/2, 3 r_max/4] against 1, 1/r, 1/r^2
  const double m = 0.5 * (d - 1), R = gs.r_max();
  std::vector<double> rs, ys;
  for (std::size_t i = 0; i < gs.r_grid.size(); ++i) {
    double r = gs.r_grid[i];
    if (r >= 0.5 * R && r <= 0.75 * R) {
      rs.push_back(r);
      ys.push_back(std::log(gs.q_values[i]) + r + m * std::log(r));
    }
  }
  require(rs.size() >= 8, ErrorCode::FitUnstable, "tail window too small");
  Eigen::MatrixXd A(rs.size(), 3);
  Eigen::VectorXd b(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    A(i, 0) = 1;
    A(i, 1) = 1 / rs[i];
    A(i, 2) = 1 / (rs[i] * rs[i]);
    b[i] = ys[i];
  }
  Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  k.kappa = std::exp(c[0]);
  k.tail_coeff = c[1];
  k.spread = (A * c - b).cwiseAbs().maxCoeff();
  require(std::isfinite(k.kappa) && k.spread <= 1e-3, ErrorCode::FitUnstable, "tail fit spread too large");
  return k;
}

inline void compute_constants_inplace(GroundState& gs) {
  GroundStateConstants k = compute_constants(gs);
  gs.kappa = k.kappa;
  gs.c1 = k.c1;
  gs.g0 = k.g0;
  gs.tail_coeff = k.tail_coeff;
  gs.kappa_spread = k.spread;
  const double p = gs.params.p;
  gs.energy = 0.5 * sphere_area(gs.params.d) * radial_integral(gs, [&](double r) {
    double q = gs.interp.eval(r, 0), dq = gs.interp.eval(r, 1);
    return dq * dq + q * q - 2.0 * nonlin_prim(q, p);
  });
}

// Max |q'' + (d-1)/r q' - q + q^p| / q(0)^p at cell midpoints, from the interpolant.
inline double ode_residual(const GroundState& gs) {
  double worst = 0, scale = std::pow(gs.q0, gs.params.p);
  for (std::size_t i = 0; i + 1 < gs.r_grid.size(); ++i) {
    double r = 0.5 * (gs.r_grid[i] + gs.r_grid[i + 1]);
    double q = gs.interp.eval(r, 0), dq = gs.interp.eval(r, 1), d2 = gs.interp.eval(r, 2);
    worst = std::max(worst, std::fabs(d2 + (gs.params.d - 1) * dq / r - q + nonlin(q, gs.params.p)));
  }
  return worst / scale;
}

inline bool is_monotone_decreasing(const GroundState& gs) {
  for (std::size_t i = 1; i < gs.q_values.size(); ++i)
    if (!(gs.q_values[i] < gs.q_values[i - 1]) || gs.q_values[i] <= 0) return false;
  return true;
}

}  // namespace dkg

#endif
