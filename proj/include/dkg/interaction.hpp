#ifndef DKG_INTERACTION_HPP
#define DKG_INTERACTION_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "error.hpp"
#include "groundstate.hpp"
#include "interp.hpp"
#include "params.hpp"
#include "quadrature.hpp"

namespace dkg {

// Sum of q(|z_w - z_v|) over ordered pairs.
inline double q_star(const GroundState& gs, const Points& z) {
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = 0; j < z.size(); ++j) {
      if (i == j) continue;
      double r = (z[i] - z[j]).norm();
      require(r > 0, ErrorCode::DegenerateConfiguration, "coincident centers");
      s += gs.q(r);
    }
  return s;
}

inline double min_pair_distance(const Points& z) {
  double m = INFINITY;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = i + 1; j < z.size(); ++j) m = std::min(m, (z[i] - z[j]).norm());
  return m;
}

struct QuadValue {
  double value = 0, error = 0;
};

namespace detail {

// int Phi(|y|) q(|y + r e1|) dy; radial-angular in d >= 2, direct in d = 1.
// phi_odd selects the x1-odd weight y1/|y| (for d_1(Q^p)).
template <class Phi>
double axial_integral(const GroundState& gs, double r, Phi&& phi, bool phi_odd, int refine) {
  const int d = gs.params.d;
  const double rho_max = std::min(gs.r_max(), 40.0);
  // beyond rho_cut the weight q^{p-1} is below 1e-17 relative
  const double rho_cut = std::min(rho_max, 17 * std::log(10.0) / (gs.params.p - 1) + 6);
  const int np = static_cast<int>(std::ceil(rho_cut)) * refine;
  const GaussRule& g = gauss_legendre(8);
  if (d == 1) {
    return integrate([&](double y) {
      double w = phi(std::fabs(y)) * (phi_odd ? (y < 0 ? -1.0 : 1.0) : 1.0);
      return w * gs.q(std::fabs(y + r));
    }, -rho_max, rho_max, 160 * refine);
  }
  const double Sd2 = sphere_area(d - 1);
  const int nt = 16 * refine;
  const double ht = M_PI / nt;
  std::vector<double> ct, wt;
  for (int b = 0; b < nt; ++b)
    for (int j = 0; j < 8; ++j) {
      double th = (b + 0.5) * ht + 0.5 * ht * g.x[j], c = std::cos(th);
      ct.push_back(c);
      wt.push_back(0.5 * ht * g.w[j] * std::pow(std::sin(th), d - 2) * (phi_odd ? c : 1.0));
    }
  double total = 0;
  const double hp = rho_cut / np;
  for (int a = 0; a < np; ++a)
    for (int i = 0; i < 8; ++i) {
      double rho = (a + 0.5) * hp + 0.5 * hp * g.x[i], wr = 0.5 * hp * g.w[i];
      double f = phi(rho);
      if (f == 0) continue;
      double ang = 0;
      for (std::size_t j = 0; j < ct.size(); ++j)
        ang += wt[j] * gs.q(std::sqrt(std::max(0.0, rho * rho + r * r + 2 * rho * r * ct[j])));
      total += wr * std::pow(rho, d - 1) * f * Sd2 * ang;
    }
  return total;
}

}  // namespace detail

// <f(Q), Q(. + z)> = int Q^p(y) Q(y + z) dy
inline QuadValue pair_interaction(const GroundState& gs, const Point& z) {
  double r = z.norm();
  require(r >= 2.0, ErrorCode::ConfigurationTooClose, "pair distance below 2");
  auto phi = [&](double rho) { return std::pow(gs.q(rho), gs.params.p); };
  double a = detail::axial_integral(gs, r, phi, false, 1);
  double b = detail::axial_integral(gs, r, phi, false, 2);
  QuadValue v{b, std::fabs(a - b)};
  require(v.error <= 1e-5 * std::fabs(b), ErrorCode::QuadratureError, "pair quadrature not converged");
  return v;
}

// H_1(r e1) = int d_1(Q^p)(y) Q(y + r e1) dy
inline QuadValue force_H1(const GroundState& gs, double r, bool estimate_error = true) {
  const double p = gs.params.p;
  auto phi = [&](double rho) { return p * std::pow(gs.q(rho), p - 1) * gs.dq(rho); };
  double b = detail::axial_integral(gs, r, phi, true, estimate_error ? 2 : 1);
  if (!estimate_error) return {b, 0};
  double a = detail::axial_integral(gs, r, phi, true, 1);
  return {b, std::fabs(a - b)};
}

class InteractionKernel {
 public:
  InteractionKernel() = default;
  InteractionKernel(GroundState gs, double r_lo = 2.0, double r_hi = 25.0, double dr = 0.05)
      : gs_(std::move(gs)), r_lo_(r_lo), r_hi_(r_hi) {
    require(r_lo >= 1.0 && r_hi > r_lo + 4 * dr && dr > 0, ErrorCode::InvalidParams, "bad table range");
    g0_ = gs_.g0;
    c1_ = gs_.c1;
    int n = static_cast<int>(std::lround((r_hi - r_lo) / dr));
    std::vector<double> rs(n + 1), lg(n + 1);
    r_.resize(n + 1);
    g_.resize(n + 1);
    for (int i = 0; i <= n; ++i) {
      double r = r_lo + (r_hi - r_lo) * i / n;
      double H = force_H1(gs_, r, false).value;
      require(H > 0, ErrorCode::QuadratureError, "force not attractive-positive");
      r_[i] = rs[i] = r;
      g_[i] = H / c1_;
      lg[i] = std::log(g_[i]);
    }
    for (double r : {r_lo, 0.5 * (r_lo + r_hi), r_hi}) {
      QuadValue v = force_H1(gs_, r, true);
      quad_error_ = std::max(quad_error_, v.error / std::fabs(v.value));
    }
    require(quad_error_ <= 1e-5, ErrorCode::QuadratureError, "force quadrature not converged");
    log_g_ = CubicSpline(rs, lg);
    tail_c_ = r_hi_ * (g_.back() / (g0_ * gs_.q(r_hi_)) - 1.0);
    for (int i = 0; i <= n; ++i)
      if (r_[i] >= 8.0) fitted_C_ = std::max(fitted_C_, r_[i] * std::fabs(g_[i] / (g0_ * gs_.q(r_[i])) - 1.0));
  }

  double g(double r) const {
    require(r >= r_lo_ - 1e-12, ErrorCode::InvalidParams, "g below table range");
    if (r <= r_hi_) return std::exp(log_g_.eval(r));
    return g0_ * gs_.q(r) * (1.0 + tail_c_ / r);
  }
  double dg(double r) const {
    if (r <= r_hi_) return g(r) * log_g_.eval(r, 1);
    return g0_ * (gs_.dq(r) * (1.0 + tail_c_ / r) - gs_.q(r) * tail_c_ / (r * r));
  }

  const GroundState& ground_state() const { return gs_; }
  double g0() const { return g0_; }
  double c1() const { return c1_; }
  double r_lo() const { return r_lo_; }
  double r_hi() const { return r_hi_; }
  double fitted_C() const { return fitted_C_; }
  double quadrature_error() const { return quad_error_; }
  const std::vector<double>& table_r() const { return r_; }
  const std::vector<double>& table_g() const { return g_; }

 private:
  GroundState gs_;
  double r_lo_ = 2, r_hi_ = 25, g0_ = 0, c1_ = 0, tail_c_ = 0, fitted_C_ = 0, quad_error_ = 0;
  std::vector<double> r_, g_;
  CubicSpline log_g_;
};

inline double force_g(const InteractionKernel& k, double r) { return k.g(r); }

// max over sampled pairs of |g(r) - g(r')| / (|r - r'| max(q(r), q(r')))
inline double lipschitz_probe(const InteractionKernel& k, double a, double b, int samples = 200) {
  double worst = 0;
  for (int i = 0; i < samples; ++i) {
    double r = a + (b - a) * i / samples, s = r + 0.05 + 0.5 * (i % 7) / 7.0;
    double m = std::max(k.ground_state().q(r), k.ground_state().q(s));
    worst = std::max(worst, std::fabs(k.g(r) - k.g(s)) / ((s - r) * m));
  }
  return worst;
}

// |Omega| E(Q,0) - c1 g0 sum_{unordered pairs} s_w s_v q(|z_w - z_v|)
inline double energy_expansion(const GroundState& gs, const Points& z, const std::vector<int>& sigma) {
  require(z.size() == sigma.size(), ErrorCode::InvalidParams, "sign count mismatch");
  require(q_star(gs, z) <= 0.1, ErrorCode::ConfigurationTooClose, "q_star above 0.1");
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = i + 1; j < z.size(); ++j) s += sigma[i] * sigma[j] * gs.q((z[i] - z[j]).norm());
  return z.size() * gs.energy - gs.c1 * gs.g0 * s;
}

// Remainder of <G, grad Q_w> against the pair-force sum, G = f(sum Q) - sum f(Q); d <= 2 by box quadrature.
struct GResidualReport {
  double residual = 0;   // max over w, j
  double q_star = 0;
  double exponent = 0;   // ln residual / ln q_star
  double theta_a = 0, ratio_a = 0;  // theta = min(p - 1, 2)
  double theta_b = 0, ratio_b = 0;  // theta = min(p - 1, 5/4)
};

inline GResidualReport g_residual(const InteractionKernel& k, const Points& z, const std::vector<int>& sigma,
                                  double panel = 0.5) {
  const GroundState& gs = k.ground_state();
  const int d = gs.params.d;
  const double p = gs.params.p;
  require(d <= 2, ErrorCode::InvalidParams, "box quadrature only for d <= 2");
  require(z.size() == sigma.size() && z.size() >= 2, ErrorCode::InvalidParams, "need >= 2 signed centers");
  Eigen::VectorXd lo = z[0], hi = z[0];
  for (const Point& c : z) {
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }
  lo.array() -= 20.0;
  hi.array() += 20.0;
  const GaussRule& g = gauss_legendre(8);
  std::vector<std::vector<double>> xs(d), ws(d);
  for (int a = 0; a < d; ++a) {
    int np = static_cast<int>(std::ceil((hi[a] - lo[a]) / panel));
    double hp = (hi[a] - lo[a]) / np;
    for (int b = 0; b < np; ++b)
      for (int i = 0; i < 8; ++i) {
        xs[a].push_back(lo[a] + (b + 0.5) * hp + 0.5 * hp * g.x[i]);
        ws[a].push_back(0.5 * hp * g.w[i]);
      }
  }
  const std::size_t n = z.size();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, d);
  std::size_t n1 = d == 2 ? xs[1].size() : 1;
  Eigen::VectorXd x(d);
  for (std::size_t i0 = 0; i0 < xs[0].size(); ++i0)
    for (std::size_t i1 = 0; i1 < n1; ++i1) {
      x[0] = xs[0][i0];
      double w = ws[0][i0];
      if (d == 2) {
        x[1] = xs[1][i1];
        w *= ws[1][i1];
      }
      double S = 0, sf = 0;
      std::vector<double> rr(n), qq(n);
      for (std::size_t o = 0; o < n; ++o) {
        rr[o] = (x - z[o]).norm();
        qq[o] = sigma[o] * gs.q(rr[o]);
        S += qq[o];
        sf += nonlin(qq[o], p);
      }
      double G = nonlin(S, p) - sf;
      for (std::size_t o = 0; o < n; ++o) {
        if (rr[o] < 1e-14) continue;
        double dq = sigma[o] * gs.dq(rr[o]);
        for (int j = 0; j < d; ++j) acc(o, j) += w * G * dq * (x[j] - z[o][j]) / rr[o];
      }
    }
  GResidualReport rep;
  rep.q_star = q_star(gs, z);
  for (std::size_t o = 0; o < n; ++o) {
    Eigen::VectorXd pred = Eigen::VectorXd::Zero(d);
    for (std::size_t v = 0; v < n; ++v) {
      if (v == o) continue;
      Eigen::VectorXd dz = z[o] - z[v];
      double r = dz.norm();
      pred += k.c1() * sigma[o] * sigma[v] * dz / r * k.g(r);
    }
    rep.residual = std::max(rep.residual, (acc.row(o).transpose() - pred).cwiseAbs().maxCoeff());
  }
  rep.exponent = std::log(rep.residual) / std::log(rep.q_star);
  rep.theta_a = std::min(p - 1, 2.0);
  rep.theta_b = std::min(p - 1, 1.25);
  rep.ratio_a = rep.residual / std::pow(rep.q_star, rep.theta_a);
  rep.ratio_b = rep.residual / std::pow(rep.q_star, rep.theta_b);
  return rep;
}

}  // namespace dkg

#endif
