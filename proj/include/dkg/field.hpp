#ifndef DKG_FIELD_HPP
#define DKG_FIELD_HPP

#include <fftw3.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include "error.hpp"
#include "params.hpp"

namespace dkg {

using Field = Eigen::VectorXd;

// Periodic box [-L, L)^d, n points per axis, flat index j*n + i (i along x1).
struct Grid {
  int d = 1;
  int n = 1024;
  double L = 40;

  Grid() = default;
  Grid(int d_, int n_, double L_) : d(d_), n(n_), L(L_) {
    require(d == 1 || d == 2, ErrorCode::InvalidParams, "field grid supports d = 1, 2");
    require(n >= 8 && n % 2 == 0, ErrorCode::InvalidParams, "grid size must be even and >= 8");
    require(L > 0, ErrorCode::InvalidParams, "box half-width must be positive");
  }

  double h() const { return 2 * L / n; }
  double cell() const { return std::pow(h(), d); }
  std::size_t size() const { return d == 1 ? n : std::size_t(n) * n; }
  double coord(int i) const { return -L + i * h(); }
  Point point(std::size_t idx) const {
    Point x(d);
    x[0] = coord(int(idx % n));
    if (d == 2) x[1] = coord(int(idx / n));
    return x;
  }
  // nearest periodic image of x - z
  Point displacement(std::size_t idx, const Point& z) const {
    Point dx = point(idx) - z;
    for (int k = 0; k < d; ++k) dx[k] -= 2 * L * std::round(dx[k] / (2 * L));
    return dx;
  }
  double dot(const Field& a, const Field& b) const { return a.dot(b) * cell(); }
  double norm2(const Field& a) const { return a.squaredNorm() * cell(); }
};

// r2c/c2r transforms with wavenumber tables.
class Spectral {
 public:
  using cplx = std::complex<double>;

  explicit Spectral(const Grid& g) : g_(g) {
    const int n = g.n;
    nc_ = g.d == 1 ? std::size_t(n / 2 + 1) : std::size_t(n) * (n / 2 + 1);
    rbuf_.reset(fftw_alloc_real(g.size()));
    cbuf_.reset(reinterpret_cast<cplx*>(fftw_alloc_complex(nc_)));
    auto* c = reinterpret_cast<fftw_complex*>(cbuf_.get());
    if (g.d == 1) {
      fwd_ = fftw_plan_dft_r2c_1d(n, rbuf_.get(), c, FFTW_ESTIMATE);
      bwd_ = fftw_plan_dft_c2r_1d(n, c, rbuf_.get(), FFTW_ESTIMATE);
    } else {
      fwd_ = fftw_plan_dft_r2c_2d(n, n, rbuf_.get(), c, FFTW_ESTIMATE);
      bwd_ = fftw_plan_dft_c2r_2d(n, n, c, rbuf_.get(), FFTW_ESTIMATE);
    }
    const int nh = n / 2 + 1;
    const double k0 = M_PI / g.L;
    k2_.resize(nc_);
    kx_.resize(nc_);
    ky_.resize(nc_);
    for (std::size_t m = 0; m < nc_; ++m) {
      int i = int(m % nh), j = g.d == 1 ? 0 : int(m / nh);
      double kx = k0 * i, ky = g.d == 1 ? 0 : k0 * (j <= n / 2 ? j : j - n);
      kx_[m] = (i == n / 2) ? 0 : kx;
      ky_[m] = (g.d == 2 && j == n / 2) ? 0 : ky;
      k2_[m] = kx * kx + ky * ky;
    }
  }
  ~Spectral() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  const Grid& grid() const { return g_; }
  std::size_t modes() const { return nc_; }
  const std::vector<double>& k2() const { return k2_; }

  void forward(const Field& u, std::vector<cplx>& out) {
    std::copy(u.data(), u.data() + g_.size(), rbuf_.get());
    fftw_execute(fwd_);
    out.assign(cbuf_.get(), cbuf_.get() + nc_);
  }
  // unnormalized inverse divided by the point count
  void backward(const std::vector<cplx>& in, Field& u) {
    std::copy(in.begin(), in.end(), cbuf_.get());
    fftw_execute(bwd_);
    u.resize(g_.size());
    const double s = 1.0 / g_.size();
    for (std::size_t i = 0; i < g_.size(); ++i) u[i] = rbuf_[i] * s;
  }

  Field laplacian(const Field& u) {
    std::vector<cplx> c;
    forward(u, c);
    for (std::size_t m = 0; m < nc_; ++m) c[m] *= -k2_[m];
    Field out;
    backward(c, out);
    return out;
  }
  Field derivative(const Field& u, int axis) {
    std::vector<cplx> c;
    forward(u, c);
    const auto& k = axis == 0 ? kx_ : ky_;
    for (std::size_t m = 0; m < nc_; ++m) c[m] *= cplx(0, k[m]);
    Field out;
    backward(c, out);
    return out;
  }
  // int |grad u|^2
  double grad_norm2(const Field& u) {
    std::vector<cplx> c;
    forward(u, c);
    return weighted_sum(c, [&](std::size_t m) { return k2_[m]; });
  }

  // Parseval with the half-spectrum multiplicities
  template <class W>
  double weighted_sum(const std::vector<cplx>& c, W&& w) const {
    const int n = g_.n, nh = n / 2 + 1;
    double s = 0;
    for (std::size_t m = 0; m < nc_; ++m) {
      int i = int(m % nh);
      double mult = (i == 0 || i == n / 2) ? 1 : 2;
      s += mult * w(m) * std::norm(c[m]);
    }
    return s * g_.cell() / g_.size();
  }

 private:
  struct FreeReal {
    void operator()(double* p) const { fftw_free(p); }
  };
  struct FreeCplx {
    void operator()(cplx* p) const { fftw_free(p); }
  };
  Grid g_;
  std::size_t nc_ = 0;
  std::unique_ptr<double[], FreeReal> rbuf_;
  std::unique_ptr<cplx[], FreeCplx> cbuf_;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
  std::vector<double> k2_, kx_, ky_;
};

struct FieldState {
  Grid grid;
  Field u, v;
  double t = 0;

  explicit FieldState(const Grid& g) : grid(g), u(Field::Zero(g.size())), v(Field::Zero(g.size())) {}
  FieldState(const Grid& g, Field u_, Field v_, double t_ = 0) : grid(g), u(std::move(u_)), v(std::move(v_)), t(t_) {
    require(std::size_t(u.size()) == g.size() && std::size_t(v.size()) == g.size(), ErrorCode::InvalidParams,
            "field size does not match grid");
  }
};

struct EnergyParts {
  double energy = 0;  // int v^2/2 + |grad u|^2/2 + u^2/2 - F(u)
  double scale = 0;   // same with +F, used for relative residuals
  double kinetic = 0; // int v^2
};

inline EnergyParts field_energy(Spectral& sp, const FieldState& s, double p) {
  const Grid& g = s.grid;
  double F = 0;
  for (std::size_t i = 0; i < g.size(); ++i) F += nonlin_prim(s.u[i], p);
  F *= g.cell();
  double kin = g.norm2(s.v), grad = sp.grad_norm2(s.u), mass = g.norm2(s.u);
  return {0.5 * (kin + grad + mass) - F, 0.5 * (kin + grad + mass) + F, kin};
}

// Damped Klein-Gordon flow u'' + 2a u' + (1 + k^2) u = 0 per mode, exact; nonlinearity as a kick v += tau f(u).
class FieldEvolver {
 public:
  FieldEvolver(const Grid& g, const ModelParams& mp, double dt, int order = 6)
      : sp_(g), mp_(mp), dt_(dt), order_(order) {
    require(dt > 0 && std::isfinite(dt), ErrorCode::InvalidParams, "dt must be positive");
    require(order == 2 || order == 4 || order == 6, ErrorCode::InvalidParams, "splitting order must be 2, 4 or 6");
    if (order == 4) {
      double c = std::cbrt(2.0);
      w_ = {1 / (2 - c), -c / (2 - c), 1 / (2 - c)};
    } else if (order == 6) {
      // Yoshida, solution A
      const double w1 = -1.17767998417887, w2 = 0.235573213359357, w3 = 0.784513610477560;
      const double w0 = 1 - 2 * (w1 + w2 + w3);
      w_ = {w3, w2, w1, w0, w1, w2, w3};
    } else {
      w_ = {1.0};
    }
  }

  Spectral& spectral() { return sp_; }
  double dt() const { return dt_; }
  int order() const { return order_; }

  void linear(FieldState& s, double tau) {
    const Coeffs& c = coeffs(tau);
    sp_.forward(s.u, uh_);
    sp_.forward(s.v, vh_);
    for (std::size_t m = 0; m < uh_.size(); ++m) {
      auto u0 = uh_[m], v0 = vh_[m];
      uh_[m] = c.a[m] * u0 + c.b[m] * v0;
      vh_[m] = c.c[m] * u0 + c.e[m] * v0;
    }
    sp_.backward(uh_, s.u);
    sp_.backward(vh_, s.v);
  }

  void kick(FieldState& s, double tau) const {
    for (Eigen::Index i = 0; i < s.u.size(); ++i) s.v[i] += tau * nonlin(s.u[i], mp_.p);
  }

  // composition of Strang steps with adjacent linear halves merged
  void step(FieldState& s) {
    const std::size_t k = w_.size();
    linear(s, 0.5 * w_[0] * dt_);
    for (std::size_t i = 0; i < k; ++i) {
      kick(s, w_[i] * dt_);
      linear(s, 0.5 * (w_[i] + (i + 1 < k ? w_[i + 1] : 0.0)) * dt_);
    }
    s.t += dt_;
  }

 private:
  struct Coeffs {
    double tau;
    std::vector<double> a, b, c, e;
  };

  // exp(tau [[0,1],[-w2,-2a]]) = e^{-a tau} [[C + a S, S], [-w2 S, C - a S]]
  const Coeffs& coeffs(double tau) {
    for (const Coeffs& c : cache_)
      if (c.tau == tau) return c;
    Coeffs c;
    c.tau = tau;
    const auto& k2 = sp_.k2();
    const double al = mp_.alpha, ea = std::exp(-al * tau);
    for (double kk : k2) {
      double w2 = 1 + kk, disc = w2 - al * al, C, S;
      if (std::fabs(disc * tau * tau) < 1e-8) {
        C = 1 - disc * tau * tau / 2;
        S = tau * (1 - disc * tau * tau / 6);
      } else if (disc > 0) {
        double om = std::sqrt(disc);
        C = std::cos(om * tau);
        S = std::sin(om * tau) / om;
      } else {
        double om = std::sqrt(-disc);
        C = std::cosh(om * tau);
        S = std::sinh(om * tau) / om;
      }
      c.a.push_back(ea * (C + al * S));
      c.b.push_back(ea * S);
      c.c.push_back(-ea * w2 * S);
      c.e.push_back(ea * (C - al * S));
    }
    cache_.push_back(std::move(c));
    return cache_.back();
  }

  Spectral sp_;
  ModelParams mp_;
  double dt_;
  int order_;
  std::vector<double> w_;
  std::vector<Coeffs> cache_;
  std::vector<Spectral::cplx> uh_, vh_;
};

struct EnergyRecord {
  double t = 0;
  double energy = 0;
  double dissipation = 0;  // 2 alpha int_0^t |u_t|^2, cumulative
  double residual = 0;     // relative identity defect over the last output interval
};

struct EvolveOptions {
  double dt = 0;            // 0: h/2
  int order = 6;
  double output_every = 0.1;
  double blowup = 1e3;      // sup |u| ceiling
  double identity_tol = 1e-4;
  // applied after every step (e.g. projection on a symmetry class); returns the size of the correction
  std::function<double(FieldState&)> constrain;
};

struct EvolveReport {
  std::vector<EnergyRecord> energy;
  double max_residual = 0;
  long steps = 0;
  bool stopped = false;      // observer asked to stop
  double max_constraint = 0; // largest correction made by EvolveOptions::constrain
};

// Observer gets each output state with its energy record; returning false ends the run.
using FieldObserver = std::function<bool(const FieldState&, const EnergyRecord&)>;

inline EvolveReport evolve(FieldState& s, const ModelParams& mp, double t_end, EvolveOptions opt = {},
                           const FieldObserver& observe = nullptr) {
  require(mp.d == s.grid.d, ErrorCode::InvalidParams, "model and grid dimension differ");
  mp.validate();
  double dt = opt.dt > 0 ? opt.dt : 0.5 * s.grid.h();
  const double span = t_end - s.t;
  require(span >= 0, ErrorCode::InvalidParams, "t_end before current time");
  const double every = std::max(opt.output_every, dt);
  const long per_out = std::max(1L, long(std::llround(every / dt)));
  long n_steps = long(std::ceil(span / dt - 1e-9));
  if (n_steps > 0) dt = span / n_steps;
  FieldEvolver ev(s.grid, mp, dt, opt.order);
  EvolveReport rep;
  EnergyParts e0 = field_energy(ev.spectral(), s, mp.p);
  rep.energy.push_back({s.t, e0.energy, 0, 0});
  if (observe && !observe(s, rep.energy.back())) {
    rep.stopped = true;
    return rep;
  }
  double diss = 0, e_prev = e0.energy, diss_prev = 0, kin = e0.kinetic;
  const double t0 = s.t;
  for (long k = 1; k <= n_steps; ++k) {
    ev.step(s);
    s.t = t0 + k * dt;
    if (opt.constrain) rep.max_constraint = std::max(rep.max_constraint, opt.constrain(s));
    EnergyParts e = field_energy(ev.spectral(), s, mp.p);
    diss += mp.alpha * dt * (kin + e.kinetic);
    kin = e.kinetic;
    ++rep.steps;
    if (!std::isfinite(e.energy) || s.u.cwiseAbs().maxCoeff() > opt.blowup)
      fail(ErrorCode::BlowupDetected, "sup norm above ceiling at t = " + std::to_string(s.t));
    if (k % per_out == 0 || k == n_steps) {
      double res = std::fabs(e.energy - e_prev + (diss - diss_prev));
      double rel = e.scale > 0 ? res / e.scale : 0.0;
      rep.max_residual = std::max(rep.max_residual, rel);
      rep.energy.push_back({s.t, e.energy, diss, rel});
      if (rel > opt.identity_tol)
        fail(ErrorCode::UnstableStep, "energy identity residual " + std::to_string(rel));
      e_prev = e.energy;
      diss_prev = diss;
      if (observe && !observe(s, rep.energy.back())) {
        rep.stopped = true;
        break;
      }
    }
  }
  return rep;
}

}  // namespace dkg

#endif
