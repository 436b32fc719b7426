#ifndef DKG_MODULATION_HPP
#define DKG_MODULATION_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "configurations.hpp"
#include "error.hpp"
#include "field.hpp"
#include "groundstate.hpp"
#include "interaction.hpp"
#include "spectrum.hpp"

namespace dkg {

struct Basis {
  const GroundState& gs;
  const SpectralData& sd;

  ModelParams params() const {
    ModelParams mp = gs.params;
    mp.alpha = sd.alpha;
    return mp;
  }
};

// sigma Q(x - z), its gradient, Hessian (xx, xy, yy) and sigma Y(x - z) on the grid.
struct SolitonFields {
  Field Q, Y;
  std::vector<Field> dQ, d2Q;

  const Field& hess(int i, int j, int d) const { return d2Q[d == 1 ? 0 : i + j]; }
};

inline SolitonFields sample_soliton(const Grid& g, const Basis& b, const Point& z, int sigma, bool hessian = false,
                                    bool with_Y = true) {
  const int d = g.d;
  const std::size_t N = g.size();
  SolitonFields f;
  f.Q.resize(N);
  f.dQ.assign(d, Field(N));
  if (with_Y) f.Y.resize(N);
  if (hessian) f.d2Q.assign(d == 1 ? 1 : 3, Field(N));
  for (std::size_t i = 0; i < N; ++i) {
    Point x = g.displacement(i, z);
    double r = x.norm();
    double q = b.gs.q(r), dq = b.gs.dq(r);
    double dq_r = r > 1e-8 ? dq / r : b.gs.d2q(0.0);
    f.Q[i] = sigma * q;
    for (int k = 0; k < d; ++k) f.dQ[k][i] = sigma * dq_r * x[k];
    if (with_Y) f.Y[i] = sigma * b.sd.Y(r);
    if (hessian) {
      double d2 = b.gs.d2q(r);
      if (d == 1) {
        f.d2Q[0][i] = sigma * d2;
      } else {
        // q'' x_i x_j / r^2 + (q'/r)(delta_ij - x_i x_j / r^2)
        double ux = r > 1e-8 ? x[0] / r : 0, uy = r > 1e-8 ? x[1] / r : 0;
        double a = r > 1e-8 ? d2 - dq_r : 0;
        f.d2Q[0][i] = sigma * (a * ux * ux + dq_r);
        f.d2Q[1][i] = sigma * (a * ux * uy);
        f.d2Q[2][i] = sigma * (a * uy * uy + dq_r);
      }
    }
  }
  return f;
}

// S = (sum Q_w, -sum (l_w . grad) Q_w)
inline FieldState assemble(const Grid& g, const Basis& b, const Points& z, const Points& ell,
                           const std::vector<int>& sigma, double t = 0) {
  require(z.size() == sigma.size() && (ell.empty() || ell.size() == z.size()), ErrorCode::InvalidParams,
          "centers, boosts and signs differ in length");
  FieldState s(g);
  s.t = t;
  for (std::size_t w = 0; w < z.size(); ++w) {
    require(z[w].size() == g.d, ErrorCode::InvalidParams, "center dimension differs from grid");
    SolitonFields f = sample_soliton(g, b, z[w], sigma[w], false, false);
    s.u += f.Q;
    if (!ell.empty())
      for (int k = 0; k < g.d; ++k) s.v -= ell[w][k] * f.dQ[k];
  }
  return s;
}

inline double energy_norm2(Spectral& sp, const Field& e, const Field& h) {
  const Grid& g = sp.grid();
  return sp.grad_norm2(e) + g.norm2(e) + g.norm2(h);
}

struct ModulationData {
  double t = 0;
  Points z, ell;
  std::vector<int> sigma;
  Field S;          // sum Q_w
  Field eps, eta;   // u - S, v + sum (l . grad) Q_w
  std::vector<double> a_plus, a_minus;
  double ortho_residual = 0;
  double eps_norm = 0;  // H1 x L2
  int iterations = 0;
};

struct DecomposeOptions {
  double delta0 = 0.1;
  int max_iter = 50;
  double tol = 1e-11;
  const std::vector<GroupElement>* symmetry = nullptr;  // (z, l) kept in the invariant set
};

namespace detail {

inline void project_invariant(Points& z, const std::vector<GroupElement>& G) {
  Points out(z.size(), Point::Zero(z[0].size()));
  for (const GroupElement& g : G)
    for (std::size_t w = 0; w < z.size(); ++w) out[w] += g.R.transpose() * z[g.perm[w]];
  for (Point& p : out) p /= double(G.size());
  z = out;
}

struct ModState {
  std::vector<SolitonFields> f;
  Field S, eps, eta;
  Eigen::VectorXd F;
};

inline ModState evaluate(const Grid& g, const Basis& b, const FieldState& s, const Points& z, const Points& ell,
                         const std::vector<int>& sigma, bool hessian) {
  const int d = g.d;
  const std::size_t n = z.size();
  ModState m;
  m.S = Field::Zero(g.size());
  m.eta = s.v;
  for (std::size_t w = 0; w < n; ++w) {
    m.f.push_back(sample_soliton(g, b, z[w], sigma[w], hessian, true));
    m.S += m.f.back().Q;
    for (int k = 0; k < d; ++k) m.eta += ell[w][k] * m.f.back().dQ[k];
  }
  m.eps = s.u - m.S;
  m.F.resize(2 * n * d);
  for (std::size_t w = 0; w < n; ++w)
    for (int j = 0; j < d; ++j) {
      m.F[w * d + j] = g.dot(m.eps, m.f[w].dQ[j]);
      m.F[(n + w) * d + j] = g.dot(m.eta, m.f[w].dQ[j]);
    }
  return m;
}

}  // namespace detail

// Newton on <eps, d_j Q_w> = <eta, d_j Q_w> = 0 in the unknowns (z, l).
inline ModulationData decompose(const FieldState& s, const Points& z_guess, const Points& ell_guess,
                                const std::vector<int>& sigma, const Basis& b, DecomposeOptions opt = {}) {
  const Grid& g = s.grid;
  const int d = g.d;
  const std::size_t n = z_guess.size();
  require(n >= 1 && sigma.size() == n, ErrorCode::InvalidParams, "bad decomposition guess");
  require(b.gs.params.d == d, ErrorCode::InvalidParams, "ground state dimension differs from grid");
  Points z = z_guess, ell = ell_guess.empty() ? Points(n, Point::Zero(d)) : ell_guess;
  if (n > 1)
    require(q_star(b.gs, z) <= opt.delta0, ErrorCode::GuessTooFar, "q_* of the guess exceeds delta0");
  Spectral sp(g);
  {
    FieldState S0 = assemble(g, b, z, ell, sigma);
    double dist = std::sqrt(energy_norm2(sp, s.u - S0.u, s.v - S0.v));
    require(dist <= opt.delta0, ErrorCode::GuessTooFar, "field is farther than delta0 from the guessed sum");
  }
  const std::size_t m = 2 * n * d;
  detail::ModState st = detail::evaluate(g, b, s, z, ell, sigma, true);
  int it = 0;
  auto target = [&](const detail::ModState& x) {
    return opt.tol * (1 + std::sqrt(energy_norm2(sp, x.eps, x.eta)));
  };
  while (st.F.norm() > target(st)) {
    if (++it > opt.max_iter) fail(ErrorCode::NewtonDiverged, "modulation Newton did not converge");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
    // d eta / d z_vk = -sum_i l_vi d_k d_i Q_v
    std::vector<std::vector<Field>> T(n, std::vector<Field>(d, Field::Zero(g.size())));
    for (std::size_t v = 0; v < n; ++v)
      for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i) T[v][k] -= ell[v][i] * st.f[v].hess(k, i, d);
    for (std::size_t w = 0; w < n; ++w)
      for (int j = 0; j < d; ++j) {
        std::size_t r1 = w * d + j, r2 = (n + w) * d + j;
        for (std::size_t v = 0; v < n; ++v)
          for (int k = 0; k < d; ++k) {
            double gram = g.dot(st.f[v].dQ[k], st.f[w].dQ[j]);
            // d eps / d z_vk = d_k Q_v ; d eta / d l_vk = d_k Q_v
            J(r1, v * d + k) += gram;
            J(r2, (n + v) * d + k) += gram;
            J(r2, v * d + k) += g.dot(T[v][k], st.f[w].dQ[j]);
          }
        for (int k = 0; k < d; ++k) {
          // d (d_j Q_w) / d z_wk = -d_k d_j Q_w
          J(r1, w * d + k) -= g.dot(st.eps, st.f[w].hess(k, j, d));
          J(r2, w * d + k) -= g.dot(st.eta, st.f[w].hess(k, j, d));
        }
      }
    Eigen::VectorXd dx = J.fullPivLu().solve(-st.F);
    if (!dx.allFinite() || dx.norm() > 5.0) fail(ErrorCode::NewtonDiverged, "modulation Newton step too large");
    double lam = 1;
    bool accepted = false;
    for (int k = 0; k < 20; ++k, lam *= 0.5) {
      Points z1 = z, l1 = ell;
      for (std::size_t w = 0; w < n; ++w) {
        z1[w] += lam * dx.segment(w * d, d);
        l1[w] += lam * dx.segment((n + w) * d, d);
      }
      if (opt.symmetry) {
        detail::project_invariant(z1, *opt.symmetry);
        detail::project_invariant(l1, *opt.symmetry);
      }
      detail::ModState s1 = detail::evaluate(g, b, s, z1, l1, sigma, true);
      if (s1.F.norm() < (1 - 1e-4 * lam) * st.F.norm() || s1.F.norm() <= target(s1)) {
        bool slow = s1.F.norm() > 0.5 * st.F.norm();
        z = z1;
        ell = l1;
        st = std::move(s1);
        accepted = !(slow && st.F.norm() <= 1e3 * target(st));
        break;
      }
    }
    if (!accepted) {
      if (st.F.norm() <= 1e3 * target(st)) break;  // stalled at rounding level
      fail(ErrorCode::NewtonDiverged, "modulation line search failed");
    }
  }
  ModulationData md;
  md.t = s.t;
  md.z = z;
  md.ell = ell;
  md.sigma = sigma;
  md.S = st.S;
  md.eps = st.eps;
  md.eta = st.eta;
  md.iterations = it;
  md.ortho_residual = st.F.cwiseAbs().maxCoeff();
  md.eps_norm = std::sqrt(energy_norm2(sp, md.eps, md.eta));
  for (std::size_t w = 0; w < n; ++w) {
    double ey = g.dot(md.eps, st.f[w].Y), hy = g.dot(md.eta, st.f[w].Y);
    md.a_plus.push_back(b.sd.zeta_plus * ey + hy);
    md.a_minus.push_back(b.sd.zeta_minus * ey + hy);
  }
  return md;
}

// S[z, l, sigma] + (eps, eta); the inverse of decompose.
inline FieldState recompose(const Grid& g, const Basis& b, const ModulationData& md) {
  FieldState s = assemble(g, b, md.z, md.ell, md.sigma, md.t);
  s.u += md.eps;
  s.v += md.eta;
  return s;
}

struct Diagnostics {
  double mu = 0, rho = 0;
  double E = 0, B = 0, F = 0, N = 0, b = 0, M = 0, qstar = 0;
};

inline double default_mu(const SpectralData& sd) {
  return 0.5 * std::min({1.0, sd.alpha, std::fabs(sd.nu_minus)});
}

inline Diagnostics diagnostics(const ModulationData& md, const Basis& bs, const Grid& g, double mu = 0) {
  const SpectralData& sd = bs.sd;
  if (mu <= 0) mu = default_mu(sd);
  require(mu <= std::min({1.0, sd.alpha, std::fabs(sd.nu_minus)}) + 1e-15, ErrorCode::InvalidParams,
          "mu must not exceed min(1, alpha, |nu-|)");
  const double p = bs.gs.params.p;
  Spectral sp(g);
  Diagnostics r;
  r.mu = mu;
  r.rho = 2 * sd.alpha - mu;
  double nl = 0;
  for (Eigen::Index i = 0; i < md.eps.size(); ++i) {
    double R = md.S[i], e = md.eps[i];
    nl += nonlin_prim(R + e, p) - nonlin_prim(R, p) - nonlin(R, p) * e;
  }
  nl *= g.cell();
  double grad = sp.grad_norm2(md.eps), e2 = g.norm2(md.eps);
  r.E = grad + (1 - r.rho * mu) * e2 + g.norm2(md.eta + mu * md.eps) - 2 * nl;
  double l2 = 0, am = 0;
  for (const Point& l : md.ell) l2 += l.squaredNorm();
  for (double a : md.a_minus) am += a * a;
  for (double a : md.a_plus) r.b += a * a;
  r.B = l2 + am / (2 * mu);
  r.F = r.E + r.B;
  r.N = std::sqrt(grad + e2 + g.norm2(md.eta) + l2);
  r.M = (r.F - r.b / (2 * sd.nu_plus)) / (mu * mu);
  Points y = md.z;
  for (std::size_t w = 0; w < y.size(); ++w) y[w] += md.ell[w] / (2 * sd.alpha);
  r.qstar = q_star(bs.gs, y);
  return r;
}

struct WResult {
  Field W, Wv;  // (W, nu+ W)
  Eigen::VectorXd b_coef;
  Eigen::MatrixXd B, V;  // linear maps a -> b, a -> v (v stacked per vertex)
  double B_deviation = 0;     // |B - beta Id| (spectral norm)
  double ortho_residual = 0;  // max |<W, d_j Q_w>|
  double pairing_residual = 0;  // max |<W_vec, Z+_w> - a_w|
  double gram_rcond = 0;
};

inline WResult build_W(const Grid& g, const Basis& bs, const std::vector<double>& a, const Points& z,
                       const std::vector<int>& sigma) {
  const int d = g.d;
  const std::size_t n = z.size();
  require(a.size() == n, ErrorCode::InvalidParams, "one a+ value per vertex");
  const SpectralData& sd = bs.sd;
  std::vector<SolitonFields> f;
  for (std::size_t w = 0; w < n; ++w) f.push_back(sample_soliton(g, bs, z[w], sigma[w]));
  // basis: Y_w (w < n), then d_j Q_w at n + w d + j
  const std::size_t m = n * (d + 1);
  auto phi = [&](std::size_t k) -> const Field& { return k < n ? f[k].Y : f[(k - n) / d].dQ[(k - n) % d]; };
  Eigen::MatrixXd M(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) M(i, j) = M(j, i) = g.dot(phi(i), phi(j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  WResult res;
  res.gram_rcond = es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff();
  require(res.gram_rcond > 1e-10, ErrorCode::GramSingular, "Gram matrix of {Y_w, d_j Q_w} is singular");
  Eigen::MatrixXd Minv = M.ldlt().solve(Eigen::MatrixXd::Identity(m, m));
  res.B = sd.beta * Minv.topLeftCorner(n, n);
  res.V = sd.beta * Minv.bottomLeftCorner(m - n, n);
  res.B_deviation = (res.B - sd.beta * Eigen::MatrixXd::Identity(n, n)).operatorNorm();
  Eigen::VectorXd av = Eigen::Map<const Eigen::VectorXd>(a.data(), n);
  Eigen::VectorXd c(m);
  c.head(n) = res.B * av;
  c.tail(m - n) = res.V * av;
  res.b_coef = c.head(n);
  res.W = Field::Zero(g.size());
  for (std::size_t k = 0; k < m; ++k) res.W += c[k] * phi(k);
  res.Wv = sd.nu_plus * res.W;
  for (std::size_t w = 0; w < n; ++w) {
    for (int j = 0; j < d; ++j) res.ortho_residual = std::max(res.ortho_residual, std::fabs(g.dot(res.W, f[w].dQ[j])));
    double pair = sd.zeta_plus * g.dot(res.W, f[w].Y) + g.dot(res.Wv, f[w].Y);
    res.pairing_residual = std::max(res.pairing_residual, std::fabs(pair - a[w]));
  }
  return res;
}

// Grid index map x -> R x for signed permutation matrices (the grid is invariant under them).
inline std::vector<std::size_t> grid_map(const Grid& g, const Mat& R) {
  const int d = g.d, n = g.n;
  require(R.rows() == d && R.cols() == d, ErrorCode::InvalidParams, "matrix dimension differs from grid");
  std::vector<int> src(d), sgn(d);
  for (int r = 0; r < d; ++r) {
    src[r] = -1;
    for (int c = 0; c < d; ++c)
      if (std::fabs(std::fabs(R(r, c)) - 1) < 1e-12) {
        src[r] = c;
        sgn[r] = R(r, c) > 0 ? 1 : -1;
      } else {
        require(std::fabs(R(r, c)) < 1e-12, ErrorCode::InvalidParams, "grid symmetry needs a signed permutation");
      }
    require(src[r] >= 0, ErrorCode::InvalidParams, "grid symmetry needs a signed permutation");
  }
  // index i <-> x = -L + i h; -x <-> (n - i) mod n
  std::vector<std::size_t> map(g.size());
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    int in[2] = {int(idx % n), d == 2 ? int(idx / n) : 0}, out[2] = {0, 0};
    for (int r = 0; r < d; ++r) {
      int m = in[src[r]] - n / 2;  // x = m h
      m = sgn[r] * m;
      out[r] = ((m + n / 2) % n + n) % n;
    }
    map[idx] = d == 1 ? std::size_t(out[0]) : std::size_t(out[1]) * n + out[0];
  }
  return map;
}

// max over G of sup_x |u(R x) - tau u(x)|
inline double equivariance_residual(const Grid& g, const Field& u, const std::vector<GroupElement>& G) {
  double r = 0;
  for (const GroupElement& e : G) {
    std::vector<std::size_t> map = grid_map(g, e.R);
    for (std::size_t i = 0; i < g.size(); ++i) r = std::max(r, std::fabs(u[map[i]] - e.tau * u[i]));
  }
  return r;
}

// Replace u by its average over G (u(R x) = tau u(x)); returns sup of the change.
inline double project_equivariant(const Grid& g, Field& u, const std::vector<GroupElement>& G,
                                  const std::vector<std::vector<std::size_t>>& maps) {
  Field avg = Field::Zero(u.size());
  for (std::size_t k = 0; k < G.size(); ++k)
    for (std::size_t i = 0; i < g.size(); ++i) avg[i] += G[k].tau * u[maps[k][i]];
  avg /= double(G.size());
  double change = (avg - u).cwiseAbs().maxCoeff();
  u = std::move(avg);
  return change;
}

// max over G, w of |z_{perm w} - R z_w|
inline double point_equivariance_residual(const Points& z, const std::vector<GroupElement>& G) {
  double r = 0;
  for (const GroupElement& e : G)
    for (std::size_t w = 0; w < z.size(); ++w) r = std::max(r, (z[e.perm[w]] - e.R * z[w]).norm());
  return r;
}

struct CoercivitySample {
  double quad = 0;   // <L e, e>
  double h1 = 0;     // |e|_{H1}^2
  double proj = 0;   // <e, Y>^2 + sum_j <e, d_j Q>^2
  double c_max = 0;  // largest c with quad >= c h1 - proj / c
};

struct CoercivityReport {
  std::vector<CoercivitySample> samples;
  double c_empirical = 0;
};

// Probe of <L e, e> >= c |e|_H1^2 - (1/c)(<e,Y>^2 + sum <e, d_j Q>^2) for a soliton at the origin.
inline CoercivityReport coercivity_probe(const Grid& g, const Basis& bs, const std::vector<Field>& trials) {
  const double p = bs.gs.params.p;
  SolitonFields f = sample_soliton(g, bs, Point::Zero(g.d), 1);
  Spectral sp(g);
  CoercivityReport rep;
  rep.c_empirical = INFINITY;
  for (const Field& e : trials) {
    require(std::size_t(e.size()) == g.size(), ErrorCode::InvalidParams, "trial size differs from grid");
    CoercivitySample s;
    double grad = sp.grad_norm2(e), e2 = g.norm2(e), pot = 0;
    for (std::size_t i = 0; i < g.size(); ++i) pot += p * std::pow(std::fabs(f.Q[i]), p - 1) * e[i] * e[i];
    s.quad = grad + e2 - pot * g.cell();
    s.h1 = grad + e2;
    s.proj = std::pow(g.dot(e, f.Y), 2);
    for (int j = 0; j < g.d; ++j) s.proj += std::pow(g.dot(e, f.dQ[j]), 2);
    s.c_max = (s.quad + std::sqrt(s.quad * s.quad + 4 * s.h1 * s.proj)) / (2 * s.h1);
    rep.c_empirical = std::min(rep.c_empirical, s.c_max);
    rep.samples.push_back(s);
  }
  return rep;
}

}  // namespace dkg

#endif
