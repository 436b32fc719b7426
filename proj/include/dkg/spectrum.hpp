#ifndef DKG_SPECTRUM_HPP
#define DKG_SPECTRUM_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <vector>

#include "error.hpp"
#include "groundstate.hpp"
#include "interp.hpp"
#include "quadrature.hpp"

namespace dkg {

struct SpectralData {
  int d = 1;
  double alpha = 1.0;
  double nu0_sq = 0;
  double nu_plus = 0, nu_minus = 0, zeta_plus = 0, zeta_minus = 0;
  double beta = 0;  // 1 / (zeta+ + nu+)
  std::vector<double> r_grid, Y_grid;
  double lambda_coarse = 0, lambda_fine = 0;
  double richardson_error = 0;
  double kernel_residual = 0;
  double decay_rate = 0;
  CubicSpline Y_spline;

  double Y(double r) const {
    r = std::fabs(r);
    if (r >= Y_spline.x_back()) return 0.0;
    return Y_spline.eval(r);
  }
  double dY(double r) const {
    double s = r < 0 ? -1.0 : 1.0;
    r = std::fabs(r);
    if (r >= Y_spline.x_back()) return 0.0;
    return s * Y_spline.eval(r, 1);
  }
};

inline void set_rates(SpectralData& sd, double alpha) {
  sd.alpha = alpha;
  double s = std::sqrt(alpha * alpha + sd.nu0_sq);
  sd.nu_plus = -alpha + s;
  sd.nu_minus = -alpha - s;
  sd.zeta_plus = alpha + s;
  sd.zeta_minus = alpha - s;
  sd.beta = 1.0 / (sd.zeta_plus + sd.nu_plus);
}

namespace detail {

// 4th order FD for -y'' - (d-1)/r y' + (l(l+d-2)/r^2 + 1 - p q^{p-1}) y on r_i = (i+1/2)h,
// parity ghosts at 0, odd reflection at R (Dirichlet).
inline Eigen::SparseMatrix<double> radial_operator(const GroundState& gs, int N, double R, int ell,
                                                   std::vector<double>& r) {
  const int d = gs.params.d;
  const double p = gs.params.p, h = R / N;
  const double parity = ell % 2 == 0 ? 1.0 : -1.0;
  const double cl = ell * (ell + d - 2.0);
  const double D2[5] = {-1, 16, -30, 16, -1}, D1[5] = {1, -8, 0, 8, -1};
  r.resize(N);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * N);
  for (int i = 0; i < N; ++i) {
    double ri = (i + 0.5) * h;
    r[i] = ri;
    double V = 1.0 - nonlin_deriv(gs.q(ri), p) + cl / (ri * ri);
    for (int k = -2; k <= 2; ++k) {
      double c = -D2[k + 2] / (12 * h * h) - (d - 1) / ri * D1[k + 2] / (12 * h);
      if (k == 0) c += V;
      int j = i + k;
      double f = 1.0;
      if (j < 0) {
        j = -1 - j;
        f = parity;
      } else if (j >= N) {
        j = 2 * N - 1 - j;
        f = -1.0;
      }
      trip.emplace_back(i, j, f * c);
    }
  }
  Eigen::SparseMatrix<double> A(N, N);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

// Lowest eigenpair by shifted inverse iteration.
inline double lowest_eigen(const Eigen::SparseMatrix<double>& A, double shift, Eigen::VectorXd& x) {
  const int N = static_cast<int>(A.rows());
  Eigen::SparseMatrix<double> I(N, N);
  I.setIdentity();
  double lam = 0;
  for (int pass = 0; pass < 2; ++pass) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A - shift * I);
    require(lu.info() == Eigen::Success, ErrorCode::NoConvergence, "sparse LU failed");
    double prev = INFINITY;
    x.normalize();
    for (int it = 0; it < 3000; ++it) {
      Eigen::VectorXd y = lu.solve(x);
      double rho = x.dot(y);
      lam = shift + 1.0 / rho;
      x = y.normalized();
      if (std::fabs(lam - prev) < (pass == 0 ? 1e-7 : 1e-15) * std::max(1.0, std::fabs(lam))) break;
      prev = lam;
    }
    shift = lam - 1e-3 * std::max(1.0, std::fabs(lam));
  }
  if (x.sum() < 0) x = -x;
  return lam;
}

}  // namespace detail

// Lowest radial eigenvalue -nu0^2 of L = -Lap + 1 - p Q^{p-1} with eigenfunction Y.
inline SpectralData compute_spectrum(const GroundState& gs, int n_grid = 4096, double R = 0.0) {
  require(n_grid >= 512, ErrorCode::InvalidParams, "n_grid must be >= 512");
  if (R <= 0) R = gs.r_max();
  const int d = gs.params.d;
  const double p = gs.params.p;
  const double shift = -nonlin_deriv(gs.q0, p);

  std::vector<double> rc, rf;
  Eigen::SparseMatrix<double> Ac = detail::radial_operator(gs, n_grid, R, 0, rc);
  Eigen::SparseMatrix<double> Af = detail::radial_operator(gs, 2 * n_grid, R, 0, rf);
  Eigen::VectorXd xc(n_grid), xf(2 * n_grid);
  for (int i = 0; i < n_grid; ++i) xc[i] = gs.q(rc[i]);
  for (int i = 0; i < 2 * n_grid; ++i) xf[i] = gs.q(rf[i]);
  double lc = detail::lowest_eigen(Ac, shift, xc);
  double lf = detail::lowest_eigen(Af, shift, xf);
  require(lf < 0 && lc < 0, ErrorCode::NoNegativeEigenvalue, "lowest radial eigenvalue is not negative");
  require(std::fabs(lf - lc) <= 1e-4, ErrorCode::DiscretizationTooCoarse, "Richardson levels disagree");
  double lam = (16 * lf - lc) / 15;

  SpectralData sd;
  sd.d = d;
  sd.nu0_sq = -lam;
  sd.lambda_coarse = lc;
  sd.lambda_fine = lf;
  sd.richardson_error = std::fabs(lam - lf);
  set_rates(sd, gs.params.alpha);

  // even extension through the origin, zero at R
  const int N = 2 * n_grid;
  std::vector<double> xs, ys;
  for (int i = N - 1; i >= 0; --i) {
    xs.push_back(-rf[i]);
    ys.push_back(xf[i]);
  }
  for (int i = 0; i < N; ++i) {
    xs.push_back(rf[i]);
    ys.push_back(xf[i]);
  }
  xs.push_back(R);
  ys.push_back(0.0);
  CubicSpline sp(xs, ys);
  const GaussRule& g = gauss_legendre(6);
  double norm2 = 0;
  auto cell = [&](double a, double b) {
    double c = 0.5 * (a + b), hw = 0.5 * (b - a), acc = 0;
    for (int k = 0; k < 6; ++k) {
      double r = c + hw * g.x[k], y = sp.eval(r);
      acc += g.w[k] * y * y * std::pow(r, d - 1);
    }
    return hw * acc;
  };
  norm2 += cell(0.0, rf[0]);
  for (int i = 0; i + 1 < N; ++i) norm2 += cell(rf[i], rf[i + 1]);
  norm2 += cell(rf[N - 1], R);
  norm2 *= sphere_area(d);
  double sc = 1.0 / std::sqrt(norm2);
  for (double& y : ys) y *= sc;
  sd.Y_spline = CubicSpline(xs, ys);
  sd.r_grid = rf;
  sd.Y_grid.resize(N);
  for (int i = 0; i < N; ++i) sd.Y_grid[i] = xf[i] * sc;

  // kernel check: L_1 q' = 0
  std::vector<double> r1;
  Eigen::SparseMatrix<double> A1 = detail::radial_operator(gs, N, R, 1, r1);
  Eigen::VectorXd dq(N), w(N);
  for (int i = 0; i < N; ++i) {
    dq[i] = gs.dq(r1[i]);
    w[i] = std::pow(r1[i], 0.5 * (d - 1));
  }
  Eigen::VectorXd res = A1 * dq;
  sd.kernel_residual = res.cwiseProduct(w).norm() / dq.cwiseProduct(w).norm();

  // tail decay where 1e-12 < Y/Y(0) < 1e-4: ln Y + m ln r ~ c - k r + e/r
  std::vector<int> idx;
  for (int i = 0; i < N; ++i)
    if (xf[i] < 1e-4 * xf[0] && xf[i] > 1e-12 * xf[0] && rf[i] < 0.75 * R) idx.push_back(i);
  if (idx.size() >= 8) {
    Eigen::MatrixXd M(idx.size(), 3);
    Eigen::VectorXd b(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      double r = rf[idx[k]];
      M(k, 0) = 1;
      M(k, 1) = -r;
      M(k, 2) = 1 / r;
      b[k] = std::log(xf[idx[k]]) + 0.5 * (d - 1) * std::log(r);
    }
    sd.decay_rate = M.colPivHouseholderQr().solve(b)[1];
  }
  return sd;
}

}  // namespace dkg

#endif
