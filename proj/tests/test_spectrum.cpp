#include <gtest/gtest.h>

#include <cmath>

#include "dkg/spectrum.hpp"

using namespace dkg;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

}  // namespace

TEST(Spectrum, PoschlTellerCubic) {
  GroundState gs = solve_ground_state({1, 3.0, 1.0});
  SpectralData sd = compute_spectrum(gs, 4096);
  EXPECT_NEAR(sd.nu0_sq, 3.0, 1e-6);
  EXPECT_LE(sd.richardson_error, 1e-6);
  EXPECT_LE(sd.kernel_residual, 1e-6);
  EXPECT_NEAR(sd.nu_plus, 1.0, 1e-6);
  EXPECT_NEAR(sd.nu_minus, -3.0, 1e-6);
  EXPECT_NEAR(sd.zeta_plus, 3.0, 1e-6);
  EXPECT_NEAR(sd.zeta_minus, -1.0, 1e-6);
  EXPECT_NEAR(sd.beta, 0.25, 1e-7);
  double err = 0;
  for (double x = -10; x <= 10; x += 0.01) {
    double c = 1 / std::cosh(x);
    err = std::max(err, std::fabs(sd.Y(x) - std::sqrt(3.0) / 2 * c * c));
  }
  EXPECT_LE(err, 1e-6);
  EXPECT_GE(sd.decay_rate, 2.0 * (1 - 1e-3));
}

TEST(Spectrum, PoschlTellerQuintic) {
  // nu0^2 = (p-1)(p+3)/4, Y ~ sech^{(p+1)/(p-1)}((p-1)x/2)
  GroundState gs = solve_ground_state({1, 5.0, 0.7});
  SpectralData sd = compute_spectrum(gs, 4096);
  EXPECT_NEAR(sd.nu0_sq, 8.0, 1e-6);
  double n2 = integrate([](double x) { return std::pow(1 / std::cosh(2 * x), 3); }, -20, 20, 400);
  double err = 0;
  for (double x = -8; x <= 8; x += 0.01)
    err = std::max(err, std::fabs(sd.Y(x) - std::pow(1 / std::cosh(2 * x), 1.5) / std::sqrt(n2)));
  EXPECT_LE(err, 1e-6);
}

TEST(Spectrum, RateIdentities) {
  GroundState gs = solve_ground_state({2, 3.0, 0.3});
  SpectralData sd = compute_spectrum(gs, 2048);
  EXPECT_NEAR(sd.nu_plus + sd.nu_minus, -2 * 0.3, 1e-12);
  EXPECT_NEAR(sd.nu_plus * sd.nu_minus, -sd.nu0_sq, 1e-12);
  EXPECT_NEAR(sd.nu_plus * sd.zeta_plus, sd.nu0_sq, 1e-12);
  EXPECT_NEAR(sd.nu_minus * sd.zeta_minus, sd.nu0_sq, 1e-12);
  EXPECT_GT(sd.nu_plus, 0);
  EXPECT_LT(sd.nu_minus, 0);
  EXPECT_GT(sd.zeta_plus, 0);
  EXPECT_LT(sd.zeta_minus, 0);
}

TEST(Spectrum, WeakFormAndNormalization) {
  for (auto [d, p] : std::vector<std::pair<int, double>>{{2, 3.0}, {3, 3.0}, {3, 2.5}}) {
    GroundState gs = solve_ground_state({d, p, 1.0});
    SpectralData sd = compute_spectrum(gs, 4096);
    double S = sphere_area(d);
    double n2 = S * integrate([&](double r) { double y = sd.Y(r); return y * y * std::pow(r, d - 1); }, 0, 30, 600);
    double quad = S * integrate([&](double r) {
      double y = sd.Y(r), dy = sd.dY(r);
      return (dy * dy + (1 - p * std::pow(gs.q(r), p - 1)) * y * y) * std::pow(r, d - 1);
    }, 0, 30, 600);
    EXPECT_NEAR(n2, 1.0, 1e-8) << d;
    EXPECT_NEAR(quad, -sd.nu0_sq, 1e-5) << d;
    EXPECT_LE(sd.kernel_residual, 1e-6) << d;
    EXPECT_LE(sd.richardson_error, 1e-6) << d;
    EXPECT_GE(sd.decay_rate, std::sqrt(1 + sd.nu0_sq) * (1 - 1e-3)) << d;
    for (double y : sd.Y_grid) EXPECT_GE(y, 0.0);
  }
}

TEST(Spectrum, Errors) {
  GroundState gs = solve_ground_state({1, 3.0, 1.0});
  EXPECT_EQ(code_of([&] { compute_spectrum(gs, 256); }), ErrorCode::InvalidParams);
  GroundState weak = gs;
  for (double& v : weak.q_values) v *= 0.05;
  for (double& v : weak.dq_values) v *= 0.05;
  rebuild_interp(weak);
  EXPECT_EQ(code_of([&] { compute_spectrum(weak, 1024); }), ErrorCode::NoNegativeEigenvalue);
  EXPECT_EQ(code_of([&] { compute_spectrum(gs, 512, 400.0); }), ErrorCode::DiscretizationTooCoarse);
}
