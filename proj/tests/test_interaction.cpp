#include <gtest/gtest.h>

#include <cmath>

#include "dkg/interaction.hpp"

using namespace dkg;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

double sech(double x) { return 1 / std::cosh(x); }

// trapezoid on [-a, a], spacing h (spectrally accurate for these integrands)
template <class F>
double trap(F&& f, double a, double h) {
  double s = 0;
  for (double x = -a; x <= a + 1e-12; x += h) s += f(x);
  return s * h;
}

const GroundState& gs1() {
  static GroundState g = solve_ground_state({1, 3.0, 1.0});
  return g;
}

}  // namespace

TEST(Interaction, QStarExamples) {
  const GroundState& gs = gs1();
  EXPECT_NEAR(q_star(gs, {pt({0}), pt({7})}), 2 * std::sqrt(2.0) * sech(7), 1e-12);
  EXPECT_EQ(q_star(gs, {pt({0})}), 0.0);
  GroundState g2 = solve_ground_state({2, 3.0, 1.0});
  double R = 9;
  Points tri = {pt({0, 0}), pt({R, 0}), pt({R / 2, R * std::sqrt(3.0) / 2})};
  EXPECT_NEAR(q_star(g2, tri), 6 * g2.q(R), 1e-12 * g2.q(R));
  try {
    q_star(gs, {pt({1}), pt({1})});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateConfiguration);
  }
}

TEST(Interaction, PairIntegralLine) {
  const GroundState& gs = gs1();
  auto oracle = [](double z) {
    return trap([&](double y) { return 2 * std::sqrt(2.0) * std::pow(sech(y), 3) * std::sqrt(2.0) * sech(y + z); },
                45, 1e-3);
  };
  QuadValue v10 = pair_interaction(gs, pt({10}));
  EXPECT_NEAR(v10.value, oracle(10), 1e-8 * oracle(10));
  EXPECT_NEAR(v10.value / (gs.c1 * gs.g0 * gs.q(10)), 1.0, 0.15);
  EXPECT_NEAR(pair_interaction(gs, pt({-10})).value, v10.value, 1e-12 * v10.value);
  QuadValue v20 = pair_interaction(gs, pt({20}));
  EXPECT_NEAR((v20.value / v10.value) / (gs.q(20) / gs.q(10)), 1.0, 0.08);
}

TEST(Interaction, ForceMatchesDefinition) {
  const GroundState& gs = gs1();
  InteractionKernel k(gs);
  double r = 12;
  double H = trap([&](double y) {
    return -6 * std::sqrt(2.0) * std::pow(sech(y), 3) * std::tanh(y) * std::sqrt(2.0) * sech(y + r);
  }, 45, 1e-3);
  EXPECT_NEAR(k.g(r), H / gs.c1, 1e-6 * k.g(r));
  EXPECT_LE(k.quadrature_error(), 1e-6);
}

TEST(Interaction, ForceAsymptoticsAcrossDimensions) {
  for (int d : {1, 2, 3}) {
    GroundState gs = solve_ground_state({d, 3.0, 1.0});
    InteractionKernel k(gs);
    for (double r = 8; r <= 16; r += 0.5) {
      double ratio = k.g(r) / (gs.g0 * gs.q(r));
      EXPECT_LE(std::fabs(ratio - 1), 2 / r) << d << " " << r;
    }
    EXPECT_LT(k.fitted_C(), 2.0) << d;
    EXPECT_LT(lipschitz_probe(k, 3, 20), 10.0) << d;
    // continuity into the tail
    EXPECT_NEAR(k.g(k.r_hi() + 1e-9) / k.g(k.r_hi() - 1e-9), 1.0, 1e-6);
  }
}

TEST(Interaction, ForceIsRadialAndOdd) {
  // box quadrature of the full vector H(z) in d = 2
  GroundState gs = solve_ground_state({2, 3.0, 1.0});
  InteractionKernel k(gs);
  const GaussRule& g = gauss_legendre(10);
  auto H = [&](const Point& z) {
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    const double L = 20;
    const int np = 50;
    const double hp = 2 * L / np;
    for (int a = 0; a < np; ++a)
      for (int i = 0; i < 10; ++i)
        for (int b = 0; b < np; ++b)
          for (int j = 0; j < 10; ++j) {
            Eigen::Vector2d y(-L + (a + 0.5) * hp + 0.5 * hp * g.x[i], -L + (b + 0.5) * hp + 0.5 * hp * g.x[j]);
            double w = 0.25 * hp * hp * g.w[i] * g.w[j], r = y.norm();
            double f = 3 * std::pow(gs.q(r), 2) * gs.dq(r);
            acc += w * f * y / r * gs.q((y + z).norm());
          }
    return acc;
  };
  Point z = pt({6 * std::cos(0.7), 6 * std::sin(0.7)});
  Eigen::Vector2d h = H(z), hm = H(-z);
  double angle = std::acos(std::clamp(h.dot(z) / (h.norm() * z.norm()), -1.0, 1.0));
  EXPECT_LE(angle, 1e-6);
  EXPECT_NEAR(h.norm(), gs.c1 * k.g(6.0), 1e-6 * h.norm());
  EXPECT_LE((h + hm).norm(), 1e-9 * h.norm());
}

TEST(Interaction, EnergyExpansion) {
  const GroundState& gs = gs1();
  EXPECT_NEAR(energy_expansion(gs, {pt({0})}, {1}), 4.0 / 3, 1e-8);
  double R = 10, E2 = 2 * gs.energy, shift = gs.c1 * gs.g0 * gs.q(R);
  EXPECT_NEAR(energy_expansion(gs, {pt({0}), pt({R})}, {1, -1}), E2 + shift, 1e-12);
  EXPECT_NEAR(energy_expansion(gs, {pt({0}), pt({R})}, {1, 1}), E2 - shift, 1e-12);
  // energy of sqrt2 sech(x) + s sqrt2 sech(x - R) by trapezoid, u' in closed form
  for (int s : {1, -1}) {
    auto u = [&](double x) { return std::sqrt(2.0) * (sech(x) + s * sech(x - R)); };
    auto du = [&](double x) {
      return -std::sqrt(2.0) * (sech(x) * std::tanh(x) + s * sech(x - R) * std::tanh(x - R));
    };
    double E = trap([&](double x) {
      double a = u(x + R / 2), b = du(x + R / 2);
      return 0.5 * b * b + 0.5 * a * a - 0.25 * a * a * a * a;
    }, 60, 0.01);
    double Ex = energy_expansion(gs, {pt({0}), pt({R})}, {1, s});
    EXPECT_LT(std::fabs(E - Ex), 0.05 * gs.q(R));
    EXPECT_GT(std::fabs(E - E2), 0.9 * shift);
  }
  try {
    energy_expansion(gs, {pt({0}), pt({1})}, {1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigurationTooClose);
  }
}

TEST(Interaction, GResidualDecays) {
  InteractionKernel k(gs1());
  double prev = INFINITY;
  for (double R : {8.0, 10.0, 12.0}) {
    GResidualReport rep = g_residual(k, {pt({0}), pt({R})}, {1, -1});
    EXPECT_LT(rep.residual, prev);
    EXPECT_GT(rep.exponent, 1.2) << R;
    prev = rep.residual;
  }
}
