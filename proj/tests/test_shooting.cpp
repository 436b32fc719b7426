#include <gtest/gtest.h>

#include <cmath>

#include "dkg/shooting.hpp"

using namespace dkg;

namespace {

struct Lab1 {
  GroundState gs = solve_ground_state({1, 3.0, 1.0});
  SpectralData sd = compute_spectrum(gs);
  Basis basis() const { return {gs, sd}; }
};

const Lab1& lab() {
  static Lab1 l;
  return l;
}

}  // namespace

TEST(Shooting, OppositePairSurvives) {
  const Lab1& L = lab();
  SignedConfiguration c = build_catalog("pair_alternating", 1);
  ShootControl ctl;
  ctl.t_end = 20;
  ShootingResult r = shoot(c, 10, L.basis(), ctl);
  ASSERT_TRUE(r.survived);
  EXPECT_NEAR(r.horizon, 20, 1e-9);
  ASSERT_EQ(r.orbits.size(), 1u);
  // bracket ends leave through the btilde threshold on opposite sides, transversally
  EXPECT_EQ(r.lower_exit.reason, "btilde");
  EXPECT_EQ(r.upper_exit.reason, "btilde");
  EXPECT_EQ(r.lower_exit.side[0], -r.upper_exit.side[0]);
  EXPECT_GT(r.lower_exit.slope, 0.0);
  EXPECT_GT(r.upper_exit.slope, 0.0);
  EXPECT_LT(std::fabs(r.a_plus_initial[0]), ctl.bracket > 0 ? ctl.bracket : std::pow(ctl.delta, 1.25));
  EXPECT_LT(r.max_eps_norm, ctl.delta0);
  EXPECT_LT(r.max_identity_residual, 1e-5);
  EXPECT_LT(r.max_equivariance, 1e-8);

  InteractionKernel k(L.gs);
  ReducedComparison rc = compare_with_reduced(r.history, c.signs, ForceLaw::from_kernel(k), 1.0, 5, 20);
  EXPECT_LT(rc.max_rel_dev, 0.05);
  EXPECT_LT(rc.max_growth_dev, 0.05);
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_GE(r.history[i].r, r.history[i - 1].r - 1e-12);

  EnergyAudit ea = energy_audit(r.history, L.gs, c.signs);
  EXPECT_TRUE(ea.energy_nonincreasing);
  EXPECT_LT(ea.max_identity_residual, 1e-5);
}

TEST(Shooting, SameSignPairAttracts) {
  const Lab1& L = lab();
  SignedConfiguration c = same_sign(build_catalog("pair_alternating", 1));
  ShootControl ctl;
  ctl.t_end = 10;
  EXPECT_THROW(shoot(c, 10, L.basis(), ctl), Error);
  ctl.allow_inadmissible = true;
  ShootingResult r = shoot(c, 10, L.basis(), ctl);
  ASSERT_GT(r.history.size(), 10u);
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    EXPECT_GT(r.history[i].qstar, r.history[i - 1].qstar);
    EXPECT_LT(r.history[i].r, r.history[i - 1].r);
  }
}

TEST(Shooting, StaticEnergyExpansion) {
  const Lab1& L = lab();
  Grid g(1, 1024, 40);
  std::vector<StaticEnergyRow> rows = static_energy_audit(L.basis(), g, {8, 10, 12}, {1, -1});
  double C = 0;
  for (const auto& r : rows) C = std::max(C, r.gap_over_qR);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].gap, rows[i - 1].gap);
  for (const auto& r : rows) EXPECT_LE(r.gap, C * L.gs.q(r.R) / r.R * (1 + 1e-12));
  EXPECT_LT(C, 10.0);
}

TEST(Shooting, Errors) {
  const Lab1& L = lab();
  SignedConfiguration c = build_catalog("pair_alternating", 1);
  ShootControl ctl;
  try {
    shoot(c, 6, L.basis(), ctl);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidParams);
  }
  ctl.t_end = 0.15;
  ctl.output_every = 0.05;
  try {
    shoot(c, 10, L.basis(), ctl);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HorizonTooShort);
  }
}
