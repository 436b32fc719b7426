#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dkg/reduced_dynamics.hpp"

using namespace dkg;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

OdeTolerances tight() {
  OdeTolerances t;
  t.rtol = 1e-12;
  t.atol = 1e-13;
  return t;
}

Points at_distance(const SignedConfiguration& c, double r) {
  return scaled(c, r * c.lambda_omega).vertices;
}

}  // namespace

TEST(ReducedDynamics, OppositePairClosedForm) {
  const double A = 12, alpha = 1, R0 = 3;
  ForceLaw law = ForceLaw::synthetic(A, 0);
  ReducedState s{0, {pt({0}), pt({R0})}, {}, {1, -1}};
  std::vector<double> ts = {1, 10, 100, 1e3};
  ReducedTrajectory tr = integrate_reduced(s, law, alpha, 1e3, ts, tight());
  ASSERT_FALSE(tr.collided);
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    double R = std::log(std::exp(R0) + A * tr.t[i] / alpha);
    EXPECT_NEAR((tr.y[i][1] - tr.y[i][0]).norm(), R, 1e-9 * R);
    EXPECT_NEAR(tr.y[i][0][0] + tr.y[i][1][0], R0, 1e-9);
  }
}

TEST(ReducedDynamics, SymmetricClosedForm) {
  const double A = 12, alpha = 0.5, r0 = 3;
  SignedConfiguration pair = build_catalog("pair_alternating", 1);
  EXPECT_NEAR(pair.gamma_raw, 2.0, 1e-12);
  ScalarTrajectory tr = integrate_symmetric(pair, ForceLaw::synthetic(A, 0), alpha, r0, 1e6, 20, tight());
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    double r = std::log(std::exp(r0) + pair.gamma_raw * A * tr.t[i] / (2 * alpha));
    EXPECT_NEAR(tr.r[i], r, 1e-9 * r);
  }
}

TEST(ReducedDynamics, ScalarMatchesVector) {
  ForceLaw law = ForceLaw::synthetic(3.0, 0.5);
  const double alpha = 0.7, r0 = 4;
  for (auto [name, d] : {std::pair<std::string, int>{"square_alternating", 2}, {"hexagon_center", 2},
                         {"octahedron_center", 3}}) {
    SignedConfiguration c = build_catalog(name, d);
    if (c.gamma <= 0) continue;
    ScalarTrajectory sc = integrate_symmetric(c, law, alpha, r0, 1e3, 5, tight());
    ReducedState s{0, at_distance(c, r0), {}, c.signs};
    std::vector<double> ts(sc.t.begin() + 1, sc.t.end());
    ReducedTrajectory tr = integrate_reduced(s, law, alpha, 1e3, ts, tight());
    ASSERT_EQ(tr.t.size(), sc.t.size()) << name;
    for (std::size_t i = 0; i < tr.t.size(); ++i)
      EXPECT_NEAR(min_pair_distance(tr.y[i]), sc.r[i], 1e-8 * sc.r[i]) << name << " t=" << tr.t[i];
  }
}

TEST(ReducedDynamics, CentroidAndEquivariance) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-6, 6);
  Points y;
  while (y.size() < 5) {
    Point p = pt({u(rng), u(rng)});
    bool ok = true;
    for (const Point& q : y) ok = ok && (p - q).norm() > 3;
    if (ok) y.push_back(p);
  }
  std::vector<int> sg = {1, -1, 1, -1, -1};
  ForceLaw law = ForceLaw::synthetic(2.0, 0.5);
  const double alpha = 1.3, T = 5;
  ReducedState s{0, y, {}, sg};
  ReducedTrajectory a = integrate_reduced(s, law, alpha, T, {T}, tight());
  ASSERT_FALSE(a.collided);
  Point c0 = Point::Zero(2), c1 = Point::Zero(2);
  for (std::size_t i = 0; i < y.size(); ++i) {
    c0 += y[i];
    c1 += a.y.back()[i];
  }
  EXPECT_LT((c0 - c1).norm(), 1e-10);

  double th = 0.83;
  Eigen::Matrix2d R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  Point tau = pt({1.5, -2.25});
  ReducedState s2 = s;
  for (Point& p : s2.y) p = R * p + tau;
  ReducedTrajectory b = integrate_reduced(s2, law, alpha, T, {T}, tight());
  for (std::size_t i = 0; i < y.size(); ++i)
    EXPECT_LT((b.y.back()[i] - (R * a.y.back()[i] + tau)).norm(), 1e-9);
}

TEST(ReducedDynamics, SecondOrderFreeMotion) {
  const double alpha = 0.8, T = 3;
  ForceLaw zero = ForceLaw::synthetic(0.0, 0);
  ReducedState s{0, {pt({0, 0}), pt({5, 1})}, {pt({0.3, -0.2}), pt({-0.1, 0.4})}, {1, 1}};
  ReducedState e = step_second_order(s, zero, alpha, T, tight());
  double decay = std::exp(-2 * alpha * T);
  for (int i = 0; i < 2; ++i) {
    EXPECT_LT((e.ell[i] - s.ell[i] * decay).norm(), 1e-10);
    EXPECT_LT((e.y[i] - (s.y[i] + s.ell[i] * (1 - decay) / (2 * alpha))).norm(), 1e-10);
  }
  EXPECT_THROW(step_first_order(s, zero, alpha, T), Error);
}

TEST(ReducedDynamics, SecondOrderApproachesFirstOrder) {
  // slow forces: the shifted center z + ell/(2 alpha) follows the gradient flow
  ForceLaw law = ForceLaw::synthetic(1.0, 0);
  const double alpha = 1.0, T = 2e4;
  Points y0 = {pt({0}), pt({6})};
  ReducedState s1{0, y0, {}, {1, -1}};
  ReducedState s2{0, y0, {pt({0}), pt({0})}, {1, -1}};
  ReducedState a = step_first_order(s1, law, alpha, T, tight());
  ReducedState b = step_second_order(s2, law, alpha, T, tight());
  double ra = (a.y[1] - a.y[0]).norm();
  Points yb = b.shifted_centers(alpha);
  double rb = (yb[1] - yb[0]).norm();
  EXPECT_GT(ra - 6, 3.0);
  EXPECT_LT(std::fabs(ra - rb), 1e-3);
}

TEST(ReducedDynamics, AsymptoticsOneDimensionalKernel) {
  GroundState gs = solve_ground_state({1, 3.0, 1.0});
  InteractionKernel k(gs);
  SignedConfiguration pair = build_catalog("pair_alternating", 1);
  const double alpha = 1.0;
  ScalarTrajectory tr = integrate_symmetric(pair, ForceLaw::from_kernel(k), alpha, 3.0, 1e8);
  AsymptoticFit f = fit_asymptotics(tr, 1, 1e4, 1e8);
  double c0 = std::log(gs.kappa * pair.gamma_raw * gs.g0 / (2 * alpha));
  EXPECT_NEAR(c0, std::log(12.0), 1e-6);
  EXPECT_LT(std::fabs(f.c_fit - c0), 1e-2);
  EXPECT_LT(std::fabs(f.s_hi), 1e-2);
}

TEST(ReducedDynamics, AsymptoticsLogLogCoefficient) {
  // g = r^{-1} e^{-r}: e^r (r - 1) = t + const, so c = 0 exactly and the ln r coefficient is -1
  SignedConfiguration pair = build_catalog("pair_alternating", 3);
  ForceLaw law = ForceLaw::synthetic(1.0, 1.0);
  ScalarTrajectory tr = integrate_symmetric(pair, law, 1.0, 3.0, 1e8);
  AsymptoticFit f = fit_asymptotics(tr, 3, 1e4, 1e8);
  EXPECT_NEAR(f.lambda_fit, -1.0, 0.05);
  EXPECT_NEAR(f.c_fit, 0.0, 1e-6);
  EXPECT_GT(f.s_predicted, 0.0);

  // time rescale t -> t / sigma shifts c by ln sigma
  const double sigma = 3.5;
  ScalarTrajectory tr2 = tr;
  for (double& t : tr2.t) t /= sigma;
  AsymptoticFit f2 = fit_asymptotics(tr2, 3, 1e4 / sigma, 1e8 / sigma);
  EXPECT_NEAR(f2.c_fit - f.c_fit, std::log(sigma), 1e-6);
}

TEST(ReducedDynamics, Errors) {
  SignedConfiguration pair = build_catalog("pair_alternating", 1);
  ForceLaw law = ForceLaw::synthetic(1.0, 0);
  ScalarTrajectory tr = integrate_symmetric(pair, law, 1.0, 3.0, 1e5);
  try {
    fit_asymptotics(tr, 1, 1e2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WindowTooShort);
  }
  try {
    integrate_symmetric(same_sign(pair), law, 1.0, 3.0, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotAdmissible);
  }
  ReducedState s{0, {pt({0}), pt({3})}, {}, {1, 1}};
  try {
    step_first_order(s, law, 1.0, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CollisionDetected);
  }
}

TEST(ReducedDynamics, SameSignCollapse) {
  const double A = 2, alpha = 1, r0 = 5;
  ForceLaw law = ForceLaw::synthetic(A, 0);
  CollapseReport pair = collapse_experiment({pt({0}), pt({r0})}, {1, 1}, law, alpha, 200, 400);
  ASSERT_TRUE(pair.collided);
  // e^r = e^{r0} - A t / alpha reaches r_lo = 2
  double tc = alpha * (std::exp(r0) - std::exp(2.0)) / A;
  EXPECT_NEAR(pair.collision_time, tc, 1e-2 * tc);

  SignedConfiguration tri = same_sign(build_catalog("triangle_center", 2));
  Points y = at_distance(tri, 4.0);
  CollapseReport r = collapse_experiment(y, tri.signs, law, alpha, 500, 500);
  EXPECT_TRUE(r.collided);
  EXPECT_TRUE(r.max_distance_nonincreasing);
}

TEST(ReducedDynamics, MinimalDistanceCanGrow) {
  // closest pair with two neighbours fanned out behind each member
  const double r = 3.0, rho = 3.3, c = std::cos(M_PI / 6), s = std::sin(M_PI / 6);
  Points y = {pt({-r / 2, 0}), pt({r / 2, 0}), pt({-r / 2 - rho * c, rho * s}), pt({-r / 2 - rho * c, -rho * s}),
              pt({r / 2 + rho * c, rho * s}), pt({r / 2 + rho * c, -rho * s})};
  ForceLaw law = ForceLaw::synthetic(1.0, 0);
  CollapseReport rep = collapse_experiment(y, std::vector<int>(6, 1), law, 1.0, 2.0, 400);
  ASSERT_FALSE(rep.min_increase_intervals.empty());
  EXPECT_NEAR(rep.min_increase_intervals.front().first, 0.0, 1e-12);
  EXPECT_GT(rep.max_min_increase, 0.0);

  // with four same-sign centers the minimal distance never grows
  Points rect = {pt({0, 0}), pt({2.5, 0}), pt({0, 9}), pt({2.5, 9})};
  CollapseReport rr = collapse_experiment(rect, {1, 1, 1, 1}, law, 1.0, 50, 400);
  EXPECT_TRUE(rr.min_increase_intervals.empty());
}
