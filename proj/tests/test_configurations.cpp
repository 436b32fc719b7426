#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "dkg/configurations.hpp"

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

Mat random_orthogonal(int d, std::mt19937& rng) {
  std::normal_distribution<double> n;
  Mat A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = n(rng);
  Eigen::HouseholderQR<Mat> qr(A);
  return qr.householderQ();
}

}  // namespace

TEST(Configurations, CatalogTable) {
  struct Row {
    std::string name;
    int d;
    double gamma, lambda;
    bool admissible;
  };
  const double s = std::sqrt(2.0);
  std::vector<Row> rows = {
      {"triangle_center", 2, 1, 1, true},       {"square_center", 2, 1, 1, true},
      {"pentagon_center", 2, 1, 1, true},       {"tetrahedron_center", 3, 1, 1, true},
      {"octahedron_center", 3, 1, 1, true},     {"cube_center", 3, 1, 1, true},
      {"icosahedron_center", 3, 1, 1, true},    {"simplex_center", 5, 1, 1, true},
      {"orthoplex_center", 4, 1, 1, true},      {"polygon_alternating(4)", 2, s, 1 / s, true},
      {"polygon_alternating(6)", 2, 1, 1, true}, {"hypercube_alternating(3)", 3, std::sqrt(3.0), std::sqrt(3.0) / 2, true},
  };
  auto t0 = std::chrono::steady_clock::now();
  for (const Row& r : rows) {
    SignedConfiguration c = build_catalog(r.name, r.d);
    ValidationReport v = validate(c);
    EXPECT_NEAR(c.gamma, r.gamma, 1e-12) << r.name;
    EXPECT_NEAR(c.lambda_omega, r.lambda, 1e-12) << r.name;
    EXPECT_EQ(v.admissible, r.admissible) << r.name;
    EXPECT_TRUE(v.equivariant) << r.name;
    EXPECT_LE(v.center_of_mass, 1e-12) << r.name;
    EXPECT_GT(c.theta_ratio, 1.0) << r.name;
    EXPECT_NEAR(c.gamma_raw, c.gamma / c.lambda_omega, 1e-12) << r.name;
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1.0);
}

TEST(Configurations, Rejections) {
  ValidationReport hex = validate(build_catalog("hexagon_center", 2));
  EXPECT_NEAR(hex.gamma, 0.0, 1e-12);
  EXPECT_FALSE(hex.admissible);
  ValidationReport dod = validate(build_catalog("dodecahedron_center", 3));
  EXPECT_LT(dod.gamma, 0.0);
  EXPECT_FALSE(dod.admissible);
  EXPECT_TRUE(dod.equivariant);
  SignedConfiguration sq = same_sign(build_catalog("square_center", 2));
  ValidationReport v = validate(sq);
  EXPECT_TRUE(v.equivariant);
  for (const auto& g : v.generators) EXPECT_EQ(g.tau, 1);
  EXPECT_LT(sq.gamma, 0.0);
  EXPECT_FALSE(v.admissible);
  EXPECT_FALSE(validate(build_catalog("polygon_center(7)", 2)).admissible);
}

TEST(Configurations, PolygonFamilyAndHypercube) {
  for (int K = 2; K <= 6; ++K) {
    SignedConfiguration c = build_catalog("polygon_alternating(" + std::to_string(2 * K) + ")", 2);
    EXPECT_NEAR(c.gamma, 2 * std::sin(M_PI / (2 * K)), 1e-12);
    EXPECT_NEAR(c.lambda_omega, 1 / c.gamma, 1e-12);
    EXPECT_TRUE(validate(c).admissible);
  }
  for (int K = 1; K <= 4; ++K) {
    SignedConfiguration c = build_catalog("hypercube_alternating(" + std::to_string(K) + ")", std::max(K, 1));
    ValidationReport v = validate(c);
    EXPECT_NEAR(c.gamma, std::sqrt(double(K)), 1e-12);
    EXPECT_NEAR(c.lambda_stated, 2 / std::sqrt(double(K)), 1e-12);
    EXPECT_NEAR(1 / c.lambda_omega, c.lambda_stated, 1e-12);  // stated value is the edge at unit circumradius
    EXPECT_NEAR(c.gamma_raw, 2.0, 1e-12);
    EXPECT_LE(v.parallelism_residual, 1e-12);
    EXPECT_TRUE(v.admissible) << K;
    for (const auto& nb : c.neighbour_sets) EXPECT_EQ(static_cast<int>(nb.size()), K);
  }
  // square vs 2-cube at equal circumradius
  SignedConfiguration a = build_catalog("polygon_alternating(4)", 2), b = build_catalog("hypercube_alternating(2)", 2);
  EXPECT_NEAR(a.gamma, b.gamma, 1e-12);
  EXPECT_NEAR(a.lambda_omega, b.lambda_omega, 1e-12);
}

TEST(Configurations, EmbeddingAndErrors) {
  SignedConfiguration c = build_catalog("triangle_center", 4);
  EXPECT_EQ(c.dim, 4);
  EXPECT_TRUE(validate(c).admissible);
  EXPECT_EQ(code_of([] { build_catalog("cube_center", 2); }), ErrorCode::DimensionTooSmall);
  EXPECT_EQ(code_of([] { build_catalog("hypercube_alternating(5)", 4); }), ErrorCode::DimensionTooSmall);
  EXPECT_EQ(code_of([] { build_catalog("rhombicuboctahedron", 3); }), ErrorCode::UnknownName);
  EXPECT_EQ(build_catalog("polygon_alternating:8", 2).size(), 8u);
}

TEST(Configurations, GroupOrders) {
  EXPECT_EQ(group_closure(build_catalog("icosahedron_center", 3)).size(), 120u);
  EXPECT_EQ(group_closure(build_catalog("tetrahedron_center", 3)).size(), 24u);
  EXPECT_EQ(group_closure(build_catalog("cube_center", 3)).size(), 48u);
  EXPECT_EQ(group_closure(build_catalog("square_alternating", 2)).size(), 8u);
  EXPECT_EQ(group_closure(build_catalog("simplex_center(4)", 4)).size(), 120u);
}

TEST(Configurations, SimilarityExtraction) {
  std::mt19937 rng(7);
  for (const char* name : {"tetrahedron_center", "icosahedron_center", "square_alternating"}) {
    SignedConfiguration c = build_catalog(name, 3);
    Mat R0 = random_orthogonal(3, rng);
    Point t0(3);
    t0 << 0.3, -1.2, 2.0;
    Points pts;
    for (const Point& v : c.vertices) pts.push_back(3 * R0 * v + t0);
    SimilarityFit f = similarity_extract(c, pts);
    EXPECT_NEAR(f.lambda, 3.0, 1e-12);
    EXPECT_LE((f.tau - t0).norm(), 1e-10);
    EXPECT_LE(f.residual, 1e-10);
    // R agrees with R0 on the vertex span
    for (const Point& v : c.vertices) EXPECT_LE((f.R * v - R0 * v).norm(), 1e-10);
    SimilarityFit id = similarity_extract(c, c.vertices);
    EXPECT_NEAR(id.lambda, 1.0, 1e-12);
    EXPECT_LE(id.tau.norm(), 1e-12);
    std::normal_distribution<double> n(0, 1e-3);
    Points noisy = c.vertices;
    for (Point& p : noisy)
      for (int i = 0; i < 3; ++i) p[i] += n(rng);
    SimilarityFit nf = similarity_extract(c, noisy);
    EXPECT_NEAR(nf.lambda, 1.0, 1e-3);
    EXPECT_LE(nf.residual, 1e-2);
    EXPECT_GE(nf.residual, 1e-5);
  }
  EXPECT_EQ(code_of([] {
              SignedConfiguration p = build_catalog("pair_alternating", 2);
              similarity_extract(p, p.vertices);
            }),
            ErrorCode::RankDeficient);
}
