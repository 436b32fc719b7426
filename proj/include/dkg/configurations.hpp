#ifndef DKG_CONFIGURATIONS_HPP
#define DKG_CONFIGURATIONS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "params.hpp"

namespace dkg {

using Mat = Eigen::MatrixXd;

struct SignedConfiguration {
  std::string name;
  int dim = 0;
  Points vertices;
  std::vector<int> signs;
  std::vector<Mat> generators;
  double gamma = 0;         // -mu, S(w) = mu w/|w| with unit differences at unit circumradius
  double gamma_raw = 0;     // scale free constant of r' = gamma_raw g(r) / (2 alpha)
  double lambda_omega = 0;  // 1 / min pair distance
  double lambda_stated = 0; // tabulated value where it differs (hypercube), else lambda_omega
  double theta_ratio = 0;
  std::vector<std::vector<int>> neighbour_sets;

  std::size_t size() const { return vertices.size(); }
};

struct GeneratorCheck {
  bool maps_vertices = false;
  bool sign_equivariant = false;
  int tau = 0;
  double residual = 0;
  std::vector<int> permutation;
};

struct ValidationReport {
  std::vector<GeneratorCheck> generators;
  bool equivariant = false;
  double center_of_mass = 0;
  double parallelism_residual = 0;  // max angle between S(w) and w
  double scalar_spread = 0;         // spread of the proportionality scalar
  double center_force = 0;          // |S(0)| when 0 is a vertex
  double mu = 0;
  double gamma = 0, gamma_raw = 0, lambda_omega = 0, theta_ratio = 0;
  bool admissible = false;
};

namespace detail {

inline Point embed(const Eigen::VectorXd& v, int d) {
  Point p = Point::Zero(d);
  p.head(v.size()) = v;
  return p;
}

inline Mat embed_matrix(const Mat& M, int d) {
  Mat R = Mat::Identity(d, d);
  R.topLeftCorner(M.rows(), M.cols()) = M;
  return R;
}

// flips of the coordinates beyond the polytope's span
inline void add_complement_flips(std::vector<Mat>& gens, int n, int d) {
  for (int k = n; k < d; ++k) {
    Mat R = Mat::Identity(d, d);
    R(k, k) = -1;
    gens.push_back(R);
  }
}

inline Mat rotation2(double t) {
  Mat R(2, 2);
  R << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return R;
}

inline Mat rodrigues(Eigen::Vector3d axis, double t) {
  axis.normalize();
  Eigen::Matrix3d K;
  K << 0, -axis[2], axis[1], axis[2], 0, -axis[0], -axis[1], axis[0], 0;
  return Eigen::Matrix3d::Identity() + std::sin(t) * K + (1 - std::cos(t)) * K * K;
}

// hyperoctahedral group B_n: adjacent transpositions and one sign flip
inline std::vector<Mat> hyperoctahedral(int n) {
  std::vector<Mat> g;
  for (int i = 0; i + 1 < n; ++i) {
    Mat P = Mat::Identity(n, n);
    P.row(i).swap(P.row(i + 1));
    g.push_back(P);
  }
  Mat F = Mat::Identity(n, n);
  F(0, 0) = -1;
  g.push_back(F);
  return g;
}

inline std::vector<Mat> icosahedral() {
  const double phi = 0.5 * (1 + std::sqrt(5.0));
  Mat C(3, 3);
  C << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  Mat F = Mat::Identity(3, 3);
  F(0, 0) = -1;
  return {C, F, rodrigues(Eigen::Vector3d(0, 1, phi), 2 * M_PI / 5)};
}

// Helmert basis of the sum-zero hyperplane in R^{n+1}
inline Mat helmert(int n) {
  Mat B = Mat::Zero(n + 1, n);
  for (int k = 1; k <= n; ++k) {
    double c = 1.0 / std::sqrt(k * (k + 1.0));
    for (int i = 0; i < k; ++i) B(i, k - 1) = c;
    B(k, k - 1) = -k * c;
  }
  return B;
}

}  // namespace detail

// Shape vector S(w) = s_w sum_{v in N(w)} s_v (w - v)/|w - v|.
inline Point shape_vector(const SignedConfiguration& c, std::size_t w) {
  Point S = Point::Zero(c.dim);
  for (int v : c.neighbour_sets[w]) S += c.signs[w] * c.signs[v] * (c.vertices[w] - c.vertices[v]).normalized();
  return S;
}

// Nearest-neighbour shells (relative 1e-9), lambda, theta, gamma.
inline void compute_geometry(SignedConfiguration& c) {
  const std::size_t n = c.size();
  require(n >= 2, ErrorCode::DegenerateConfiguration, "need at least two vertices");
  c.neighbour_sets.assign(n, {});
  double dmin = INFINITY;
  c.theta_ratio = INFINITY;
  for (std::size_t w = 0; w < n; ++w) {
    double m = INFINITY;
    for (std::size_t v = 0; v < n; ++v)
      if (v != w) m = std::min(m, (c.vertices[w] - c.vertices[v]).norm());
    require(m > 1e-12, ErrorCode::DegenerateConfiguration, "coincident vertices");
    dmin = std::min(dmin, m);
    for (std::size_t v = 0; v < n; ++v) {
      if (v == w) continue;
      double r = (c.vertices[w] - c.vertices[v]).norm();
      if (r <= m * (1 + 1e-9))
        c.neighbour_sets[w].push_back(static_cast<int>(v));
      else
        c.theta_ratio = std::min(c.theta_ratio, r / m);
    }
  }
  c.lambda_omega = 1.0 / dmin;
  if (c.lambda_stated == 0) c.lambda_stated = c.lambda_omega;
  // mu from the vertices of maximal norm
  double rmax = 0;
  for (const Point& p : c.vertices) rmax = std::max(rmax, p.norm());
  double mu = 0, raw = 0;
  int cnt = 0;
  for (std::size_t w = 0; w < n; ++w) {
    double r = c.vertices[w].norm();
    if (r < 1e-12 * rmax) continue;
    Point S = shape_vector(c, w);
    mu += S.dot(c.vertices[w]) / r;
    raw += S.dot(c.vertices[w]) / (r * r);
    ++cnt;
  }
  c.gamma = cnt ? -mu / cnt : 0.0;
  c.gamma_raw = cnt ? -raw / cnt / c.lambda_omega : 0.0;
  // exact cancellations (hexagon with center) come out at roundoff level
  if (std::fabs(c.gamma) < 1e-12) c.gamma = c.gamma_raw = 0.0;
}

inline int find_vertex(const SignedConfiguration& c, const Point& x, double tol, double& err) {
  int best = -1;
  err = INFINITY;
  for (std::size_t v = 0; v < c.size(); ++v) {
    double e = (c.vertices[v] - x).norm();
    if (e < err) {
      err = e;
      best = static_cast<int>(v);
    }
  }
  return err <= tol ? best : -1;
}

inline GeneratorCheck check_generator(const SignedConfiguration& c, const Mat& R) {
  GeneratorCheck g;
  double scale = 0;
  for (const Point& p : c.vertices) scale = std::max(scale, p.norm());
  g.maps_vertices = true;
  g.sign_equivariant = true;
  g.permutation.assign(c.size(), -1);
  for (std::size_t w = 0; w < c.size(); ++w) {
    double err;
    int v = find_vertex(c, R * c.vertices[w], 1e-9 * std::max(1.0, scale), err);
    g.residual = std::max(g.residual, err);
    if (v < 0) {
      g.maps_vertices = false;
      g.sign_equivariant = false;
      continue;
    }
    g.permutation[w] = v;
    int t = c.signs[v] * c.signs[w];
    if (g.tau == 0) g.tau = t;
    if (t != g.tau) g.sign_equivariant = false;
  }
  return g;
}

inline ValidationReport validate(const SignedConfiguration& c) {
  ValidationReport rep;
  rep.equivariant = true;
  for (const Mat& R : c.generators) {
    GeneratorCheck g = check_generator(c, R);
    Mat RtR = R.transpose() * R - Mat::Identity(c.dim, c.dim);
    if (RtR.cwiseAbs().maxCoeff() > 1e-12) g.maps_vertices = g.sign_equivariant = false;
    rep.equivariant = rep.equivariant && g.maps_vertices && g.sign_equivariant;
    rep.generators.push_back(g);
  }
  Point com = Point::Zero(c.dim);
  double rmax = 0;
  for (const Point& p : c.vertices) {
    com += p;
    rmax = std::max(rmax, p.norm());
  }
  rep.center_of_mass = com.norm();
  double mn = INFINITY, mx = -INFINITY;
  for (std::size_t w = 0; w < c.size(); ++w) {
    Point S = shape_vector(c, w);
    double r = c.vertices[w].norm();
    if (r < 1e-12 * rmax) {
      rep.center_force = std::max(rep.center_force, S.norm());
      continue;
    }
    double mu = S.dot(c.vertices[w]) / r;
    double perp = (S - mu * c.vertices[w] / r).norm();
    rep.parallelism_residual = std::max(rep.parallelism_residual, std::atan2(perp, std::fabs(mu)));
    mn = std::min(mn, mu / r);
    mx = std::max(mx, mu / r);
  }
  rep.scalar_spread = mx - mn;
  rep.mu = 0.5 * (mn + mx);
  rep.gamma = c.gamma;
  rep.gamma_raw = c.gamma_raw;
  rep.lambda_omega = c.lambda_omega;
  rep.theta_ratio = c.theta_ratio;
  bool scalars = std::fabs(rep.scalar_spread) <= 1e-10 * std::max(1.0, std::fabs(rep.mu));
  rep.admissible = rep.equivariant && rep.center_of_mass <= 1e-12 * std::max(1.0, rmax) &&
                   rep.parallelism_residual <= 1e-10 && scalars && rep.center_force <= 1e-10 &&
                   c.gamma > 1e-12 && c.theta_ratio > 1;
  return rep;
}

namespace detail {

inline SignedConfiguration make(std::string name, int d, const std::vector<Eigen::VectorXd>& pts,
                                std::vector<int> signs, std::vector<Mat> gens, int span) {
  SignedConfiguration c;
  c.name = std::move(name);
  c.dim = d;
  for (const auto& p : pts) c.vertices.push_back(embed(p, d));
  c.signs = std::move(signs);
  for (const Mat& g : gens) c.generators.push_back(embed_matrix(g, d));
  add_complement_flips(c.generators, span, d);
  return c;
}

inline std::vector<Eigen::VectorXd> polygon(int n) {
  std::vector<Eigen::VectorXd> v;
  for (int k = 0; k < n; ++k) v.push_back(Eigen::Vector2d(std::cos(2 * M_PI * k / n), std::sin(2 * M_PI * k / n)));
  return v;
}

inline std::vector<Mat> dihedral(int n) {
  Mat F = Mat::Identity(2, 2);
  F(1, 1) = -1;
  return {rotation2(2 * M_PI / n), F};
}

inline std::vector<Eigen::VectorXd> normalized(std::vector<Eigen::VectorXd> v) {
  for (auto& x : v) x.normalize();
  return v;
}

inline std::vector<Eigen::VectorXd> cyclic3(const std::vector<Eigen::Vector3d>& base) {
  std::vector<Eigen::VectorXd> v;
  for (const auto& b : base)
    for (int s = 0; s < 3; ++s) v.push_back(Eigen::Vector3d(b[s % 3], b[(s + 1) % 3], b[(s + 2) % 3]));
  return v;
}

inline std::vector<Eigen::VectorXd> icosahedron_vertices() {
  const double phi = 0.5 * (1 + std::sqrt(5.0));
  std::vector<Eigen::Vector3d> base;
  for (int a : {-1, 1})
    for (int b : {-1, 1}) base.emplace_back(0, a, b * phi);
  return normalized(cyclic3(base));
}

inline std::vector<Eigen::VectorXd> dodecahedron_vertices() {
  const double phi = 0.5 * (1 + std::sqrt(5.0));
  std::vector<Eigen::VectorXd> v;
  for (int a : {-1, 1})
    for (int b : {-1, 1})
      for (int c : {-1, 1}) v.push_back(Eigen::Vector3d(a, b, c));
  std::vector<Eigen::Vector3d> base;
  for (int a : {-1, 1})
    for (int b : {-1, 1}) base.emplace_back(0, a * phi, b / phi);
  for (auto& x : cyclic3(base)) v.push_back(x);
  return normalized(v);
}

inline SignedConfiguration with_center(std::string name, int d, std::vector<Eigen::VectorXd> pts,
                                       std::vector<Mat> gens, int span) {
  std::vector<Eigen::VectorXd> all{Eigen::VectorXd::Zero(span)};
  for (auto& p : pts) all.push_back(p);
  std::vector<int> signs(all.size(), 1);
  signs[0] = -1;
  return make(std::move(name), d, all, signs, std::move(gens), span);
}

inline std::pair<std::string, int> parse_name(const std::string& s) {
  auto lp = s.find('(');
  if (lp != std::string::npos) {
    require(s.back() == ')', ErrorCode::UnknownName, "malformed name " + s);
    return {s.substr(0, lp), std::stoi(s.substr(lp + 1, s.size() - lp - 2))};
  }
  auto colon = s.find(':');
  if (colon != std::string::npos) return {s.substr(0, colon), std::stoi(s.substr(colon + 1))};
  return {s, -1};
}

}  // namespace detail

// Catalog entries at unit circumradius.
inline SignedConfiguration build_catalog(const std::string& full_name, int d) {
  using namespace detail;
  require(d >= 1 && d <= 8, ErrorCode::InvalidParams, "dimension must lie in 1..8");
  auto [name, arg] = parse_name(full_name);
  auto need = [&](int n) { require(d >= n, ErrorCode::DimensionTooSmall, name + " needs d >= " + std::to_string(n)); };
  SignedConfiguration c;
  const std::map<std::string, int> centered_polygons = {
      {"triangle_center", 3}, {"square_center", 4}, {"pentagon_center", 5}, {"hexagon_center", 6}};
  if (auto it = centered_polygons.find(name); it != centered_polygons.end()) {
    need(2);
    c = with_center(name, d, polygon(it->second), dihedral(it->second), 2);
  } else if (name == "polygon_center") {
    require(arg >= 3, ErrorCode::InvalidParams, "polygon_center(n) needs n >= 3");
    need(2);
    c = with_center(full_name, d, polygon(arg), dihedral(arg), 2);
  } else if (name == "tetrahedron_center") {
    need(3);
    std::vector<Eigen::VectorXd> v = {Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(1, -1, -1),
                                      Eigen::Vector3d(-1, 1, -1), Eigen::Vector3d(-1, -1, 1)};
    Mat sw = Mat::Identity(3, 3);
    sw.row(0).swap(sw.row(1));
    Mat cyc(3, 3);
    cyc << 0, 0, 1, 1, 0, 0, 0, 1, 0;
    Mat fl = Mat::Identity(3, 3);
    fl(1, 1) = fl(2, 2) = -1;
    c = with_center(name, d, normalized(v), {sw, cyc, fl}, 3);
  } else if (name == "octahedron_center" || name == "orthoplex_center") {
    int n = name == "octahedron_center" ? 3 : (arg > 0 ? arg : d);
    need(n);
    std::vector<Eigen::VectorXd> v;
    for (int k = 0; k < n; ++k)
      for (int s : {1, -1}) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        e[k] = s;
        v.push_back(e);
      }
    c = with_center(name == "orthoplex_center" ? "orthoplex_center(" + std::to_string(n) + ")" : name, d, v,
                    hyperoctahedral(n), n);
  } else if (name == "cube_center") {
    need(3);
    std::vector<Eigen::VectorXd> v;
    for (int a : {-1, 1})
      for (int b : {-1, 1})
        for (int e : {-1, 1}) v.push_back(Eigen::Vector3d(a, b, e));
    c = with_center(name, d, normalized(v), hyperoctahedral(3), 3);
  } else if (name == "icosahedron_center") {
    need(3);
    c = with_center(name, d, icosahedron_vertices(), icosahedral(), 3);
  } else if (name == "dodecahedron_center") {
    need(3);
    c = with_center(name, d, dodecahedron_vertices(), icosahedral(), 3);
  } else if (name == "simplex_center") {
    int n = arg > 0 ? arg : d;
    require(n >= 1, ErrorCode::InvalidParams, "simplex needs n >= 1");
    need(n);
    Mat B = helmert(n);
    std::vector<Eigen::VectorXd> v;
    for (int k = 0; k <= n; ++k) v.push_back(B.row(k).transpose().normalized());
    std::vector<Mat> gens;
    for (int k = 0; k < n; ++k) {
      Mat P = Mat::Identity(n + 1, n + 1);
      P.row(k).swap(P.row(k + 1));
      gens.push_back(B.transpose() * P * B);
    }
    c = with_center("simplex_center(" + std::to_string(n) + ")", d, v, gens, n);
  } else if (name == "polygon_alternating" || name == "square_alternating") {
    int n = name == "square_alternating" ? 4 : arg;
    require(n >= 4 && n % 2 == 0, ErrorCode::InvalidParams, "polygon_alternating(2K) needs even 2K >= 4");
    need(2);
    std::vector<int> s(n);
    for (int k = 0; k < n; ++k) s[k] = k % 2 == 0 ? 1 : -1;
    c = make(name == "square_alternating" ? name : "polygon_alternating(" + std::to_string(n) + ")", d, polygon(n),
             s, dihedral(n), 2);
  } else if (name == "hypercube_alternating" || name == "pair_alternating") {
    int K = name == "pair_alternating" ? 1 : (arg > 0 ? arg : d);
    require(K >= 1, ErrorCode::InvalidParams, "hypercube needs K >= 1");
    need(K);
    std::vector<Eigen::VectorXd> v;
    std::vector<int> s;
    for (int m = 0; m < (1 << K); ++m) {
      Eigen::VectorXd x(K);
      int sg = 1;
      for (int k = 0; k < K; ++k) {
        x[k] = (m >> k & 1) ? -1.0 : 1.0;
        sg *= (m >> k & 1) ? -1 : 1;
      }
      v.push_back(x / std::sqrt(double(K)));
      s.push_back(sg);
    }
    c = make(name == "pair_alternating" ? name : "hypercube_alternating(" + std::to_string(K) + ")", d, v, s,
             hyperoctahedral(K), K);
    c.lambda_stated = 2.0 / std::sqrt(double(K));
  } else {
    fail(ErrorCode::UnknownName, "unknown configuration " + full_name);
  }
  compute_geometry(c);
  return c;
}

inline const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> n = {
      "triangle_center",    "square_center",      "pentagon_center",      "hexagon_center",
      "tetrahedron_center", "octahedron_center",  "cube_center",          "icosahedron_center",
      "dodecahedron_center", "simplex_center",    "orthoplex_center",     "polygon_alternating(4)",
      "polygon_alternating(6)", "polygon_alternating(8)", "polygon_alternating(10)", "polygon_alternating(12)",
      "hypercube_alternating(1)", "hypercube_alternating(2)", "hypercube_alternating(3)",
      "hypercube_alternating(4)"};
  return n;
}

// All signs set to +1 (for collapse experiments).
inline SignedConfiguration same_sign(SignedConfiguration c) {
  std::fill(c.signs.begin(), c.signs.end(), 1);
  c.name += "+same_sign";
  compute_geometry(c);
  return c;
}

inline SignedConfiguration scaled(SignedConfiguration c, double s) {
  for (Point& p : c.vertices) p *= s;
  compute_geometry(c);
  return c;
}

// Scaled orthogonal Procrustes: points ~ lambda R vertex + tau.
struct SimilarityFit {
  double lambda = 0;
  Mat R;
  Point tau;
  double residual = 0;
};

inline SimilarityFit similarity_extract(const SignedConfiguration& c, const Points& pts) {
  require(pts.size() == c.size(), ErrorCode::InvalidParams, "point count mismatch");
  const int d = c.dim;
  const std::size_t n = c.size();
  Mat X(d, n), P(d, n);
  for (std::size_t i = 0; i < n; ++i) {
    require(pts[i].size() == d, ErrorCode::InvalidParams, "point dimension mismatch");
    X.col(i) = c.vertices[i];
    P.col(i) = pts[i];
  }
  Point xm = X.rowwise().mean(), pm = P.rowwise().mean();
  Mat Xc = X.colwise() - xm, Pc = P.colwise() - pm;
  Eigen::JacobiSVD<Mat> sx(Xc);
  int rank = 0;
  for (int i = 0; i < sx.singularValues().size(); ++i)
    if (sx.singularValues()[i] > 1e-10 * sx.singularValues()[0]) ++rank;
  require(!(rank <= 1 && d >= 2), ErrorCode::RankDeficient, "collinear vertices: rotation ambiguous");
  Eigen::JacobiSVD<Mat> svd(Pc * Xc.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  SimilarityFit f;
  f.R = svd.matrixU() * svd.matrixV().transpose();
  f.lambda = svd.singularValues().sum() / Xc.squaredNorm();
  f.tau = pm - f.lambda * f.R * xm;
  for (std::size_t i = 0; i < n; ++i)
    f.residual = std::max(f.residual, (f.lambda * f.R * X.col(i) + f.tau - P.col(i)).norm());
  return f;
}

// Full group by closure of the generators, with the induced vertex permutations.
struct GroupElement {
  Mat R;
  std::vector<int> perm;
  int tau = 1;
};

inline std::vector<GroupElement> group_closure(const SignedConfiguration& c, std::size_t max_order = 5000) {
  std::vector<GroupElement> els;
  GroupElement e;
  e.R = Mat::Identity(c.dim, c.dim);
  e.perm.resize(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) e.perm[i] = static_cast<int>(i);
  els.push_back(e);
  auto same = [](const Mat& A, const Mat& B) { return (A - B).cwiseAbs().maxCoeff() < 1e-8; };
  for (std::size_t k = 0; k < els.size(); ++k)
    for (const Mat& g : c.generators) {
      Mat M = g * els[k].R;
      bool found = false;
      for (const auto& x : els)
        if (same(x.R, M)) {
          found = true;
          break;
        }
      if (found) continue;
      require(els.size() < max_order, ErrorCode::InvalidParams, "group too large to enumerate");
      GeneratorCheck chk = check_generator(c, M);
      require(chk.maps_vertices && chk.sign_equivariant, ErrorCode::DegenerateConfiguration,
              "generator does not preserve the signed configuration");
      els.push_back({M, chk.permutation, chk.tau});
    }
  return els;
}

}  // namespace dkg

#endif
