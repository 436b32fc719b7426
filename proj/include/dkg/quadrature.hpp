#ifndef DKG_QUADRATURE_HPP
#define DKG_QUADRATURE_HPP

#include <cmath>
#include <map>
#include <utility>
#include <vector>

namespace dkg {

struct GaussRule {
  std::vector<double> x, w;  // on [-1, 1]
};

// Newton on P_n from Chebyshev guesses.
inline const GaussRule& gauss_legendre(int n) {
  static std::map<int, GaussRule> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GaussRule g;
  g.x.resize(n);
  g.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    g.x[i] = x;
    g.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(n, std::move(g)).first->second;
}

// Composite Gauss-Legendre over [a, b] split into m equal panels.
template <class F>
double integrate(F&& f, double a, double b, int panels, int order = 8) {
  const GaussRule& g = gauss_legendre(order);
  double h = (b - a) / panels, s = 0.0;
  for (int k = 0; k < panels; ++k) {
    double c = a + (k + 0.5) * h, acc = 0.0;
    for (int i = 0; i < order; ++i) acc += g.w[i] * f(c + 0.5 * h * g.x[i]);
    s += 0.5 * h * acc;
  }
  return s;
}

}  // namespace dkg

#endif
