#ifndef DKG_PARAMS_HPP
#define DKG_PARAMS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"

namespace dkg {

using Point = Eigen::VectorXd;
using Points = std::vector<Point>;

// Model u_tt + 2 alpha u_t - Lap u + u - |u|^{p-1} u = 0 on R^d.
struct ModelParams {
  int d = 1;
  double p = 3.0;
  double alpha = 1.0;

  double p_upper() const { return d <= 2 ? INFINITY : (d + 2.0) / (d - 2.0); }

  void validate() const {
    require(d >= 1 && d <= 5, ErrorCode::InvalidParams, "dimension must lie in 1..5");
    require(std::isfinite(p) && p > 2.0, ErrorCode::InvalidParams, "p must exceed 2");
    require(p < p_upper(), ErrorCode::InvalidParams, "p must be energy subcritical");
    require(std::isfinite(alpha) && alpha > 0.0, ErrorCode::InvalidParams, "alpha must be positive");
  }
};

inline double sphere_area(int d) {
  return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

// f(u) = |u|^{p-1} u and its primitive.
inline double nonlin(double u, double p) { return std::pow(std::fabs(u), p - 1.0) * u; }
inline double nonlin_prim(double u, double p) { return std::pow(std::fabs(u), p + 1.0) / (p + 1.0); }
inline double nonlin_deriv(double u, double p) { return p * std::pow(std::fabs(u), p - 1.0); }

}  // namespace dkg

#endif
