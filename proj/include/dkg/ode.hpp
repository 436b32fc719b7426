#ifndef DKG_ODE_HPP
#define DKG_ODE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace dkg {

struct OdeTolerances {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_init = 0.0;
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 50'000'000;
};

// Dormand-Prince 5(4), FSAL, PI step control.
template <class Rhs>
class DormandPrince {
 public:
  using Vec = Eigen::VectorXd;

  DormandPrince(Rhs rhs, double t0, Vec y0, OdeTolerances tol = {})
      : rhs_(std::move(rhs)), t_(t0), y_(std::move(y0)), tol_(tol) {
    k1_ = rhs_(t_, y_);
    h_ = tol_.h_init > 0 ? tol_.h_init : initial_step();
  }

  double t() const { return t_; }
  const Vec& y() const { return y_; }
  const Vec& dy() const { return k1_; }
  double last_step() const { return h_last_; }
  long steps() const { return steps_; }

  // One accepted step, never past t_stop.
  void step(double t_stop) {
    double dir = t_stop >= t_ ? 1.0 : -1.0;
    for (;;) {
      require(++tries_ < tol_.max_steps, ErrorCode::NoConvergence, "ode step budget exhausted");
      double h = std::min({h_, tol_.h_max, std::fabs(t_stop - t_)});
      bool last = h >= std::fabs(t_stop - t_);
      double hs = dir * h;
      static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
      static constexpr double a21 = 1.0 / 5;
      static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
      static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
      static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                              a54 = -212.0 / 729;
      static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                              a64 = 49.0 / 176, a65 = -5103.0 / 18656;
      static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                              b5 = -2187.0 / 6784, b6 = 11.0 / 84;
      static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                              e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
      Vec k2 = rhs_(t_ + c2 * hs, y_ + hs * a21 * k1_);
      Vec k3 = rhs_(t_ + c3 * hs, y_ + hs * (a31 * k1_ + a32 * k2));
      Vec k4 = rhs_(t_ + c4 * hs, y_ + hs * (a41 * k1_ + a42 * k2 + a43 * k3));
      Vec k5 = rhs_(t_ + c5 * hs, y_ + hs * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4));
      Vec k6 = rhs_(t_ + hs, y_ + hs * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      Vec yn = y_ + hs * (b1 * k1_ + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      Vec k7 = rhs_(t_ + hs, yn);
      Vec err = hs * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double en = 0.0;
      for (Eigen::Index i = 0; i < yn.size(); ++i) {
        double sc = tol_.atol + tol_.rtol * std::max(std::fabs(y_[i]), std::fabs(yn[i]));
        en = std::max(en, std::fabs(err[i]) / sc);
      }
      if (!std::isfinite(en)) {
        h_ *= 0.1;
        require(h_ > 1e-300, ErrorCode::NoConvergence, "ode step underflow");
        continue;
      }
      if (en <= 1.0) {
        double fac = en == 0.0 ? 5.0
                               : std::clamp(0.9 * std::pow(en, -0.7 / 5) * std::pow(err_prev_, 0.4 / 5), 0.2, 5.0);
        err_prev_ = std::max(en, 1e-4);
        t_ = last ? t_stop : t_ + hs;
        y_ = std::move(yn);
        k1_ = std::move(k7);
        h_last_ = h;
        h_ = h * (rejected_ ? std::min(fac, 1.0) : fac);
        rejected_ = false;
        ++steps_;
        return;
      }
      h_ = h * std::max(0.2, 0.9 * std::pow(en, -0.2));
      rejected_ = true;
      require(h_ > 1e-300, ErrorCode::NoConvergence, "ode step underflow");
    }
  }

  void integrate_to(double t_stop) {
    while (t_ != t_stop) step(t_stop);
  }

  void reset(double t0, Vec y0) {
    t_ = t0;
    y_ = std::move(y0);
    k1_ = rhs_(t_, y_);
  }

 private:
  double initial_step() {
    double d0 = 0, d1 = 0;
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      double sc = tol_.atol + tol_.rtol * std::fabs(y_[i]);
      d0 = std::max(d0, std::fabs(y_[i]) / sc);
      d1 = std::max(d1, std::fabs(k1_[i]) / sc);
    }
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    return std::min(h, tol_.h_max);
  }

  Rhs rhs_;
  double t_;
  Vec y_, k1_;
  OdeTolerances tol_;
  double h_ = 0, h_last_ = 0, err_prev_ = 1e-4;
  bool rejected_ = false;
  long steps_ = 0, tries_ = 0;
};

}  // namespace dkg

#endif
