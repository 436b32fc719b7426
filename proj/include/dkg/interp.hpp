#ifndef DKG_INTERP_HPP
#define DKG_INTERP_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "error.hpp"

namespace dkg {

// Quintic Hermite interpolation on a uniform grid from f, f', f''.
class QuinticHermite {
 public:
  QuinticHermite() = default;
  QuinticHermite(double x0, double h, std::vector<double> f, std::vector<double> df,
                 std::vector<double> d2f)
      : x0_(x0), h_(h), f_(std::move(f)), df_(std::move(df)), d2f_(std::move(d2f)) {
    require(f_.size() >= 2 && df_.size() == f_.size() && d2f_.size() == f_.size(),
            ErrorCode::InvalidParams, "hermite tables mismatch");
  }

  double x_front() const { return x0_; }
  double x_back() const { return x0_ + h_ * (f_.size() - 1); }

  // derivative order k in {0,1,2}
  double eval(double x, int k = 0) const {
    long n = static_cast<long>(f_.size());
    long i = static_cast<long>(std::floor((x - x0_) / h_));
    i = std::clamp(i, 0L, n - 2);
    double s = (x - x0_) / h_ - i, h = h_;
    double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    double b[6];
    if (k == 0) {
      b[0] = 1 - 10 * s3 + 15 * s4 - 6 * s5;
      b[1] = s - 6 * s3 + 8 * s4 - 3 * s5;
      b[2] = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5);
      b[3] = 10 * s3 - 15 * s4 + 6 * s5;
      b[4] = -4 * s3 + 7 * s4 - 3 * s5;
      b[5] = 0.5 * (s3 - 2 * s4 + s5);
    } else if (k == 1) {
      b[0] = -30 * s2 + 60 * s3 - 30 * s4;
      b[1] = 1 - 18 * s2 + 32 * s3 - 15 * s4;
      b[2] = 0.5 * (2 * s - 9 * s2 + 12 * s3 - 5 * s4);
      b[3] = 30 * s2 - 60 * s3 + 30 * s4;
      b[4] = -12 * s2 + 28 * s3 - 15 * s4;
      b[5] = 0.5 * (3 * s2 - 8 * s3 + 5 * s4);
    } else {
      b[0] = -60 * s + 180 * s2 - 120 * s3;
      b[1] = -36 * s + 96 * s2 - 60 * s3;
      b[2] = 0.5 * (2 - 18 * s + 36 * s2 - 20 * s3);
      b[3] = 60 * s - 180 * s2 + 120 * s3;
      b[4] = -24 * s + 84 * s2 - 60 * s3;
      b[5] = 0.5 * (6 * s - 24 * s2 + 20 * s3);
    }
    double v = b[0] * f_[i] + b[1] * h * df_[i] + b[2] * h * h * d2f_[i] + b[3] * f_[i + 1] +
               b[4] * h * df_[i + 1] + b[5] * h * h * d2f_[i + 1];
    return k == 0 ? v : (k == 1 ? v / h : v / (h * h));
  }

 private:
  double x0_ = 0, h_ = 1;
  std::vector<double> f_, df_, d2f_;
};

// Natural cubic spline on arbitrary increasing nodes.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    std::size_t n = x_.size();
    require(n >= 2 && y_.size() == n, ErrorCode::InvalidParams, "spline needs >= 2 nodes");
    m_.assign(n, 0.0);
    if (n == 2) return;
    std::vector<double> c(n, 0.0), r(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
      double a = h0 / 6, b = (h0 + h1) / 3, cc = h1 / 6;
      double rhs = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
      double den = b - a * c[i - 1];
      c[i] = cc / den;
      r[i] = (rhs - a * r[i - 1]) / den;
    }
    for (std::size_t i = n - 2; i >= 1; --i) m_[i] = r[i] - c[i] * m_[i + 1];
  }

  double x_front() const { return x_.front(); }
  double x_back() const { return x_.back(); }

  double eval(double x, int k = 0) const {
    std::size_t i = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin();
    i = std::clamp<std::size_t>(i, 1, x_.size() - 1) - 1;
    double h = x_[i + 1] - x_[i];
    double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
    if (k == 0)
      return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6;
    if (k == 1)
      return (y_[i + 1] - y_[i]) / h + ((1 - 3 * a * a) * m_[i] + (3 * b * b - 1) * m_[i + 1]) * h / 6;
    return a * m_[i] + b * m_[i + 1];
  }

  const std::vector<double>& nodes() const { return x_; }
  const std::vector<double>& values() const { return y_; }

 private:
  std::vector<double> x_, y_, m_;
};

}  // namespace dkg

#endif
