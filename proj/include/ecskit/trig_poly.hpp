#ifndef ECSKIT_TRIG_POLY_HPP
#define ECSKIT_TRIG_POLY_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "ecskit/errors.hpp"

namespace ecs {

/// Truncated real trigonometric series of a fixed period p:
///
///   f(t) = a0 + sum_k  ac[k-1] cos(k w t) + as[k-1] sin(k w t),   w = 2 pi / p.
///
/// Differentiation and the mean over one period are exact coefficient
/// operations, which is what the Riccati layer leans on.
class TrigPoly {
 public:
  TrigPoly() : period_(1.0), a0_(0.0) {}
  explicit TrigPoly(double period, double a0 = 0.0)
      : period_(period), a0_(a0) {
    if (!(period > 0.0)) throw invalid_input_error("TrigPoly: period must be positive");
  }
  TrigPoly(double period, double a0, std::vector<double> ac, std::vector<double> as)
      : period_(period), a0_(a0), ac_(std::move(ac)), as_(std::move(as)) {
    if (!(period > 0.0)) throw invalid_input_error("TrigPoly: period must be positive");
    ac_.resize(std::max(ac_.size(), as_.size()), 0.0);
    as_.resize(ac_.size(), 0.0);
  }

  double period() const { return period_; }
  std::size_t harmonics() const { return ac_.size(); }
  double mean() const { return a0_; }
  const std::vector<double>& cos_coeffs() const { return ac_; }
  const std::vector<double>& sin_coeffs() const { return as_; }

  double operator()(double t) const {
    const double w = 2.0 * M_PI / period_;
    double c1 = std::cos(w * t), s1 = std::sin(w * t);
    double ck = 1.0, sk = 0.0;  // cos/sin of k w t, recurrence
    double r = a0_;
    for (std::size_t k = 0; k < ac_.size(); ++k) {
      const double cn = ck * c1 - sk * s1;
      const double sn = sk * c1 + ck * s1;
      ck = cn; sk = sn;
      r += ac_[k] * ck + as_[k] * sk;
    }
    return r;
  }

  /// Exact derivative: (a0, ac_k, as_k) -> (0, k w as_k, -k w ac_k).
  TrigPoly derivative() const {
    const double w = 2.0 * M_PI / period_;
    TrigPoly d(period_, 0.0);
    d.ac_.resize(ac_.size());
    d.as_.resize(as_.size());
    for (std::size_t k = 0; k < ac_.size(); ++k) {
      const double kw = double(k + 1) * w;
      d.ac_[k] = kw * as_[k];
      d.as_[k] = -kw * ac_[k];
    }
    return d;
  }

  /// Integral over one full period (exact: only the mean survives).
  double integral_over_period() const { return a0_ * period_; }

  /// Time shift: g(t) = f(t + t0), same series degree.
  TrigPoly shifted(double t0) const {
    const double w = 2.0 * M_PI / period_;
    TrigPoly g(period_, a0_);
    g.ac_.resize(ac_.size());
    g.as_.resize(as_.size());
    for (std::size_t k = 0; k < ac_.size(); ++k) {
      const double c = std::cos(double(k + 1) * w * t0);
      const double s = std::sin(double(k + 1) * w * t0);
      g.ac_[k] = ac_[k] * c + as_[k] * s;
      g.as_[k] = -ac_[k] * s + as_[k] * c;
    }
    return g;
  }

  TrigPoly operator+(const TrigPoly& o) const {
    TrigPoly r(period_, a0_ + o.a0_);
    const std::size_t K = std::max(ac_.size(), o.ac_.size());
    r.ac_.assign(K, 0.0);
    r.as_.assign(K, 0.0);
    for (std::size_t k = 0; k < ac_.size(); ++k) { r.ac_[k] += ac_[k]; r.as_[k] += as_[k]; }
    for (std::size_t k = 0; k < o.ac_.size(); ++k) { r.ac_[k] += o.ac_[k]; r.as_[k] += o.as_[k]; }
    return r;
  }
  TrigPoly operator-(const TrigPoly& o) const { return *this + (o * -1.0); }
  TrigPoly operator*(double c) const {
    TrigPoly r = *this;
    r.a0_ *= c;
    for (auto& v : r.ac_) v *= c;
    for (auto& v : r.as_) v *= c;
    return r;
  }
  TrigPoly operator+(double c) const { TrigPoly r = *this; r.a0_ += c; return r; }
  TrigPoly operator-(double c) const { return *this + (-c); }

  /// Exact product: harmonics add, via the product-to-sum identities.
  TrigPoly operator*(const TrigPoly& o) const;

  /// Drop trailing coefficients below `tol * max|coeff|`.
  TrigPoly truncated(double tol = 1e-14) const {
    double m = std::abs(a0_);
    for (std::size_t k = 0; k < ac_.size(); ++k)
      m = std::max({m, std::abs(ac_[k]), std::abs(as_[k])});
    const double cut = tol * std::max(m, 1e-300);
    std::size_t K = ac_.size();
    while (K > 0 && std::abs(ac_[K - 1]) < cut && std::abs(as_[K - 1]) < cut) --K;
    TrigPoly r(period_, a0_);
    r.ac_.assign(ac_.begin(), ac_.begin() + K);
    r.as_.assign(as_.begin(), as_.begin() + K);
    return r;
  }

  double max_abs_on_grid(int samples = 512) const {
    double m = 0.0;
    for (int i = 0; i < samples; ++i)
      m = std::max(m, std::abs((*this)(period_ * i / samples)));
    return m;
  }

  /// Least-squares projection of grid samples onto a K-harmonic series.
  /// `samples[i]` is the value at t = i * period / N (uniform, N = size).
  /// A plain DFT: exact when the sampled function is itself a series with
  /// fewer than N/2 harmonics.
  static TrigPoly project(const std::vector<double>& samples, double period,
                          std::size_t K);

  static TrigPoly constant(double period, double value) { return TrigPoly(period, value); }

 private:
  double period_;
  double a0_;
  std::vector<double> ac_;
  std::vector<double> as_;
};

inline TrigPoly TrigPoly::operator*(const TrigPoly& o) const {
  const std::size_t Ka = ac_.size(), Kb = o.ac_.size();
  TrigPoly r(period_, 0.0);
  r.ac_.assign(Ka + Kb, 0.0);
  r.as_.assign(Ka + Kb, 0.0);
  auto addc = [&](std::size_t k, double v) {
    if (k == 0) r.a0_ += v; else r.ac_[k - 1] += v;
  };
  auto adds = [&](std::size_t k, double v) {
    if (k > 0) r.as_[k - 1] += v;
  };
  r.a0_ += a0_ * o.a0_;
  for (std::size_t k = 1; k <= Kb; ++k) {
    r.ac_[k - 1] += a0_ * o.ac_[k - 1];
    r.as_[k - 1] += a0_ * o.as_[k - 1];
  }
  for (std::size_t k = 1; k <= Ka; ++k) {
    r.ac_[k - 1] += o.a0_ * ac_[k - 1];
    r.as_[k - 1] += o.a0_ * as_[k - 1];
  }
  for (std::size_t i = 1; i <= Ka; ++i) {
    for (std::size_t j = 1; j <= Kb; ++j) {
      const double A = ac_[i - 1], B = as_[i - 1];
      const double C = o.ac_[j - 1], D = o.as_[j - 1];
      const std::size_t s = i + j;
      const std::size_t d = (i > j) ? i - j : j - i;
      // cos i cos j = (cos(i-j)+cos(i+j))/2, etc.
      addc(d, 0.5 * A * C); addc(s, 0.5 * A * C);
      addc(d, 0.5 * B * D); addc(s, -0.5 * B * D);
      // sin i cos j = (sin(i+j)+sin(i-j))/2 with sin(-x) = -sin x
      adds(s, 0.5 * B * C);
      if (i >= j) adds(d, 0.5 * B * C); else adds(d, -0.5 * B * C);
      adds(s, 0.5 * A * D);
      if (j >= i) adds(d, 0.5 * A * D); else adds(d, -0.5 * A * D);
    }
  }
  return r;
}

inline TrigPoly TrigPoly::project(const std::vector<double>& samples,
                                  double period, std::size_t K) {
  const std::size_t N = samples.size();
  if (N < 2 * K + 1)
    throw invalid_input_error("TrigPoly::project: need more than 2K samples");
  TrigPoly r(period, 0.0);
  r.ac_.assign(K, 0.0);
  r.as_.assign(K, 0.0);
  double mean = 0.0;
  for (double v : samples) mean += v;
  r.a0_ = mean / double(N);
  for (std::size_t k = 1; k <= K; ++k) {
    double c = 0.0, s = 0.0;
    const double w = 2.0 * M_PI * double(k) / double(N);
    for (std::size_t i = 0; i < N; ++i) {
      c += samples[i] * std::cos(w * double(i));
      s += samples[i] * std::sin(w * double(i));
    }
    r.ac_[k - 1] = 2.0 * c / double(N);
    r.as_[k - 1] = 2.0 * s / double(N);
  }
  return r;
}

}  // namespace ecs

#endif
