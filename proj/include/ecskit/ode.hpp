#ifndef ECSKIT_ODE_HPP
#define ECSKIT_ODE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "ecskit/errors.hpp"

namespace ecs {

/// Adaptive Dormand-Prince 5(4) integrator for y' = f(t, y).
/// Tolerances are applied per component: |err_i| <= atol + rtol * |y_i|.
struct OdeOptions {
  double atol = 1e-12;
  double rtol = 1e-12;
  double initial_step = 1e-3;
  double min_step = 1e-14;
  std::size_t max_steps = 2'000'000;
};

inline Eigen::VectorXd integrate_dopri5(
    const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& f,
    double t0, double t1, Eigen::VectorXd y, const OdeOptions& opt = {}) {
  if (t0 == t1) return y;
  const double dir = (t1 > t0) ? 1.0 : -1.0;
  double t = t0;
  double h = dir * std::min(std::abs(opt.initial_step), std::abs(t1 - t0));

  // Dormand-Prince coefficients.
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                      a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                      a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  Eigen::VectorXd k1 = f(t, y);
  for (std::size_t step = 0; step < opt.max_steps; ++step) {
    if (dir * (t - t1) >= 0.0) return y;
    if (dir * (t + h - t1) > 0.0) h = t1 - t;

    Eigen::VectorXd k2 = f(t + c2 * h, y + h * (a21 * k1));
    Eigen::VectorXd k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    Eigen::VectorXd k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    Eigen::VectorXd k5 =
        f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    Eigen::VectorXd k6 = f(
        t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Eigen::VectorXd y5 =
        y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Eigen::VectorXd k7 = f(t + h, y5);
    Eigen::VectorXd err =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double ratio = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
      ratio = std::max(ratio, std::abs(err[i]) / sc);
    }
    if (ratio <= 1.0) {
      t += h;
      y.swap(y5);
      k1.swap(k7);  // FSAL
    }
    const double fac =
        std::clamp(0.9 * std::pow(std::max(ratio, 1e-10), -0.2), 0.2, 5.0);
    h *= fac;
    if (std::abs(h) < opt.min_step)
      throw solver_failure("integrate_dopri5: step size underflow");
  }
  throw solver_failure("integrate_dopri5: max step count exceeded");
}

}  // namespace ecs

#endif
