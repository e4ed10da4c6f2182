#ifndef ECSKIT_D1FAMILY_HPP
#define ECSKIT_D1FAMILY_HPP

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ecskit/chartcalc.hpp"
#include "ecskit/metric.hpp"
#include "ecskit/trig_poly.hpp"

#include <json.hpp>

namespace ecs::d1 {

/// A scalar profile function t -> f(t) together with its first two
/// derivatives.  Trig-series data keeps everything exact; a free-form
/// variant covers ad-hoc fixtures.
struct ProfileFunction {
  std::function<double(double)> f, df, ddf;
  std::optional<TrigPoly> series;  // set when f is a trig series

  static ProfileFunction from_series(const TrigPoly& s) {
    ProfileFunction p;
    TrigPoly d = s.derivative(), dd = d.derivative();
    p.f = [s](double t) { return s(t); };
    p.df = [d](double t) { return d(t); };
    p.ddf = [dd](double t) { return dd(t); };
    p.series = s;
    return p;
  }
  static ProfileFunction constant(double c) {
    ProfileFunction p;
    p.f = [c](double) { return c; };
    p.df = [](double) { return 0.0; };
    p.ddf = [](double) { return 0.0; };
    p.series = TrigPoly(1.0, c);
    return p;
  }
  static ProfileFunction sine() {
    ProfileFunction p;
    p.f = [](double t) { return std::sin(t); };
    p.df = [](double t) { return std::cos(t); };
    p.ddf = [](double t) { return -std::sin(t); };
    p.series = TrigPoly(2.0 * M_PI, 0.0, {0.0}, {1.0});
    return p;
  }
};

/// Construction data for the plane-wave-like metric family
///   g = kappa dt^2 + dt ds + <,>_V,   kappa(t,s,v) = f(t)<v,v> + <Av,v>
/// on I x R x V with dim V = n - 2.
struct D1Data {
  int n = 4;
  ProfileFunction f;
  std::optional<double> period;
  std::optional<std::pair<double, double>> interval;  // empty: whole line
  Eigen::MatrixXd gram;  // symmetric invertible (n-2) x (n-2)
  Eigen::MatrixXd A;     // traceless, gram-self-adjoint, nonzero
};

/// Empty list iff the data satisfies every invariant; violations are
/// returned, not thrown.
std::vector<std::string> validate(const D1Data& data);

/// Assemble the metric field (with exact first/second derivative
/// evaluators).  Throws invalid_input_error when validate() is nonempty.
MetricField build_metric(const D1Data& data);

enum class SymmetryVerdict { Symmetric, EssentiallyConformallySymmetric };

/// Theorem-level dichotomy: locally symmetric iff f is constant.  Both sides
/// (the nabla-R residual and the sampled variance of f) are computed and an
/// internal_consistency_error is thrown when they disagree.
SymmetryVerdict local_symmetry_dichotomy(const D1Data& data,
                                         const ToleranceProfile& prof);

/// Default verification profile: 5 points per coordinate in a [-1,1] box
/// around `base` (origin by default, t-centered within the interval).
ToleranceProfile default_profile(const D1Data& data, int points_per_coord = 5,
                                 double half_width = 1.0);

/// Aggregated residuals of the full curvature suite over a grid.
struct SuiteReport {
  double scalar_abs = 0.0;
  double nabla_weyl = 0.0;
  double harmonic = 0.0;
  double semisym = 0.0;
  double ricci_recurrence = 0.0;
  int max_ricci_rank = 0;
  double weyl_min_over_grid = 0.0;  // min over grid of max |W| at the point
  int olszak_dim_min = 0;
  int olszak_dim_max = 0;
  double olszak_nullity = 0.0;
  bool witness_everywhere_absent = true;  // rank-one Weyl witness (d=2 signal)
};

SuiteReport run_suite(const D1Data& data, const ToleranceProfile& prof,
                      ExecMode mode = ExecMode::Parallel);

/// Deterministic random valid data: n in {4,5,6}, random gram signature,
/// random traceless gram-self-adjoint A, f a three-harmonic trig polynomial.
D1Data random_data(std::mt19937_64& rng, int n);

nlohmann::ordered_json to_json(const D1Data& data);
D1Data from_json(const nlohmann::ordered_json& j);

}  // namespace ecs::d1

#endif
