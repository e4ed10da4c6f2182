#ifndef ECSKIT_METRIC_HPP
#define ECSKIT_METRIC_HPP

#include <Eigen/Dense>
#include <exception>
#include <functional>
#include <utility>
#include <vector>

#include "ecskit/errors.hpp"

namespace ecs {

using ChartPoint = Eigen::VectorXd;

/// Inertia of a nondegenerate symmetric matrix: (# positive, # negative).
struct Signature {
  int plus = 0;
  int minus = 0;
  bool operator==(const Signature&) const = default;
};

/// An evaluable pseudo-Riemannian metric on a single coordinate chart.
///
/// `eval` is mandatory.  `deriv1`/`deriv2` are optional exact partial
/// derivatives of the component matrix; when present the curvature engine
/// uses them instead of differencing the metric, which is what makes the
/// tight residual tolerances of the verification suites reachable.
struct MetricField {
  int dim = 0;
  Signature signature;
  int derivative_order = 6;  // guaranteed smoothness class for differencing

  std::function<Eigen::MatrixXd(const ChartPoint&)> eval;
  // deriv1(x)[m] = d_m g;  deriv2(x)[m][l] = d_m d_l g (upper triangle m <= l).
  std::function<std::vector<Eigen::MatrixXd>(const ChartPoint&)> deriv1;
  std::function<std::vector<std::vector<Eigen::MatrixXd>>(const ChartPoint&)> deriv2;

  bool has_exact_first() const { return bool(deriv1); }
  bool has_exact_second() const { return bool(deriv2); }
};

/// Numerical profile for a verification run: differencing steps, residual
/// tolerances, and the sample grid the residuals are maximized over.
struct ToleranceProfile {
  double fd_step = 1e-4;
  bool richardson = true;   // fourth-order differencing for nabla objects
  double tol_first = 1e-8;
  double tol_second = 1e-6;
  double degenerate_cond = 1e12;
  std::vector<ChartPoint> grid;
};

enum class ExecMode { Serial, Parallel };

inline Signature matrix_signature(const Eigen::MatrixXd& g, double tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
  Signature s;
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    if (es.eigenvalues()[i] > tol * scale) ++s.plus;
    else if (es.eigenvalues()[i] < -tol * scale) ++s.minus;
  }
  return s;
}

/// Tensor-product grid: `points_per_coord` samples per coordinate, spanning
/// `base + [-half_width, half_width]` in every direction.
inline std::vector<ChartPoint> tensor_grid(const ChartPoint& base,
                                           double half_width,
                                           int points_per_coord) {
  const int n = int(base.size());
  std::vector<ChartPoint> grid;
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= std::size_t(points_per_coord);
  grid.reserve(total);
  std::vector<int> idx(n, 0);
  while (true) {
    ChartPoint p = base;
    for (int i = 0; i < n; ++i) {
      const double frac = (points_per_coord == 1)
                              ? 0.0
                              : -1.0 + 2.0 * idx[i] / double(points_per_coord - 1);
      p[i] += half_width * frac;
    }
    grid.push_back(std::move(p));
    int i = 0;
    for (; i < n; ++i) {
      if (++idx[i] < points_per_coord) break;
      idx[i] = 0;
    }
    if (i == n) break;
  }
  return grid;
}

/// Map-reduce over a grid.  `fn` must be a pure function of its point;
/// `merge` must be commutative and associative (max, logical and, ...) so
/// that the parallel result is bit-identical to the serial reference.
template <class R, class Fn, class Merge>
R sweep_reduce(const std::vector<ChartPoint>& grid, R init, Fn&& fn,
               Merge&& merge, ExecMode mode) {
  R acc = init;
#ifdef ECSKIT_HAVE_OPENMP
  if (mode == ExecMode::Parallel) {
    std::exception_ptr eptr = nullptr;
#pragma omp parallel
    {
      R local = init;
#pragma omp for schedule(dynamic, 4) nowait
      for (long i = 0; i < long(grid.size()); ++i) {
        if (eptr) continue;
        try {
          local = merge(local, fn(grid[std::size_t(i)]));
        } catch (...) {
#pragma omp critical(ecskit_sweep_err)
          if (!eptr) eptr = std::current_exception();
        }
      }
#pragma omp critical(ecskit_sweep_merge)
      acc = merge(acc, local);
    }
    if (eptr) std::rethrow_exception(eptr);
    return acc;
  }
#else
  (void)mode;
#endif
  for (const auto& x : grid) acc = merge(acc, fn(x));
  return acc;
}

inline double max_over_grid(const std::vector<ChartPoint>& grid,
                            const std::function<double(const ChartPoint&)>& fn,
                            ExecMode mode = ExecMode::Parallel) {
  return sweep_reduce(
      grid, 0.0, fn, [](double a, double b) { return std::max(a, b); }, mode);
}

}  // namespace ecs

#endif
