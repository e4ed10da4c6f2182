#ifndef ECSKIT_OLSZAK_HPP
#define ECSKIT_OLSZAK_HPP

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "ecskit/chartcalc.hpp"
#include "ecskit/metric.hpp"

namespace ecs::olszak {

/// Fiber of the parallel null distribution singled out by the Weyl tensor:
/// the vectors u with  g(u,.) ^ W(v,v',.,.) = 0  for all v, v'.
struct DistributionFiber {
  Eigen::MatrixXd basis;  // n x dim, orthonormal columns
  int dim = 0;
  ChartPoint point;
  double nullity_residual = 0.0;  // max |g(u_i, u_j)| over basis pairs
};

/// Rank-one factorization W = +- omega (x) omega of the Weyl operator on
/// 2-forms; exists exactly in the two-dimensional case.
struct RankOneWeylWitness {
  Eigen::MatrixXd omega;  // antisymmetric n x n
  int sign = 0;
  double residual = 0.0;       // max |W -+ omega(x)omega| componentwise
  int omega_rank = 0;          // rank of omega as a g-endomorphism
  double image_angle = 0.0;    // principal angle between image(omega) and the fiber
};

/// Kernel of the linear map u -> stack over basis pairs (v,v') of the
/// 3-form g(u,.) ^ W(v,v',.,.), via a singular-value threshold.
/// `rel_tol` is relative to the largest singular value; the reported
/// dimension requires a 10^3 spectral gap between kept and dropped values,
/// otherwise an ambiguous_dimension_error carries both candidates.
DistributionFiber olszak_fiber(const chartcalc::CurvaturePack& pack,
                               const Eigen::MatrixXd& g, double rel_tol);

std::optional<RankOneWeylWitness> rank_one_weyl_witness(
    const chartcalc::CurvaturePack& pack, const Eigen::MatrixXd& g,
    double rel_tol);

struct ParallelReport {
  double nullity_residual = 0.0;
  double transport_angle = 0.0;  // radians, max over consecutive grid pairs
  bool skipped_full_dim = false; // fiber = whole tangent space (flat case)
};

/// (a) max |g(u,u')| over the fiber bases; (b) numerically parallel-transport
/// each fiber basis to the next grid point and measure the subspace angle to
/// the fiber computed there.
ParallelReport nullity_parallel_check(const MetricField& field,
                                      const std::vector<DistributionFiber>& fibers,
                                      const ToleranceProfile& prof);

/// Largest principal angle between the column spaces of two full-column-rank
/// matrices (radians).
double subspace_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace ecs::olszak

#endif
