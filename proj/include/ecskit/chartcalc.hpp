#ifndef ECSKIT_CHARTCALC_HPP
#define ECSKIT_CHARTCALC_HPP

#include <Eigen/Dense>

#include "ecskit/metric.hpp"
#include "ecskit/tensor.hpp"

namespace ecs::chartcalc {

// Conventions, stated once and exercised by the flat/fixture tests:
//
//   Gamma^k_ij = (1/2) g^{km} (d_i g_{mj} + d_j g_{mi} - d_m g_{ij})
//   R^k_{lij}  = d_i Gamma^k_{jl} - d_j Gamma^k_{il}
//                + Gamma^k_{im} Gamma^m_{jl} - Gamma^k_{jm} Gamma^m_{il}
//   R_{klij}   = g_{km} R^m_{lij}       (antisymmetrized exactly in (k,l))
//   ricci_{lj} = R^i_{lij},   scalar = g^{lj} ricci_{lj}
//   W_{klij}   = R_{klij}
//                - (g_{ki} r_{lj} - g_{kj} r_{li} + g_{lj} r_{ki} - g_{li} r_{kj}) / (n-2)
//                + s (g_{ki} g_{lj} - g_{kj} g_{li}) / ((n-1)(n-2))
//   (nabla_m T)_{...} = d_m T_{...} - sum over slots of Gamma^a_{m .} T_{... a ...}
//
// d_m of curvature tensors is taken by differencing the tensor assembled at
// neighbor points (fourth order when profile.richardson is set).

/// All curvature objects of a metric at one chart point.
struct CurvaturePack {
  ChartPoint point;
  Eigen::MatrixXd g;
  Eigen::MatrixXd g_inv;
  double metric_condition = 0.0;
  Tensor3 gamma;       // (k, i, j)
  Tensor4 riem_down;   // (k, l, i, j)
  Eigen::MatrixXd ricci;
  double scalar = 0.0;
  Tensor4 weyl_down;
  Tensor5 nabla_weyl;  // (m, k, l, i, j)
  Tensor5 nabla_riem;
  Tensor3 nabla_ricci; // (m, i, j)
};

/// Curvature data without the nabla objects (cheap, used on FD stencils).
struct CoreCurvature {
  Eigen::MatrixXd g;
  Eigen::MatrixXd g_inv;
  Tensor3 gamma;
  Tensor4 riem_down;
  Eigen::MatrixXd ricci;
  double scalar = 0.0;
  Tensor4 weyl_down;
};

/// Evaluate the metric with finiteness/symmetry checks (no condition check).
Eigen::MatrixXd metric_at(const MetricField& field, const ChartPoint& x);

/// First partials of the metric: exact evaluators when present, else central
/// differences of `eval` with the profile's step (Richardson optional).
std::vector<Eigen::MatrixXd> metric_first_derivs(const MetricField& field,
                                                 const ChartPoint& x,
                                                 const ToleranceProfile& prof);

/// Levi-Civita connection coefficients.  Checks metric nondegeneracy at x and
/// the finite-difference metric-compatibility residual against tol_first.
Tensor3 christoffel(const MetricField& field, const ChartPoint& x,
                    const ToleranceProfile& prof);

CoreCurvature curvature_core(const MetricField& field, const ChartPoint& x,
                             const ToleranceProfile& prof,
                             bool check_condition = false);

CurvaturePack curvature_pack(const MetricField& field, const ChartPoint& x,
                             const ToleranceProfile& prof);

/// max_x max_{ijk} | nabla_i ricci_{jk} - nabla_j ricci_{ik} |  (Codazzi).
double check_harmonic_curvature(const MetricField& field,
                                const ToleranceProfile& prof,
                                ExecMode mode = ExecMode::Parallel);

/// max over the grid of the curvature-operator action on R (derivation
/// action on (0,4)-tensors); zero characterizes semisymmetric metrics.
double check_semisymmetry(const MetricField& field,
                          const ToleranceProfile& prof,
                          ExecMode mode = ExecMode::Parallel);

/// Numerical rank of the Ricci tensor with singular-value threshold tol.
int ricci_rank(const CurvaturePack& pack, double tol);

/// For each direction m: second singular value of the 2 x n(n+1)/2 stack
/// [sym-vec ricci ; sym-vec nabla_m ricci]; maximized over m and the grid.
double ricci_recurrence_residual(const MetricField& field,
                                 const ToleranceProfile& prof,
                                 ExecMode mode = ExecMode::Parallel);

/// max over the grid of |nabla R|.
double local_symmetry_residual(const MetricField& field,
                               const ToleranceProfile& prof,
                               ExecMode mode = ExecMode::Parallel);

// ---- per-point residuals (building blocks for the sweeps above) ----

double harmonic_residual_at(const CurvaturePack& pack);
double semisymmetry_residual_at(const CoreCurvature& core);
double ricci_recurrence_residual_at(const CurvaturePack& pack);

/// First Bianchi cyclic-sum residual of riem_down.
double first_bianchi_residual(const Tensor4& riem);

/// Largest single g-trace of a (0,4) Weyl candidate.
double weyl_trace_residual(const Tensor4& weyl, const Eigen::MatrixXd& g_inv);

/// Residual of pair symmetry R_{klij} = R_{ijkl}.
double pair_symmetry_residual(const Tensor4& riem);

/// T^a_{bcd} = g^{ak} T_{kbcd}.
Tensor4 raise_first(const Tensor4& t, const Eigen::MatrixXd& g_inv);

/// Fused per-point verification record: everything the family suites check,
/// computed from a single CurvaturePack.
struct PointReport {
  double scalar_abs = 0.0;
  double weyl_max_abs = 0.0;
  double nabla_weyl = 0.0;
  double nabla_riem = 0.0;
  double harmonic = 0.0;
  double semisym = 0.0;
  double ricci_recurrence = 0.0;
  int ricci_rank = 0;
  double metric_condition = 0.0;
};

PointReport point_report(const MetricField& field, const ChartPoint& x,
                         const ToleranceProfile& prof);

}  // namespace ecs::chartcalc

#endif
