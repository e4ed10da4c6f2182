#ifndef ECSKIT_LATTICE_HPP
#define ECSKIT_LATTICE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecskit/d1family.hpp"
#include "ecskit/metric.hpp"
#include "ecskit/riccati.hpp"

namespace ecs::lattice {

/// j-th Cartesian power of the diagonal Riccati blocks:
///   B(t) = diag(alpha, beta, gamma)^{(+)j},  A = diag(a, b, c)^{(+)j},
/// acting on V = R^{3j}; they satisfy B' + B^2 = f + A.
struct BlockProfile {
  riccati::Septuple septuple;
  int j = 1;

  int dim() const { return 3 * j; }
  Eigen::MatrixXd constant_matrix() const;       // A
  Eigen::VectorXd diagonal(double t) const;      // diag of B(t)
  double equation_residual(int samples = 256) const;
};

BlockProfile build_blocks(const riccati::Septuple& s, int j);

/// Translation operator on the solution space of u' = B(t) u, represented in
/// the initial-value basis: T = F(-p) for the fundamental solution F.  With
/// this orientation its eigenvalues are the exponentials exp(-int_0^p diag).
struct TranslationOperator {
  Eigen::MatrixXd matrix;
  std::vector<double> charpoly;  // det(xI - T), descending powers, monic
  double integrator_crosscheck = 0.0;
};

TranslationOperator translation_operator(const BlockProfile& bp);

/// Faddeev-LeVerrier characteristic polynomial, monic, descending powers.
std::vector<double> characteristic_polynomial(const Eigen::MatrixXd& m);

/// Integrality gate: every characteristic-polynomial coefficient within tol
/// of an integer and the constant term within tol of +-1.
struct GateResult {
  bool pass = false;
  std::vector<double> coefficients;
  std::vector<long long> nearest_integer;
  double max_deviation = 0.0;
  double determinant = 0.0;
  bool unit_constant_term = false;
};

GateResult charpoly_gate(const TranslationOperator& t, double tol);

/// Element of the isometry group Z x R x E acting on the d=1 model space;
/// u in E (solutions of u'' = f u + A u) is stored by its initial data.
struct GroupElement {
  int k = 0;
  double q = 0.0;
  Eigen::VectorXd u0, udot0;
};

struct UState {
  Eigen::VectorXd u, udot;
};

/// u(t), u'(t) for the element's solution curve (adaptive integration from 0).
UState evaluate_u(const GroupElement& g, const d1::D1Data& data, double t);

/// (k,q,u) . (t,s,v) = (t + kp, s + q - <u'(t), 2v + u(t)>, v + u(t)).
ChartPoint group_act(const GroupElement& g, const ChartPoint& x,
                     const d1::D1Data& data);

/// Same with the <u'(t), .> term dropped; negative control for the isometry
/// test, not an isometry.
ChartPoint group_act_corrupted(const GroupElement& g, const ChartPoint& x,
                               const d1::D1Data& data);

GroupElement group_compose(const GroupElement& g1, const GroupElement& g2,
                           const d1::D1Data& data);
GroupElement group_inverse(const GroupElement& g, const d1::D1Data& data);

/// max over the grid of |pullback(g)* metric - metric| with the pullback
/// Jacobian taken by central differences of the action.
double isometry_residual(const GroupElement& g, const d1::D1Data& data,
                         const ToleranceProfile& prof,
                         ExecMode mode = ExecMode::Parallel,
                         bool corrupted = false);

/// Verdict record of the full construction pipeline.
struct CompactnessCertificate {
  int schema_version = 1;
  int k = 0, l = 0, j = 1;
  double p = 1.0;
  int dimension = 5;
  Signature metric_signature;
  riccati::SpectralTriple roots;
  std::string septuple_digest;
  riccati::SeptupleResiduals septuple_residuals;
  double spec_vs_target = 0.0;
  double spec_vs_floquet = 0.0;
  double integrator_crosscheck = 0.0;
  GateResult gate;
  d1::SuiteReport d1_suite;
  std::string dichotomy;
  std::vector<double> isometry_residuals;
  double group_law_residual = 0.0;
  bool pass = false;
  std::vector<std::string> failures;
};

struct CertifyOptions {
  int suite_points_per_coord = 0;  // 0: 5 for n <= 6, else 3
  int isometry_points_per_coord = 3;
  int isometry_samples = 2;
  std::uint64_t seed = 1;
  // Pinned pipeline tolerances.
  double tol_riccati = 1e-8;
  double tol_spec = 1e-8;
  double tol_charpoly = 1e-6;
  double tol_det = 1e-8;
  double tol_isometry = 1e-6;
  double tol_scalar = 1e-8;
  double tol_second = 1e-6;
};

using StageLogger = std::function<void(const std::string& stage,
                                       double residual, double tol, bool ok)>;

CompactnessCertificate certify_compact(int k, int l, int j, double p,
                                       const CertifyOptions& opt = {},
                                       const StageLogger& log = {});

nlohmann::ordered_json to_json(const CompactnessCertificate& cert);

/// FNV-1a hex digest of the canonical septuple serialization.
std::string septuple_digest(const riccati::Septuple& s);

nlohmann::ordered_json septuple_to_json(const riccati::Septuple& s);

/// D1 construction data carried by a certified pipeline: f from the
/// septuple, A = diag(a,b,c)^{(+)j}, identity gram on R^{3j}.
d1::D1Data pipeline_d1_data(const riccati::Septuple& s, int j);

}  // namespace ecs::lattice

#endif
