#ifndef ECSKIT_D2FAMILY_HPP
#define ECSKIT_D2FAMILY_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecskit/metric.hpp"
#include "ecskit/poly2.hpp"

namespace ecs::d2 {

/// Torsion-free affine connection on a plane chart, with polynomial
/// coefficient functions Gamma^k_ij (symmetric in i, j).
struct SurfaceConnection {
  std::array<std::array<std::array<Poly2, 2>, 2>, 2> gamma;  // [k][i][j]
  double chart_half_width = 1.0;

  static SurfaceConnection flat() { return SurfaceConnection{}; }
};

/// Area form zeta_12 = exp(q(x)) with polynomial q; always nonvanishing.
struct AreaForm {
  Poly2 log_z;
  double z(double x, double y) const { return std::exp(log_z(x, y)); }
};

/// Symmetric twice-contravariant phi: components phi^11, phi^12, phi^22.
struct Phi {
  std::array<Poly2, 3> comp;
  double at(int j, int k, double x, double y) const {
    return comp[std::size_t(j + k)](x, y);  // (0,0)->0, (0,1)/(1,0)->1, (1,1)->2
  }
};

/// Construction data for the d = 2 family on T*Q x V.
struct D2Data {
  SurfaceConnection conn;
  AreaForm zeta;
  int n = 4;
  int epsilon = 1;
  Eigen::MatrixXd gram;  // (n-4) x (n-4); empty when n = 4
  std::optional<Phi> phi;
};

/// Ricci tensor of the affine connection at x (not assumed symmetric):
///   rho_{lj} = d_i G^i_{jl} - d_j G^i_{il} + G^i_{im} G^m_{jl} - G^i_{jm} G^m_{il}.
Eigen::Matrix2d ricci_of_connection(const SurfaceConnection& conn,
                                    const Eigen::Vector2d& x);

/// Symbolic Ricci components as polynomials.
std::array<std::array<Poly2, 2>, 2> ricci_poly(const SurfaceConnection& conn);

/// Liouville-type projective-flatness obstruction for surfaces:
///   Y_{abd} = nabla_a P_{bd} - nabla_b P_{ad},
///   P_{bd} = rho_{(bd)} - (1/3) rho_{[bd]},
/// maximized over the chart grid.  Zero iff the connection is projectively
/// flat (Cotton criterion in two dimensions).
double projective_flatness_residual(const SurfaceConnection& conn,
                                    const std::vector<Eigen::Vector2d>& grid);

/// max over the grid of |d_i zeta_12 - Gamma^k_{ki} zeta_12|.
double area_parallel_residual(const SurfaceConnection& conn,
                              const AreaForm& zeta,
                              const std::vector<Eigen::Vector2d>& grid);

/// max over the grid of |div div phi + <rho, phi> - epsilon| with covariant
/// divergences of the connection.
double phi_residual(const D2Data& data,
                    const std::vector<Eigen::Vector2d>& grid);

/// tau_{jk} = zeta_{jl} zeta_{km} phi^{lm} at x (exact contraction).
Eigen::Matrix2d tau_from_phi(const AreaForm& zeta, const Phi& phi,
                             const Eigen::Vector2d& x);

/// max over the x-grid of |nabla^D rho^D| (connection-level local symmetry).
double connection_ricci_parallel_residual(
    const SurfaceConnection& conn, const std::vector<Eigen::Vector2d>& grid);

/// Patterson-Walker metric on T*Q in coordinates (x1, x2, p1, p2):
///   h = 2 dp_i dx^i - 2 p_k Gamma^k_{ij} dx^i dx^j,  neutral signature.
MetricField riemann_extension(const SurfaceConnection& conn);

std::vector<std::string> validate(const D2Data& data);

/// Metric h - 2 tau + delta - theta rho on T*Q x V in coordinates
/// (x1, x2, p1, p2, v^1..v^{n-4}); exact first and second derivative
/// evaluators are attached.
MetricField build_d2_metric(const D2Data& data);

/// Uniform grid on the chart square.
std::vector<Eigen::Vector2d> chart_grid(double half_width, int per_axis);

/// Verification grid in the full (x, p, v) coordinates: x within the chart
/// interior, p and v in [-1, 1].
ToleranceProfile default_profile(const D2Data& data, int points_per_coord = 5);

/// Flat-connection fixture: Gamma = 0, zeta = dx^1 ^ dx^2,
/// phi^11 = epsilon (x^1)^2 / 2 solving the phi-equation exactly.
D2Data flat_fixture(int n = 4, int epsilon = 1);

struct SearchResult {
  D2Data data;
  double projective_residual = 0.0;
  double area_residual = 0.0;
  double phi_fit_residual = 0.0;
  double nonflatness = 0.0;  // max |nabla^D rho^D| over the chart grid
  std::uint64_t seed_used = 0;
  int lm_iterations = 0;
};

struct SearchOptions {
  std::uint64_t seed = 1;
  int max_seed_attempts = 8;
  double residual_target = 1e-9;
  double nonflatness_floor = 1e-2;
  int phi_degree = 12;
  double chart_half_width = 0.55;
};

/// Nonflat validated example: Levenberg-Marquardt over degree-1 polynomial
/// Christoffel coefficients driving the projective-flatness and
/// trace-curl residuals to zero, area form integrated from the trace,
/// phi fitted by polynomial least-squares collocation.  Deterministic for a
/// fixed seed; retries with consecutive seeds if the solution degenerates.
SearchResult find_nonflat_example(const SearchOptions& opt = {});

nlohmann::ordered_json to_json(const D2Data& data);
D2Data from_json(const nlohmann::ordered_json& j);

}  // namespace ecs::d2

#endif
