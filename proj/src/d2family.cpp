#include "ecskit/d2family.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

namespace ecs::d2 {

namespace {

using Mat2Poly = std::array<std::array<Poly2, 2>, 2>;

Poly2 trace_gamma(const SurfaceConnection& conn, int i) {
  return conn.gamma[0][0][i] + conn.gamma[1][1][i];
}

// nabla_a T_{bd} for a (0,2) tensor with polynomial components.
Poly2 nabla_02(const SurfaceConnection& conn, const Mat2Poly& t, int a, int b,
               int d) {
  Poly2 out = t[b][d].partial(a);
  for (int m = 0; m < 2; ++m) {
    out = out - conn.gamma[m][a][b] * t[m][d];
    out = out - conn.gamma[m][a][d] * t[b][m];
  }
  return out;
}

// Projective Schouten tensor P_{bd} = rho_{(bd)} - (1/3) rho_{[bd]}.
Mat2Poly schouten_poly(const SurfaceConnection& conn) {
  auto rho = ricci_poly(conn);
  Mat2Poly P;
  for (int b = 0; b < 2; ++b)
    for (int d = 0; d < 2; ++d) {
      Poly2 sym = (rho[b][d] + rho[d][b]) * 0.5;
      Poly2 asym = (rho[b][d] - rho[d][b]) * 0.5;
      P[b][d] = sym - asym * (1.0 / 3.0);
    }
  return P;
}

// The two independent Cotton components Y_{01d}, d = 0, 1.
std::array<Poly2, 2> cotton_poly(const SurfaceConnection& conn) {
  Mat2Poly P = schouten_poly(conn);
  std::array<Poly2, 2> Y;
  for (int d = 0; d < 2; ++d)
    Y[d] = nabla_02(conn, P, 0, 1, d) - nabla_02(conn, P, 1, 0, d);
  return Y;
}

}  // namespace

std::array<std::array<Poly2, 2>, 2> ricci_poly(const SurfaceConnection& conn) {
  Mat2Poly rho;
  for (int l = 0; l < 2; ++l)
    for (int j = 0; j < 2; ++j) {
      Poly2 e;
      for (int i = 0; i < 2; ++i) {
        e = e + conn.gamma[i][j][l].partial(i) - conn.gamma[i][i][l].partial(j);
        for (int m = 0; m < 2; ++m)
          e = e + conn.gamma[i][i][m] * conn.gamma[m][j][l] -
              conn.gamma[i][j][m] * conn.gamma[m][i][l];
      }
      rho[l][j] = e;
    }
  return rho;
}

Eigen::Matrix2d ricci_of_connection(const SurfaceConnection& conn,
                                    const Eigen::Vector2d& x) {
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (!std::isfinite(conn.gamma[k][i][j](x[0], x[1])))
          throw evaluation_domain_error(
              "ricci_of_connection: non-finite Gamma evaluation");
  auto rho = ricci_poly(conn);
  Eigen::Matrix2d r;
  for (int l = 0; l < 2; ++l)
    for (int j = 0; j < 2; ++j) r(l, j) = rho[l][j](x[0], x[1]);
  return r;
}

double projective_flatness_residual(const SurfaceConnection& conn,
                                    const std::vector<Eigen::Vector2d>& grid) {
  auto Y = cotton_poly(conn);
  double r = 0.0;
  for (const auto& x : grid)
    for (int d = 0; d < 2; ++d)
      r = std::max(r, std::abs(Y[d](x[0], x[1])));
  return r;
}

double area_parallel_residual(const SurfaceConnection& conn,
                              const AreaForm& zeta,
                              const std::vector<Eigen::Vector2d>& grid) {
  const Poly2 q1 = zeta.log_z.partial(0), q2 = zeta.log_z.partial(1);
  double r = 0.0;
  for (const auto& x : grid) {
    const double z = zeta.z(x[0], x[1]);
    const double d1 = q1(x[0], x[1]) * z;
    const double d2 = q2(x[0], x[1]) * z;
    r = std::max(r, std::abs(d1 - trace_gamma(conn, 0)(x[0], x[1]) * z));
    r = std::max(r, std::abs(d2 - trace_gamma(conn, 1)(x[0], x[1]) * z));
  }
  return r;
}

double connection_ricci_parallel_residual(
    const SurfaceConnection& conn, const std::vector<Eigen::Vector2d>& grid) {
  auto rho = ricci_poly(conn);
  double r = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int d = 0; d < 2; ++d) {
        Poly2 nr = nabla_02(conn, rho, a, b, d);
        for (const auto& x : grid)
          r = std::max(r, std::abs(nr(x[0], x[1])));
      }
  return r;
}

namespace {

// L(phi) = nabla_k nabla_j phi^{jk} + rho_{jk} phi^{jk} as a polynomial.
Poly2 phi_operator_poly(const SurfaceConnection& conn, const Phi& phi) {
  auto rho = ricci_poly(conn);
  auto phi_at = [&](int j, int k) -> const Poly2& {
    return phi.comp[std::size_t(j + k)];
  };
  // (div phi)^k = d_j phi^{jk} + G^j_{jm} phi^{mk} + G^k_{jm} phi^{jm}
  std::array<Poly2, 2> div1;
  for (int k = 0; k < 2; ++k) {
    Poly2 e;
    for (int j = 0; j < 2; ++j) {
      e = e + phi_at(j, k).partial(j);
      for (int m = 0; m < 2; ++m)
        e = e + conn.gamma[j][j][m] * phi_at(m, k) +
            conn.gamma[k][j][m] * phi_at(j, m);
    }
    div1[k] = e;
  }
  // nabla_k V^k = d_k V^k + G^k_{km} V^m
  Poly2 out;
  for (int k = 0; k < 2; ++k) {
    out = out + div1[k].partial(k);
    for (int m = 0; m < 2; ++m) out = out + conn.gamma[k][k][m] * div1[m];
  }
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) out = out + rho[j][k] * phi_at(j, k);
  return out;
}

}  // namespace

double phi_residual(const D2Data& data,
                    const std::vector<Eigen::Vector2d>& grid) {
  if (!data.phi) throw invalid_input_error("phi_residual: phi is missing");
  Poly2 L = phi_operator_poly(data.conn, *data.phi);
  double r = 0.0;
  for (const auto& x : grid)
    r = std::max(r, std::abs(L(x[0], x[1]) - double(data.epsilon)));
  return r;
}

Eigen::Matrix2d tau_from_phi(const AreaForm& zeta, const Phi& phi,
                             const Eigen::Vector2d& x) {
  const double z = zeta.z(x[0], x[1]);
  Eigen::Matrix2d zmat;
  zmat << 0.0, z, -z, 0.0;  // zeta_{jl}
  Eigen::Matrix2d ph;
  ph << phi.at(0, 0, x[0], x[1]), phi.at(0, 1, x[0], x[1]),
      phi.at(1, 0, x[0], x[1]), phi.at(1, 1, x[0], x[1]);
  return zmat * ph * zmat.transpose();
}

std::vector<Eigen::Vector2d> chart_grid(double half_width, int per_axis) {
  std::vector<Eigen::Vector2d> g;
  g.reserve(std::size_t(per_axis) * per_axis);
  for (int i = 0; i < per_axis; ++i)
    for (int j = 0; j < per_axis; ++j) {
      const double u = (per_axis == 1) ? 0.0 : -1.0 + 2.0 * i / (per_axis - 1);
      const double v = (per_axis == 1) ? 0.0 : -1.0 + 2.0 * j / (per_axis - 1);
      g.push_back({half_width * u, half_width * v});
    }
  return g;
}

namespace {

// Everything the metric evaluators need, precomputed symbolically.
struct Assembly {
  int n = 4;
  Eigen::MatrixXd gram;
  // Jets over the chart for Gamma^k_{ij}, rho_{ij}, tau_{ij}.
  std::array<std::array<std::array<Fun2Jet, 2>, 2>, 2> gamma;
  std::array<std::array<Fun2Jet, 2>, 2> rho;
  std::array<std::array<Fun2Jet, 2>, 2> tau;
  bool with_tau = true;
  bool with_rho_term = true;  // theta rho term (needs n > 4)
};

std::shared_ptr<const Assembly> make_assembly(const D2Data& data,
                                              bool include_tau) {
  auto a = std::make_shared<Assembly>();
  a->n = data.n;
  a->gram = data.gram;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        a->gamma[k][i][j] = Fun2Jet(ExpPoly2(data.conn.gamma[k][i][j]));
  auto rho = ricci_poly(data.conn);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) a->rho[i][j] = Fun2Jet(ExpPoly2(rho[i][j]));
  a->with_tau = include_tau;
  if (include_tau) {
    if (!data.phi)
      throw invalid_input_error("build_d2_metric: phi is required");
    // tau = z^2 [[phi^22, -phi^12], [-phi^12, phi^11]] with z = exp(q).
    ExpPoly2 z2 = ExpPoly2::exp_of(data.zeta.log_z * 2.0);
    const Poly2& p11 = data.phi->comp[0];
    const Poly2& p12 = data.phi->comp[1];
    const Poly2& p22 = data.phi->comp[2];
    a->tau[0][0] = Fun2Jet(z2 * ExpPoly2(p22));
    a->tau[0][1] = Fun2Jet(z2 * ExpPoly2(p12) * -1.0);
    a->tau[1][0] = a->tau[0][1];
    a->tau[1][1] = Fun2Jet(z2 * ExpPoly2(p11));
  }
  a->with_rho_term = data.n > 4;
  return a;
}

MetricField metric_from_assembly(std::shared_ptr<const Assembly> a) {
  const int n = a->n;
  const int mv = n - 4;
  MetricField field;
  field.dim = n;

  field.eval = [a, n, mv](const ChartPoint& z) {
    const double x = z[0], y = z[1];
    const double p1 = z[2], p2 = z[3];
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    double theta = 0.0;
    Eigen::VectorXd v;
    if (mv > 0) {
      v = z.segment(4, mv);
      theta = v.dot(a->gram * v);
    }
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double e = -2.0 * (p1 * a->gamma[0][i][j].v(x, y) +
                           p2 * a->gamma[1][i][j].v(x, y));
        if (a->with_tau) e -= 2.0 * a->tau[i][j].v(x, y);
        if (a->with_rho_term) e -= theta * a->rho[i][j].v(x, y);
        g(i, j) = e;
      }
    g(0, 2) = g(2, 0) = 1.0;
    g(1, 3) = g(3, 1) = 1.0;
    if (mv > 0) g.block(4, 4, mv, mv) = a->gram;
    return g;
  };

  field.deriv1 = [a, n, mv](const ChartPoint& z) {
    const double x = z[0], y = z[1];
    const double p[2] = {z[2], z[3]};
    std::vector<Eigen::MatrixXd> dg(n, Eigen::MatrixXd::Zero(n, n));
    double theta = 0.0;
    Eigen::VectorXd v, gv;
    if (mv > 0) {
      v = z.segment(4, mv);
      theta = v.dot(a->gram * v);
      gv = a->gram * v;
    }
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        for (int l = 0; l < 2; ++l) {
          double e = -2.0 * (p[0] * a->gamma[0][i][j].d(l, x, y) +
                             p[1] * a->gamma[1][i][j].d(l, x, y));
          if (a->with_tau) e -= 2.0 * a->tau[i][j].d(l, x, y);
          if (a->with_rho_term) e -= theta * a->rho[i][j].d(l, x, y);
          dg[l](i, j) = e;
        }
        for (int k = 0; k < 2; ++k)
          dg[2 + k](i, j) = -2.0 * a->gamma[k][i][j].v(x, y);
        if (a->with_rho_term)
          for (int q = 0; q < mv; ++q)
            dg[4 + q](i, j) = -2.0 * gv[q] * a->rho[i][j].v(x, y);
      }
    return dg;
  };

  field.deriv2 = [a, n, mv](const ChartPoint& z) {
    const double x = z[0], y = z[1];
    const double p[2] = {z[2], z[3]};
    std::vector<std::vector<Eigen::MatrixXd>> dd(
        n, std::vector<Eigen::MatrixXd>(n));
    for (int s = 0; s < n; ++s)
      for (int t = s; t < n; ++t) dd[s][t] = Eigen::MatrixXd::Zero(n, n);
    double theta = 0.0;
    Eigen::VectorXd v, gv;
    if (mv > 0) {
      v = z.segment(4, mv);
      theta = v.dot(a->gram * v);
      gv = a->gram * v;
    }
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        for (int l = 0; l < 2; ++l)
          for (int m = l; m < 2; ++m) {
            double e = -2.0 * (p[0] * a->gamma[0][i][j].dd(l, m, x, y) +
                               p[1] * a->gamma[1][i][j].dd(l, m, x, y));
            if (a->with_tau) e -= 2.0 * a->tau[i][j].dd(l, m, x, y);
            if (a->with_rho_term) e -= theta * a->rho[i][j].dd(l, m, x, y);
            dd[l][m](i, j) = e;
          }
        for (int l = 0; l < 2; ++l)
          for (int k = 0; k < 2; ++k)
            dd[l][2 + k](i, j) = -2.0 * a->gamma[k][i][j].d(l, x, y);
        if (a->with_rho_term) {
          for (int l = 0; l < 2; ++l)
            for (int q = 0; q < mv; ++q)
              dd[l][4 + q](i, j) = -2.0 * gv[q] * a->rho[i][j].d(l, x, y);
          for (int q = 0; q < mv; ++q)
            for (int r = q; r < mv; ++r)
              dd[4 + q][4 + r](i, j) =
                  -2.0 * a->gram(q, r) * a->rho[i][j].v(x, y);
        }
      }
    return dd;
  };
  return field;
}

}  // namespace

MetricField riemann_extension(const SurfaceConnection& conn) {
  D2Data d;
  d.conn = conn;
  d.n = 4;
  auto a = make_assembly(d, /*include_tau=*/false);
  MetricField field = metric_from_assembly(a);
  field.signature = Signature{2, 2};
  return field;
}

std::vector<std::string> validate(const D2Data& data) {
  std::vector<std::string> out;
  const int mv = data.n - 4;
  if (data.n < 4) out.push_back("n must be at least 4");
  if (mv > 0) {
    if (data.gram.rows() != mv || data.gram.cols() != mv)
      out.push_back("gram must be (n-4) x (n-4)");
    else {
      if ((data.gram - data.gram.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        out.push_back("gram is not symmetric");
      if (!Eigen::FullPivLU<Eigen::MatrixXd>(data.gram).isInvertible())
        out.push_back("gram is not invertible");
    }
  }
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (std::abs(data.conn.gamma[k][i][j](0.1, -0.2) -
                     data.conn.gamma[k][j][i](0.1, -0.2)) > 1e-14)
          out.push_back("connection has torsion (Gamma not symmetric)");

  auto grid = chart_grid(data.conn.chart_half_width * 0.9, 7);
  const double tol = 1e-6;
  if (projective_flatness_residual(data.conn, grid) > tol)
    out.push_back("connection is not projectively flat");
  if (area_parallel_residual(data.conn, data.zeta, grid) > tol)
    out.push_back("area form is not parallel");
  auto rho = ricci_poly(data.conn);
  {
    double asym = 0.0;
    for (const auto& x : grid)
      asym = std::max(asym, std::abs(rho[0][1](x[0], x[1]) -
                                     rho[1][0](x[0], x[1])));
    if (asym > tol)
      out.push_back("connection Ricci tensor is not symmetric (unsupported)");
  }
  if (!data.phi)
    out.push_back("phi is missing");
  else if (phi_residual(data, grid) > tol)
    out.push_back("phi does not satisfy its divergence equation");
  return out;
}

MetricField build_d2_metric(const D2Data& data) {
  auto violations = validate(data);
  if (!violations.empty()) {
    std::ostringstream os;
    os << "invalid D2Data:";
    for (const auto& v : violations) os << " [" << v << "]";
    throw invalid_input_error(os.str());
  }
  auto a = make_assembly(data, /*include_tau=*/true);
  MetricField field = metric_from_assembly(a);
  Signature sig{2, 2};
  if (data.n > 4) {
    const Signature gs = matrix_signature(data.gram);
    sig.plus += gs.plus;
    sig.minus += gs.minus;
  }
  field.signature = sig;
  return field;
}

ToleranceProfile default_profile(const D2Data& data, int points_per_coord) {
  ToleranceProfile prof;
  const int n = data.n;
  ChartPoint base = ChartPoint::Zero(n);
  base[2] = 0.3;  // keep p away from the h-flat locus p = 0
  base[3] = -0.2;
  std::vector<double> widths(std::size_t(n), 1.0);
  widths[0] = widths[1] = 0.6 * data.conn.chart_half_width;
  std::vector<ChartPoint> grid;
  std::vector<int> idx(std::size_t(n), 0);
  while (true) {
    ChartPoint p = base;
    for (int i = 0; i < n; ++i) {
      const double frac =
          (points_per_coord == 1)
              ? 0.0
              : -1.0 + 2.0 * idx[std::size_t(i)] / double(points_per_coord - 1);
      p[i] += widths[std::size_t(i)] * frac;
    }
    grid.push_back(std::move(p));
    int i = 0;
    for (; i < n; ++i) {
      if (++idx[std::size_t(i)] < points_per_coord) break;
      idx[std::size_t(i)] = 0;
    }
    if (i == n) break;
  }
  prof.grid = std::move(grid);
  return prof;
}

D2Data flat_fixture(int n, int epsilon) {
  D2Data d;
  d.conn = SurfaceConnection::flat();
  d.conn.chart_half_width = 1.0;
  d.zeta.log_z = Poly2();  // zeta_12 = 1
  d.n = n;
  d.epsilon = epsilon;
  if (n > 4) d.gram = Eigen::MatrixXd::Identity(n - 4, n - 4);
  Phi phi;
  phi.comp[0] = Poly2::monomial(2, 0, 0.5 * double(epsilon));
  d.phi = phi;
  return d;
}

namespace {

// ---- nonflat example search ----

constexpr int kGammaCoeffs = 18;  // 6 independent Gamma entries x (1, x, y)

SurfaceConnection connection_from(const Eigen::VectorXd& c, double half_width) {
  SurfaceConnection conn;
  conn.chart_half_width = half_width;
  int idx = 0;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = i; j < 2; ++j) {
        Poly2 g(2, 2);
        g.at(0, 0) = c[idx];
        g.at(1, 0) = c[idx + 1];
        g.at(0, 1) = c[idx + 2];
        idx += 3;
        conn.gamma[k][i][j] = g;
        conn.gamma[k][j][i] = g;
      }
  return conn;
}

Eigen::VectorXd search_residuals(const Eigen::VectorXd& c, double half_width,
                                 const std::vector<Eigen::Vector2d>& grid) {
  SurfaceConnection conn = connection_from(c, half_width);
  auto Y = cotton_poly(conn);
  // Trace curl: d_1 (tr Gamma)_2 - d_2 (tr Gamma)_1; degree-0 polynomial for
  // degree-1 Gamma, but keep the general expression.
  Poly2 curl = trace_gamma(conn, 1).partial(0) - trace_gamma(conn, 0).partial(1);
  Eigen::VectorXd r(3 * Eigen::Index(grid.size()));
  Eigen::Index row = 0;
  for (const auto& x : grid) {
    r[row++] = Y[0](x[0], x[1]);
    r[row++] = Y[1](x[0], x[1]);
    r[row++] = curl(x[0], x[1]);
  }
  return r;
}

// Dense monomial basis of total degree <= d.
std::vector<std::pair<int, int>> monomials_up_to(int d) {
  std::vector<std::pair<int, int>> m;
  for (int i = 0; i <= d; ++i)
    for (int j = 0; j <= d - i; ++j) m.push_back({i, j});
  return m;
}

struct PhiFit {
  Phi phi;
  double residual = 0.0;
};

PhiFit fit_phi(const SurfaceConnection& conn, int epsilon, int degree,
               double half_width) {
  const auto monos = monomials_up_to(degree);
  const int per_comp = int(monos.size());
  const int cols = 3 * per_comp;
  auto colloc = chart_grid(half_width, 2 * degree + 5);

  // Column scaling h^{-(i+j)} keeps the collocation matrix workable.
  Eigen::MatrixXd A(Eigen::Index(colloc.size()), cols);
  for (int comp = 0; comp < 3; ++comp)
    for (int mi = 0; mi < per_comp; ++mi) {
      Phi basis;
      const auto [di, dj] = monos[std::size_t(mi)];
      basis.comp[std::size_t(comp)] = Poly2::monomial(
          di, dj, std::pow(half_width, -double(di + dj)));
      D2Data tmp;
      tmp.conn = conn;
      tmp.phi = basis;
      Poly2 L = phi_operator_poly(conn, basis);
      const int col = comp * per_comp + mi;
      for (std::size_t rI = 0; rI < colloc.size(); ++rI)
        A(Eigen::Index(rI), col) = L(colloc[rI][0], colloc[rI][1]);
    }
  Eigen::VectorXd rhs =
      Eigen::VectorXd::Constant(Eigen::Index(colloc.size()), double(epsilon));
  Eigen::VectorXd sol = A.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV)
                            .solve(rhs);

  PhiFit fit;
  for (int comp = 0; comp < 3; ++comp) {
    Poly2 p;
    for (int mi = 0; mi < per_comp; ++mi) {
      const auto [di, dj] = monos[std::size_t(mi)];
      p = p + Poly2::monomial(di, dj,
                              sol[comp * per_comp + mi] *
                                  std::pow(half_width, -double(di + dj)));
    }
    fit.phi.comp[std::size_t(comp)] = p;
  }
  // Validate on a finer grid than the collocation one.
  SurfaceConnection c2 = conn;
  D2Data probe;
  probe.conn = c2;
  probe.epsilon = epsilon;
  probe.phi = fit.phi;
  fit.residual = phi_residual(probe, chart_grid(half_width, 4 * degree + 1));
  return fit;
}

}  // namespace

SearchResult find_nonflat_example(const SearchOptions& opt) {
  const double hw = opt.chart_half_width;
  const auto grid = chart_grid(hw, 5);

  for (std::uint64_t attempt = 0; attempt < std::uint64_t(opt.max_seed_attempts);
       ++attempt) {
    const std::uint64_t seed = opt.seed + attempt;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-0.6, 0.6);
    Eigen::VectorXd c(kGammaCoeffs);
    for (int i = 0; i < kGammaCoeffs; ++i) c[i] = unit(rng);

    // Levenberg-Marquardt to the feasible set (projectively flat, curl-free
    // trace).  The feasible set is reached exactly; no anchors are needed.
    double lambda = 1e-3;
    Eigen::VectorXd r = search_residuals(c, hw, grid);
    int iters = 0;
    for (; iters < 200 && r.norm() > 1e-13; ++iters) {
      Eigen::MatrixXd J(r.size(), kGammaCoeffs);
      for (int p = 0; p < kGammaCoeffs; ++p) {
        Eigen::VectorXd cp = c;
        const double h = 1e-7;
        cp[p] += h;
        J.col(p) = (search_residuals(cp, hw, grid) - r) / h;
      }
      const Eigen::MatrixXd JtJ = J.transpose() * J;
      const Eigen::VectorXd Jtr = J.transpose() * r;
      bool accepted = false;
      for (int trial = 0; trial < 16; ++trial) {
        Eigen::MatrixXd M = JtJ;
        M.diagonal().array() += lambda;
        Eigen::VectorXd step = M.ldlt().solve(Jtr);
        Eigen::VectorXd cand = c - step;
        Eigen::VectorXd rc = search_residuals(cand, hw, grid);
        if (rc.norm() < r.norm()) {
          c = cand;
          r = rc;
          lambda = std::max(lambda * 0.3, 1e-12);
          accepted = true;
          break;
        }
        lambda *= 4.0;
      }
      if (!accepted) break;
    }
    if (r.cwiseAbs().maxCoeff() > opt.residual_target) continue;

    SurfaceConnection conn = connection_from(c, hw);

    // The parallel area form is determined by the (now curl-free) trace:
    // log zeta = int tr Gamma, integrated termwise.
    AreaForm zeta;
    {
      const Poly2 t1 = trace_gamma(conn, 0);
      const Poly2 t2 = trace_gamma(conn, 1);
      // q(x, y) = int_0^x t1(s, 0) ds + int_0^y t2(x, s) ds
      Poly2 q = [&] {
        Poly2 t1_y0(t1.deg_x() + 1, 1);
        for (int i = 0; i <= t1.deg_x(); ++i) t1_y0.at(i, 0) = t1.at(i, 0);
        return t1_y0.antiderivative(0) + t2.antiderivative(1);
      }();
      zeta.log_z = q;
    }

    // Degeneracy guards: the example must be properly nonflat.
    const double nonflat = connection_ricci_parallel_residual(conn, grid);
    if (nonflat < opt.nonflatness_floor) continue;
    auto rho = ricci_poly(conn);
    double rho_mag = 0.0, rho_asym = 0.0;
    for (const auto& x : grid) {
      rho_mag = std::max(rho_mag, std::abs(rho[0][0](x[0], x[1])));
      rho_asym = std::max(rho_asym, std::abs(rho[0][1](x[0], x[1]) -
                                             rho[1][0](x[0], x[1])));
    }
    if (rho_asym > 1e-9) continue;

    PhiFit fit = fit_phi(conn, /*epsilon=*/1, opt.phi_degree, hw);
    if (fit.residual > opt.residual_target) {
      fit = fit_phi(conn, 1, opt.phi_degree + 2, hw);
      if (fit.residual > opt.residual_target) continue;
    }

    SearchResult res;
    res.data.conn = conn;
    res.data.zeta = zeta;
    res.data.n = 4;
    res.data.epsilon = 1;
    res.data.phi = fit.phi;
    res.projective_residual = projective_flatness_residual(conn, grid);
    res.area_residual = area_parallel_residual(conn, zeta, grid);
    res.phi_fit_residual = fit.residual;
    res.nonflatness = nonflat;
    res.seed_used = seed;
    res.lm_iterations = iters;
    return res;
  }
  throw solver_failure(
      "find_nonflat_example: no admissible connection found in the seed "
      "budget");
}

nlohmann::ordered_json to_json(const D2Data& data) {
  nlohmann::ordered_json j;
  j["n"] = data.n;
  j["epsilon"] = data.epsilon;
  auto poly = [](const Poly2& p) {
    nlohmann::ordered_json terms = nlohmann::ordered_json::array();
    for (const auto& t : p.terms())
      terms.push_back({int(t[0]), int(t[1]), t[2]});
    return terms;
  };
  nlohmann::ordered_json gam = nlohmann::ordered_json::array();
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int jj = i; jj < 2; ++jj)
        gam.push_back({{"k", k}, {"i", i}, {"j", jj},
                       {"poly", poly(data.conn.gamma[k][i][jj])}});
  j["gamma"] = gam;
  j["chart_half_width"] = data.conn.chart_half_width;
  j["log_zeta"] = poly(data.zeta.log_z);
  if (data.phi) {
    j["phi"] = {{"c11", poly(data.phi->comp[0])},
                {"c12", poly(data.phi->comp[1])},
                {"c22", poly(data.phi->comp[2])}};
  }
  if (data.n > 4) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < data.gram.rows(); ++i) {
      std::vector<double> row;
      for (Eigen::Index k = 0; k < data.gram.cols(); ++k)
        row.push_back(data.gram(i, k));
      rows.push_back(row);
    }
    j["gram"] = rows;
  }
  return j;
}

D2Data from_json(const nlohmann::ordered_json& j) {
  D2Data d;
  d.n = j.at("n").get<int>();
  d.epsilon = j.at("epsilon").get<int>();
  auto poly = [](const nlohmann::ordered_json& terms) {
    std::vector<std::array<double, 3>> t;
    for (const auto& e : terms)
      t.push_back({e.at(0).get<double>(), e.at(1).get<double>(),
                   e.at(2).get<double>()});
    return Poly2::from_terms(t);
  };
  for (const auto& e : j.at("gamma")) {
    const int k = e.at("k").get<int>(), i = e.at("i").get<int>(),
              jj = e.at("j").get<int>();
    d.conn.gamma[k][i][jj] = poly(e.at("poly"));
    d.conn.gamma[k][jj][i] = d.conn.gamma[k][i][jj];
  }
  if (j.contains("chart_half_width"))
    d.conn.chart_half_width = j.at("chart_half_width").get<double>();
  d.zeta.log_z = poly(j.at("log_zeta"));
  if (j.contains("phi")) {
    Phi phi;
    phi.comp[0] = poly(j.at("phi").at("c11"));
    phi.comp[1] = poly(j.at("phi").at("c12"));
    phi.comp[2] = poly(j.at("phi").at("c22"));
    d.phi = phi;
  }
  if (j.contains("gram")) {
    const auto rows = j.at("gram").get<std::vector<std::vector<double>>>();
    const int m = int(rows.size());
    d.gram = Eigen::MatrixXd(m, m);
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < m; ++k) d.gram(i, k) = rows[std::size_t(i)][std::size_t(k)];
  }
  return d;
}

}  // namespace ecs::d2
