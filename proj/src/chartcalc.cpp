#include "ecskit/chartcalc.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ecs::chartcalc {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

double condition_number(const Eigen::MatrixXd& g) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

Eigen::MatrixXd invert_checked(const Eigen::MatrixXd& g, const ChartPoint& x,
                               const ToleranceProfile& prof, bool check_cond,
                               double* cond_out) {
  if (check_cond) {
    const double cond = condition_number(g);
    if (cond_out) *cond_out = cond;
    if (!(cond < prof.degenerate_cond)) {
      std::ostringstream os;
      os << "degenerate metric: condition number " << cond << " at point [";
      for (Eigen::Index i = 0; i < x.size(); ++i)
        os << (i ? ", " : "") << x[i];
      os << "]";
      throw degenerate_metric_error(os.str());
    }
  }
  return g.partialPivLu().inverse();
}

// Central difference of an arbitrary matrix-valued function of the chart
// point, with optional fourth-order (Richardson) stencil.
template <class F>
auto central_diff(const F& f, const ChartPoint& x, int m, double h,
                  bool richardson) -> decltype(f(x)) {
  ChartPoint xp = x, xm = x;
  xp[m] += h;
  xm[m] -= h;
  if (!richardson) {
    auto d = f(xp);
    d -= f(xm);
    d *= 1.0 / (2.0 * h);
    return d;
  }
  ChartPoint xp2 = x, xm2 = x;
  xp2[m] += 2.0 * h;
  xm2[m] -= 2.0 * h;
  auto d = f(xp);
  d -= f(xm);
  d *= 8.0;
  d -= f(xp2);
  d += f(xm2);
  d *= 1.0 / (12.0 * h);
  return d;
}

Tensor3 christoffel_from(const Eigen::MatrixXd& g_inv,
                         const std::vector<Eigen::MatrixXd>& dg) {
  const int n = int(g_inv.rows());
  Tensor3 gamma(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int m = 0; m < n; ++m)
          s += g_inv(k, m) * (dg[i](m, j) + dg[j](m, i) - dg[m](i, j));
        gamma(k, i, j) = 0.5 * s;
        gamma(k, j, i) = 0.5 * s;
      }
  return gamma;
}

// d_i Gamma^k_{jl}: index layout (i, k, j, l).
Tensor4 dgamma_exact(const Eigen::MatrixXd& g_inv,
                     const std::vector<Eigen::MatrixXd>& dg,
                     const std::vector<std::vector<Eigen::MatrixXd>>& ddg) {
  const int n = int(g_inv.rows());
  // d_i g^{km} = - g^{ka} (d_i g_{ab}) g^{bm}
  std::vector<Eigen::MatrixXd> dginv(n);
  for (int i = 0; i < n; ++i) dginv[i] = -g_inv * dg[i] * g_inv;
  auto dd = [&](int a, int b) -> const Eigen::MatrixXd& {
    return (a <= b) ? ddg[a][b] : ddg[b][a];
  };
  Tensor4 out(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int l = j; l < n; ++l) {
          double s = 0.0;
          for (int m = 0; m < n; ++m) {
            s += dginv[i](k, m) * (dg[j](m, l) + dg[l](m, j) - dg[m](j, l));
            s += g_inv(k, m) *
                 (dd(i, j)(m, l) + dd(i, l)(m, j) - dd(i, m)(j, l));
          }
          out(i, k, j, l) = 0.5 * s;
          out(i, k, l, j) = 0.5 * s;
        }
  return out;
}

struct GammaOnly {
  Eigen::MatrixXd g, g_inv;
  Tensor3 gamma;
};

GammaOnly gamma_at(const MetricField& field, const ChartPoint& x,
                   const ToleranceProfile& prof, bool check_cond,
                   double* cond_out) {
  GammaOnly r;
  r.g = metric_at(field, x);
  r.g_inv = invert_checked(r.g, x, prof, check_cond, cond_out);
  r.gamma = christoffel_from(r.g_inv, metric_first_derivs(field, x, prof));
  return r;
}

void subtract_connection_terms(const Tensor3& gamma, int m, const Tensor4& t,
                               Tensor4& out) {
  // out_{klij} -= Gamma^a_{ms} t with s running over the four slots.
  const int n = t.dim();
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int a = 0; a < n; ++a) {
            s += gamma(a, m, k) * t(a, l, i, j);
            s += gamma(a, m, l) * t(k, a, i, j);
            s += gamma(a, m, i) * t(k, l, a, j);
            s += gamma(a, m, j) * t(k, l, i, a);
          }
          out(k, l, i, j) -= s;
        }
}

}  // namespace

Eigen::MatrixXd metric_at(const MetricField& field, const ChartPoint& x) {
  if (int(x.size()) != field.dim)
    throw invalid_input_error("metric_at: point dimension mismatch");
  if (!x.allFinite())
    throw evaluation_domain_error("metric_at: non-finite chart point");
  Eigen::MatrixXd g = field.eval(x);
  if (!all_finite(g))
    throw evaluation_domain_error("metric_at: non-finite metric evaluation");
  const double scale = std::max(g.cwiseAbs().maxCoeff(), 1.0);
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw evaluation_domain_error("metric_at: evaluator output not symmetric");
  return 0.5 * (g + g.transpose());
}

std::vector<Eigen::MatrixXd> metric_first_derivs(const MetricField& field,
                                                 const ChartPoint& x,
                                                 const ToleranceProfile& prof) {
  const int n = field.dim;
  if (field.has_exact_first()) return field.deriv1(x);
  std::vector<Eigen::MatrixXd> dg(n);
  auto f = [&](const ChartPoint& p) { return metric_at(field, p); };
  for (int m = 0; m < n; ++m)
    dg[m] = central_diff(f, x, m, prof.fd_step, prof.richardson);
  return dg;
}

Tensor3 christoffel(const MetricField& field, const ChartPoint& x,
                    const ToleranceProfile& prof) {
  Eigen::MatrixXd g = metric_at(field, x);
  double cond = 0.0;
  Eigen::MatrixXd g_inv = invert_checked(g, x, prof, true, &cond);
  auto dg = metric_first_derivs(field, x, prof);
  Tensor3 gamma = christoffel_from(g_inv, dg);

  // Metric compatibility: nabla_k g_ij should vanish identically given the
  // same dg that built gamma; a violation means an assembly bug.
  const int n = field.dim;
  double resid = 0.0;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = dg[k](i, j);
        for (int m = 0; m < n; ++m)
          v -= gamma(m, k, i) * g(m, j) + gamma(m, k, j) * g(i, m);
        resid = std::max(resid, std::abs(v));
      }
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if (resid > prof.tol_first * scale)
    throw internal_consistency_error(
        "christoffel: metric-compatibility residual " + std::to_string(resid));
  return gamma;
}

CoreCurvature curvature_core(const MetricField& field, const ChartPoint& x,
                             const ToleranceProfile& prof,
                             bool check_condition) {
  const int n = field.dim;
  CoreCurvature core;
  core.g = metric_at(field, x);
  core.g_inv = invert_checked(core.g, x, prof, check_condition, nullptr);
  auto dg = metric_first_derivs(field, x, prof);
  core.gamma = christoffel_from(core.g_inv, dg);

  Tensor4 dGamma(n);  // (i, k, j, l)
  if (field.has_exact_second()) {
    dGamma = dgamma_exact(core.g_inv, dg, field.deriv2(x));
  } else {
    auto gamma_fn = [&](const ChartPoint& p) {
      GammaOnly go = gamma_at(field, p, prof, false, nullptr);
      return go.gamma.data();
    };
    struct VecWrap {
      std::vector<double> v;
      VecWrap& operator-=(const VecWrap& o) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
        return *this;
      }
      VecWrap& operator+=(const VecWrap& o) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
        return *this;
      }
      VecWrap& operator*=(double s) {
        for (auto& e : v) e *= s;
        return *this;
      }
    };
    auto wrapped = [&](const ChartPoint& p) { return VecWrap{gamma_fn(p)}; };
    for (int i = 0; i < n; ++i) {
      VecWrap d = central_diff(wrapped, x, i, prof.fd_step, prof.richardson);
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l)
            dGamma(i, k, j, l) = d.v[(std::size_t(k) * n + j) * n + l];
    }
  }

  // R^k_{lij}
  Tensor4 riem_up(n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          double s = dGamma(i, k, j, l) - dGamma(j, k, i, l);
          for (int m = 0; m < n; ++m)
            s += core.gamma(k, i, m) * core.gamma(m, j, l) -
                 core.gamma(k, j, m) * core.gamma(m, i, l);
          riem_up(k, l, i, j) = s;
          riem_up(k, l, j, i) = -s;
        }

  core.ricci = Eigen::MatrixXd::Zero(n, n);
  for (int l = 0; l < n; ++l)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += riem_up(i, l, i, j);
      core.ricci(l, j) = s;
    }
  core.scalar = (core.g_inv * core.ricci).trace();

  // Lower and antisymmetrize exactly in (k, l).
  core.riem_down = Tensor4(n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          double s = 0.0;
          for (int m = 0; m < n; ++m) s += core.g(k, m) * riem_up(m, l, i, j);
          core.riem_down(k, l, i, j) = s;
          core.riem_down(k, l, j, i) = -s;
        }
  for (int k = 0; k < n; ++k)
    for (int l = k + 1; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double a =
              0.5 * (core.riem_down(k, l, i, j) - core.riem_down(l, k, i, j));
          core.riem_down(k, l, i, j) = a;
          core.riem_down(l, k, i, j) = -a;
        }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) core.riem_down(k, k, i, j) = 0.0;

  // Weyl part.
  core.weyl_down = Tensor4(n);
  const auto& g = core.g;
  const auto& r = core.ricci;
  const double s = core.scalar;
  const double c1 = 1.0 / double(n - 2);
  const double c2 = 1.0 / (double(n - 1) * double(n - 2));
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double w = core.riem_down(k, l, i, j);
          w -= c1 * (g(k, i) * r(l, j) - g(k, j) * r(l, i) +
                     g(l, j) * r(k, i) - g(l, i) * r(k, j));
          w += s * c2 * (g(k, i) * g(l, j) - g(k, j) * g(l, i));
          core.weyl_down(k, l, i, j) = w;
        }
  return core;
}

CurvaturePack curvature_pack(const MetricField& field, const ChartPoint& x,
                             const ToleranceProfile& prof) {
  const int n = field.dim;
  CurvaturePack pack;
  pack.point = x;

  {
    Eigen::MatrixXd g = metric_at(field, x);
    pack.metric_condition = condition_number(g);
    if (!(pack.metric_condition < prof.degenerate_cond))
      throw degenerate_metric_error("curvature_pack: degenerate metric, cond=" +
                                    std::to_string(pack.metric_condition));
    const Signature sig = matrix_signature(g);
    if (!(sig == field.signature))
      throw internal_consistency_error(
          "curvature_pack: metric signature differs from declared signature");
  }

  CoreCurvature core = curvature_core(field, x, prof, false);
  pack.g = core.g;
  pack.g_inv = core.g_inv;
  pack.gamma = core.gamma;
  pack.riem_down = core.riem_down;
  pack.ricci = core.ricci;
  pack.scalar = core.scalar;
  pack.weyl_down = core.weyl_down;

  // nabla objects: difference R, W, ricci assembled at neighbor points, then
  // subtract the connection terms at x.
  pack.nabla_riem = Tensor5(n);
  pack.nabla_weyl = Tensor5(n);
  pack.nabla_ricci = Tensor3(n);
  const double h = prof.fd_step;
  for (int m = 0; m < n; ++m) {
    auto core_at = [&](double offset) {
      ChartPoint p = x;
      p[m] += offset;
      return curvature_core(field, p, prof, false);
    };
    CoreCurvature cp = core_at(h), cm = core_at(-h);
    Tensor4 dR(n), dW(n);
    Eigen::MatrixXd dRic;
    if (prof.richardson) {
      CoreCurvature cp2 = core_at(2.0 * h), cm2 = core_at(-2.0 * h);
      for (std::size_t idx = 0; idx < dR.data().size(); ++idx) {
        dR.data()[idx] = (8.0 * (cp.riem_down.data()[idx] - cm.riem_down.data()[idx]) -
                          (cp2.riem_down.data()[idx] - cm2.riem_down.data()[idx])) /
                         (12.0 * h);
        dW.data()[idx] = (8.0 * (cp.weyl_down.data()[idx] - cm.weyl_down.data()[idx]) -
                          (cp2.weyl_down.data()[idx] - cm2.weyl_down.data()[idx])) /
                         (12.0 * h);
      }
      dRic = (8.0 * (cp.ricci - cm.ricci) - (cp2.ricci - cm2.ricci)) / (12.0 * h);
    } else {
      for (std::size_t idx = 0; idx < dR.data().size(); ++idx) {
        dR.data()[idx] =
            (cp.riem_down.data()[idx] - cm.riem_down.data()[idx]) / (2.0 * h);
        dW.data()[idx] =
            (cp.weyl_down.data()[idx] - cm.weyl_down.data()[idx]) / (2.0 * h);
      }
      dRic = (cp.ricci - cm.ricci) / (2.0 * h);
    }
    subtract_connection_terms(core.gamma, m, core.riem_down, dR);
    subtract_connection_terms(core.gamma, m, core.weyl_down, dW);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = dRic(i, j);
        for (int a = 0; a < n; ++a)
          v -= core.gamma(a, m, i) * core.ricci(a, j) +
               core.gamma(a, m, j) * core.ricci(i, a);
        pack.nabla_ricci(m, i, j) = v;
      }
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            pack.nabla_riem(m, k, l, i, j) = dR(k, l, i, j);
            pack.nabla_weyl(m, k, l, i, j) = dW(k, l, i, j);
          }
  }
  return pack;
}

double harmonic_residual_at(const CurvaturePack& pack) {
  const int n = int(pack.g.rows());
  double r = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = 0; k < n; ++k)
        r = std::max(r, std::abs(pack.nabla_ricci(i, j, k) -
                                 pack.nabla_ricci(j, i, k)));
  return r;
}

double semisymmetry_residual_at(const CoreCurvature& core) {
  const int n = int(core.g.rows());
  Tensor4 up = raise_first(core.riem_down, core.g_inv);  // R^m_{l a b}
  double r = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
              double s = 0.0;
              for (int m = 0; m < n; ++m) {
                s += up(m, k, a, b) * core.riem_down(m, l, i, j);
                s += up(m, l, a, b) * core.riem_down(k, m, i, j);
                s += up(m, i, a, b) * core.riem_down(k, l, m, j);
                s += up(m, j, a, b) * core.riem_down(k, l, i, m);
              }
              r = std::max(r, std::abs(s));
            }
  return r;
}

double ricci_recurrence_residual_at(const CurvaturePack& pack) {
  const int n = int(pack.g.rows());
  const int m = n * (n + 1) / 2;
  double r = 0.0;
  Eigen::MatrixXd stack(2, m);
  for (int dir = 0; dir < n; ++dir) {
    int col = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        stack(0, col) = pack.ricci(i, j);
        stack(1, col) = pack.nabla_ricci(dir, i, j);
        ++col;
      }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack);
    r = std::max(r, svd.singularValues()[1]);
  }
  return r;
}

double first_bianchi_residual(const Tensor4& riem) {
  const int n = riem.dim();
  double r = 0.0;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          r = std::max(r, std::abs(riem(k, l, i, j) + riem(k, i, j, l) +
                                   riem(k, j, l, i)));
  return r;
}

double weyl_trace_residual(const Tensor4& weyl, const Eigen::MatrixXd& g_inv) {
  const int n = weyl.dim();
  double r = 0.0;
  // Distinct traces: contract slot pairs (1,3), (1,4), (2,3), (2,4), (1,2), (3,4).
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double t13 = 0.0, t14 = 0.0, t23 = 0.0, t24 = 0.0, t12 = 0.0, t34 = 0.0;
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) {
          const double gpq = g_inv(p, q);
          t13 += gpq * weyl(p, a, q, b);
          t14 += gpq * weyl(p, a, b, q);
          t23 += gpq * weyl(a, p, q, b);
          t24 += gpq * weyl(a, p, b, q);
          t12 += gpq * weyl(p, q, a, b);
          t34 += gpq * weyl(a, b, p, q);
        }
      for (double t : {t13, t14, t23, t24, t12, t34})
        r = std::max(r, std::abs(t));
    }
  return r;
}

double pair_symmetry_residual(const Tensor4& riem) {
  const int n = riem.dim();
  double r = 0.0;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          r = std::max(r, std::abs(riem(k, l, i, j) - riem(i, j, k, l)));
  return r;
}

Tensor4 raise_first(const Tensor4& t, const Eigen::MatrixXd& g_inv) {
  const int n = t.dim();
  Tensor4 up(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          double s = 0.0;
          for (int k = 0; k < n; ++k) s += g_inv(a, k) * t(k, b, c, d);
          up(a, b, c, d) = s;
        }
  return up;
}

int ricci_rank(const CurvaturePack& pack, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(pack.ricci);
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > tol) ++rank;
  return rank;
}

double check_harmonic_curvature(const MetricField& field,
                                const ToleranceProfile& prof, ExecMode mode) {
  return max_over_grid(
      prof.grid,
      [&](const ChartPoint& x) {
        return harmonic_residual_at(curvature_pack(field, x, prof));
      },
      mode);
}

double check_semisymmetry(const MetricField& field,
                          const ToleranceProfile& prof, ExecMode mode) {
  return max_over_grid(
      prof.grid,
      [&](const ChartPoint& x) {
        return semisymmetry_residual_at(curvature_core(field, x, prof, true));
      },
      mode);
}

double ricci_recurrence_residual(const MetricField& field,
                                 const ToleranceProfile& prof, ExecMode mode) {
  return max_over_grid(
      prof.grid,
      [&](const ChartPoint& x) {
        return ricci_recurrence_residual_at(curvature_pack(field, x, prof));
      },
      mode);
}

double local_symmetry_residual(const MetricField& field,
                               const ToleranceProfile& prof, ExecMode mode) {
  return max_over_grid(
      prof.grid,
      [&](const ChartPoint& x) {
        return curvature_pack(field, x, prof).nabla_riem.max_abs();
      },
      mode);
}

PointReport point_report(const MetricField& field, const ChartPoint& x,
                         const ToleranceProfile& prof) {
  CurvaturePack pack = curvature_pack(field, x, prof);
  PointReport rep;
  rep.scalar_abs = std::abs(pack.scalar);
  rep.weyl_max_abs = pack.weyl_down.max_abs();
  rep.nabla_weyl = pack.nabla_weyl.max_abs();
  rep.nabla_riem = pack.nabla_riem.max_abs();
  rep.harmonic = harmonic_residual_at(pack);
  rep.ricci_recurrence = ricci_recurrence_residual_at(pack);
  rep.metric_condition = pack.metric_condition;
  CoreCurvature core;
  core.g = pack.g;
  core.g_inv = pack.g_inv;
  core.gamma = pack.gamma;
  core.riem_down = pack.riem_down;
  core.ricci = pack.ricci;
  core.scalar = pack.scalar;
  core.weyl_down = pack.weyl_down;
  rep.semisym = semisymmetry_residual_at(core);
  const double ricci_scale = std::max(pack.ricci.cwiseAbs().maxCoeff(), 1.0);
  rep.ricci_rank = ricci_rank(pack, 1e-7 * ricci_scale);
  return rep;
}

}  // namespace ecs::chartcalc
