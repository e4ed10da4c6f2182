#include "ecskit/olszak.hpp"

#include <cmath>
#include <sstream>

#include "ecskit/ode.hpp"

namespace ecs::olszak {

namespace {

Eigen::MatrixXd orthonormalized(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  return q.leftCols(m.cols());
}

}  // namespace

double subspace_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) return M_PI / 2.0;
  Eigen::MatrixXd qa = orthonormalized(a), qb = orthonormalized(b);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
  const double c = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  return std::acos(c);
}

DistributionFiber olszak_fiber(const chartcalc::CurvaturePack& pack,
                               const Eigen::MatrixXd& g, double rel_tol) {
  const int n = int(g.rows());
  const auto& W = pack.weyl_down;
  DistributionFiber fiber;
  fiber.point = pack.point;

  const double wscale = W.max_abs();
  const double gscale = std::max(g.cwiseAbs().maxCoeff(), 1.0);
  if (wscale < 1e-11 * gscale) {
    // Conformally flat: the defining condition is vacuous.
    fiber.dim = n;
    fiber.basis = Eigen::MatrixXd::Identity(n, n);
    fiber.nullity_residual = 0.0;
    return fiber;
  }

  // Rows: (a<b) x (k<i<j); columns: the vector index of u.
  const int pairs = n * (n - 1) / 2;
  const int triples = n * (n - 1) * (n - 2) / 6;
  Eigen::MatrixXd M(pairs * triples, n);
  int row = 0;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int k = 0; k < n; ++k)
        for (int i = k + 1; i < n; ++i)
          for (int j = i + 1; j < n; ++j) {
            for (int m = 0; m < n; ++m) {
              // (xi ^ Omega)_{kij} with xi = g(u,.), Omega = W(e_a, e_b,.,.)
              M(row, m) = g(m, k) * W(a, b, i, j) + g(m, i) * W(a, b, j, k) +
                          g(m, j) * W(a, b, k, i);
            }
            ++row;
          }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double smax = sv[0];
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > rel_tol * smax) ++rank;
  if (rank > 0 && rank < n) {
    const double kept = sv[rank - 1];
    const double dropped = sv[rank];
    if (dropped > 0.0 && kept / dropped < 1e3) {
      std::ostringstream os;
      os << "olszak_fiber: ambiguous kernel dimension, singular values "
         << kept << " / " << dropped;
      throw ambiguous_dimension_error(os.str(), n - rank, n - rank + 1);
    }
  }
  fiber.dim = n - rank;
  fiber.basis = svd.matrixV().rightCols(fiber.dim);
  for (int i = 0; i < fiber.dim; ++i)
    for (int j = 0; j < fiber.dim; ++j)
      fiber.nullity_residual =
          std::max(fiber.nullity_residual,
                   std::abs(fiber.basis.col(i).dot(g * fiber.basis.col(j))));
  return fiber;
}

std::optional<RankOneWeylWitness> rank_one_weyl_witness(
    const chartcalc::CurvaturePack& pack, const Eigen::MatrixXd& g,
    double rel_tol) {
  const int n = int(g.rows());
  const auto& W = pack.weyl_down;
  const int N = n * (n - 1) / 2;

  std::vector<std::pair<int, int>> wedge;
  wedge.reserve(N);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) wedge.push_back({i, j});

  Eigen::MatrixXd op(N, N);
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c)
      op(r, c) = W(wedge[r].first, wedge[r].second, wedge[c].first,
                   wedge[c].second);
  op = 0.5 * (op + op.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op);
  const Eigen::VectorXd ev = es.eigenvalues();
  double emax = ev.cwiseAbs().maxCoeff();
  if (emax == 0.0) return std::nullopt;
  int large = 0, which = 0;
  for (int i = 0; i < N; ++i)
    if (std::abs(ev[i]) > rel_tol * emax) {
      ++large;
      which = i;
    }
  if (large != 1) return std::nullopt;

  RankOneWeylWitness w;
  w.sign = ev[which] > 0 ? 1 : -1;
  const Eigen::VectorXd xi = es.eigenvectors().col(which);
  w.omega = Eigen::MatrixXd::Zero(n, n);
  const double scale = std::sqrt(std::abs(ev[which]));
  for (int r = 0; r < N; ++r) {
    w.omega(wedge[r].first, wedge[r].second) = scale * xi[r];
    w.omega(wedge[r].second, wedge[r].first) = -scale * xi[r];
  }
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          w.residual = std::max(
              w.residual, std::abs(W(k, l, i, j) -
                                   w.sign * w.omega(k, l) * w.omega(i, j)));

  // omega as endomorphism: omega^k_j = g^{ki} omega_{ij}.
  Eigen::MatrixXd endo = pack.g_inv * w.omega;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(endo, Eigen::ComputeThinU);
  const Eigen::VectorXd sv = svd.singularValues();
  w.omega_rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-7 * sv[0]) ++w.omega_rank;
  if (w.omega_rank >= 1) {
    DistributionFiber fiber = olszak_fiber(pack, g, rel_tol);
    if (fiber.dim == w.omega_rank)
      w.image_angle = subspace_angle(svd.matrixU().leftCols(w.omega_rank),
                                     fiber.basis);
    else
      w.image_angle = M_PI / 2.0;
  }
  return w;
}

ParallelReport nullity_parallel_check(const MetricField& field,
                                      const std::vector<DistributionFiber>& fibers,
                                      const ToleranceProfile& prof) {
  ParallelReport rep;
  if (fibers.empty()) return rep;
  for (const auto& f : fibers) {
    if (f.dim == field.dim) {
      rep.skipped_full_dim = true;
      continue;
    }
    rep.nullity_residual = std::max(rep.nullity_residual, f.nullity_residual);
  }

  for (std::size_t i = 0; i + 1 < fibers.size(); ++i) {
    const auto& from = fibers[i];
    const auto& to = fibers[i + 1];
    if (from.dim == field.dim || to.dim == field.dim) continue;
    if (from.dim != to.dim) {
      rep.transport_angle = M_PI / 2.0;
      continue;
    }
    const ChartPoint x0 = from.point, x1 = to.point;
    const ChartPoint dx = x1 - x0;
    const int n = field.dim;
    const int d = from.dim;
    // Transport the basis matrix column-stacked: u' = -Gamma(x(l)) (dx, u).
    Eigen::VectorXd y0(n * d);
    for (int c = 0; c < d; ++c) y0.segment(c * n, n) = from.basis.col(c);
    auto rhs = [&](double lambda, const Eigen::VectorXd& y) {
      ChartPoint x = x0 + lambda * dx;
      Tensor3 gamma = chartcalc::christoffel(field, x, prof);
      Eigen::VectorXd dy(n * d);
      for (int c = 0; c < d; ++c)
        for (int k = 0; k < n; ++k) {
          double s = 0.0;
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
              s -= gamma(k, a, b) * dx[a] * y[c * n + b];
          dy[c * n + k] = s;
        }
      return dy;
    };
    OdeOptions opt;
    opt.atol = opt.rtol = 1e-12;
    opt.initial_step = 0.05;
    Eigen::VectorXd y1 = integrate_dopri5(rhs, 0.0, 1.0, y0, opt);
    Eigen::MatrixXd transported(n, d);
    for (int c = 0; c < d; ++c) transported.col(c) = y1.segment(c * n, n);
    rep.transport_angle = std::max(rep.transport_angle,
                                   subspace_angle(transported, to.basis));
  }
  return rep;
}

}  // namespace ecs::olszak
