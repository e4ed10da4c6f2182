#include "ecskit/riccati.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ecs::riccati {

std::optional<std::string> validate_kl(int k, int l) {
  if (k <= 4) return "k must exceed 4";
  if (l <= k) return "l must exceed k";
  if (4 * l > k * k) return "l must not exceed k^2/4";
  return std::nullopt;
}

SpectralTriple::Margins SpectralTriple::margins() const {
  Margins m;
  m.positivity = lambda;
  m.ordering = std::min(mu - lambda, nu - mu);
  m.below_one = 1.0 - lambda;
  m.above_one = nu - 1.0;
  m.lm = 1.0 - lambda * mu;
  m.mn = mu * nu - 1.0;
  m.ln = std::abs(lambda * nu - 1.0);
  return m;
}

bool SpectralTriple::in_U() const {
  const Margins m = margins();
  return m.positivity > 0 && m.ordering > 0 && m.below_one > 0 &&
         m.above_one > 0 && m.lm > 0 && m.mn > 0 && m.ln > 0;
}

SpectralTriple roots_of_p(const KLPair& kl) {
  if (auto why = validate_kl(kl.k, kl.l))
    throw invalid_input_error("roots_of_p: " + *why);
  const double k = kl.k, l = kl.l;
  // Monic form x^3 - k x^2 + l x - 1; depressed cubic via x = y + k/3.
  const double p = l - k * k / 3.0;
  const double q = -1.0 + k * l / 3.0 - 2.0 * k * k * k / 27.0;
  const double disc = -4.0 * p * p * p - 27.0 * q * q;
  if (!(disc > 0.0) || !(p < 0.0))
    throw internal_consistency_error(
        "roots_of_p: cubic does not have three distinct real roots");
  const double r = 2.0 * std::sqrt(-p / 3.0);
  const double phi =
      std::acos(std::clamp(3.0 * q / (p * r), -1.0, 1.0)) / 3.0;
  double roots[3];
  for (int i = 0; i < 3; ++i)
    roots[i] = r * std::cos(phi - 2.0 * M_PI * i / 3.0) + k / 3.0;
  std::sort(roots, roots + 3);
  // Newton polish on P.
  for (double& x : roots)
    for (int it = 0; it < 4; ++it) {
      const double f = ((x - k) * x + l) * x - 1.0;
      const double df = (3.0 * x - 2.0 * k) * x + l;
      x -= f / df;
    }
  SpectralTriple t{roots[0], roots[1], roots[2]};
  if (std::abs(t.lambda * t.mu * t.nu - 1.0) > 1e-12)
    throw internal_consistency_error("roots_of_p: root product differs from 1");
  if (!t.in_U())
    throw internal_consistency_error("roots_of_p: triple outside U");
  return t;
}

SeptupleResiduals residuals(const Septuple& s, int samples) {
  SeptupleResiduals r;
  const TrigPoly da = s.alpha.derivative(), db = s.beta.derivative(),
                 dg = s.gamma.derivative();
  double fmin = std::numeric_limits<double>::infinity(), fmax = -fmin;
  r.ordering_margin = fmin;
  for (int i = 0; i < samples; ++i) {
    const double t = s.p * double(i) / double(samples);
    const double al = s.alpha(t), be = s.beta(t), ga = s.gamma(t),
                 fv = s.f(t);
    r.alpha_eq = std::max(r.alpha_eq, std::abs(da(t) + al * al - fv - s.a));
    r.beta_eq = std::max(r.beta_eq, std::abs(db(t) + be * be - fv - s.b));
    r.gamma_eq = std::max(r.gamma_eq, std::abs(dg(t) + ga * ga - fv - s.c));
    r.ordering_margin = std::min(r.ordering_margin, std::min(al - be, be - ga));
    fmin = std::min(fmin, fv);
    fmax = std::max(fmax, fv);
  }
  r.f_range = fmax - fmin;
  return r;
}

std::vector<std::string> validate(const Septuple& s, double eq_tol) {
  std::vector<std::string> out;
  if (!(s.p > 0.0)) out.push_back("period must be positive");
  if (std::abs(s.a + s.b + s.c) > 1e-10) out.push_back("a+b+c != 0");
  const double sep = std::min({std::abs(s.a - s.b), std::abs(s.b - s.c),
                               std::abs(s.a - s.c)});
  if (sep < 1e-10) out.push_back("a, b, c must be distinct");
  if (!(s.b < s.a && s.b < s.c)) out.push_back("b must be the smallest constant");
  const SeptupleResiduals r = residuals(s);
  if (r.ordering_margin <= 0.0) out.push_back("alpha > beta > gamma fails on grid");
  if (r.alpha_eq > eq_tol) out.push_back("alpha equation residual above tolerance");
  if (r.beta_eq > eq_tol) out.push_back("beta equation residual above tolerance");
  if (r.gamma_eq > eq_tol) out.push_back("gamma equation residual above tolerance");
  return out;
}

PairReconstruction reconstruct_pair(const TrigPoly& rho, double a, double b,
                                    int harmonics, int samples) {
  if (!(a > b)) throw invalid_input_error("reconstruct_pair: need a > b");
  const double p = rho.period();
  const TrigPoly drho = rho.derivative();
  std::vector<double> psi(samples);
  for (int i = 0; i < samples; ++i) {
    const double t = p * double(i) / double(samples);
    const double rv = rho(t);
    if (!(rv > 1e-9))
      throw invalid_input_error("reconstruct_pair: rho must stay positive");
    psi[i] = (a - b - drho(t)) / rv;
  }
  TrigPoly psis = TrigPoly::project(psi, p, std::size_t(harmonics));
  PairReconstruction out;
  out.alpha = ((psis + rho) * 0.5).truncated();
  out.beta = ((psis - rho) * 0.5).truncated();
  out.f = (out.alpha.derivative() + out.alpha * out.alpha - a).truncated();
  return out;
}

SpectralTriple spec(const Septuple& s) {
  auto integral = [&](const TrigPoly& g) {
    // Trapezoid on a periodic integrand; refine once for the error estimate.
    auto quad = [&](int n) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += g(s.p * double(i) / double(n));
      return acc * s.p / double(n);
    };
    const double q1 = quad(512), q2 = quad(1024);
    if (std::abs(q2 - q1) > 1e-10)
      throw internal_consistency_error(
          "spec: quadrature error estimate above 1e-10");
    return q2;
  };
  SpectralTriple t;
  t.lambda = std::exp(-integral(s.alpha));
  t.mu = std::exp(-integral(s.beta));
  t.nu = std::exp(-integral(s.gamma));
  return t;
}

namespace {

struct Reduction {
  TrigPoly alpha, beta, gamma, f, rho, sigma;
  double a, b, c;
  Eigen::Vector3d integrals;  // (int alpha, int beta, int gamma)
};

// Septuple functions from the free data (a, c, mean of w): the shared-beta
// constraint between the rho- and sigma-reductions collapses to a pointwise
// quadratic in rho,
//   rho^2 (1 + e^w) - w' rho + (b - c) e^{-w} - (a - b) = 0,
// whose positive root is unique whenever b is the smallest constant.
Reduction reduce(double a, double c, double w0, double p,
                 const SolveOptions& opt) {
  const double b = -a - c;
  const int N = opt.samples;
  const int K = opt.harmonics;
  TrigPoly w(p, w0, {opt.w_amplitude}, {0.0});
  TrigPoly dw = w.derivative();

  std::vector<double> rho_s(N);
  for (int i = 0; i < N; ++i) {
    const double t = p * double(i) / double(N);
    const double ew = std::exp(w(t));
    const double A = 1.0 + ew;
    const double B = -dw(t);
    const double C = (b - c) * std::exp(-w(t)) - (a - b);
    const double disc = B * B - 4.0 * A * C;
    rho_s[i] = (-B + std::sqrt(disc)) / (2.0 * A);
  }
  Reduction red;
  red.a = a;
  red.b = b;
  red.c = c;
  red.rho = TrigPoly::project(rho_s, p, std::size_t(K));

  std::vector<double> sigma_s(N), psi_s(N);
  const TrigPoly drho = red.rho.derivative();
  for (int i = 0; i < N; ++i) {
    const double t = p * double(i) / double(N);
    sigma_s[i] = red.rho(t) * std::exp(w(t));
    psi_s[i] = (a - b - drho(t)) / red.rho(t);
  }
  red.sigma = TrigPoly::project(sigma_s, p, std::size_t(K));
  TrigPoly psi = TrigPoly::project(psi_s, p, std::size_t(K));

  red.alpha = (psi + red.rho) * 0.5;
  red.beta = (psi - red.rho) * 0.5;
  red.gamma = red.beta - red.sigma;
  red.f = red.alpha.derivative() + red.alpha * red.alpha - a;
  red.integrals = Eigen::Vector3d(red.alpha.integral_over_period(),
                                  red.beta.integral_over_period(),
                                  red.gamma.integral_over_period());
  return red;
}

}  // namespace

Septuple solve_septuple(const SpectralTriple& target, double p,
                        const SolveOptions& opt) {
  if (!(p > 0.0)) throw invalid_input_error("solve_septuple: period must be positive");
  if (!target.in_U())
    throw invalid_input_error("solve_septuple: target outside the region U");

  const Eigen::Vector3d goal(-std::log(target.lambda), -std::log(target.mu),
                             -std::log(target.nu));

  // Initial guess from the constant septuple hitting the same integrals.
  const double a0 = goal[0] / p, b0 = goal[1] / p, g0 = goal[2] / p;
  const double f0 = (a0 * a0 + b0 * b0 + g0 * g0) / 3.0;
  Eigen::Vector3d theta(a0 * a0 - f0, g0 * g0 - f0,
                        std::log((b0 - g0) / (a0 - b0)));

  auto admissible = [](const Eigen::Vector3d& th) {
    const double a = th[0], c = th[1], b = -a - c;
    return b < a - 1e-9 && b < c - 1e-9;
  };
  if (!admissible(theta))
    throw solver_failure("solve_septuple: initial guess violates b-smallest");

  auto F = [&](const Eigen::Vector3d& th) {
    return Eigen::Vector3d(
        reduce(th[0], th[1], th[2], p, opt).integrals - goal);
  };

  Eigen::Vector3d r = F(theta);
  std::ostringstream history;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    history << "iter " << it << ": |F| = " << r.cwiseAbs().maxCoeff() << "\n";
    if (r.cwiseAbs().maxCoeff() < opt.newton_tol) break;
    Eigen::Matrix3d J;
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d tp = theta;
      const double h = 1e-7 * std::max(1.0, std::abs(theta[j]));
      tp[j] += h;
      J.col(j) = (F(tp) - r) / h;
    }
    const Eigen::Vector3d step = J.partialPivLu().solve(r);
    double damp = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 12; ++ls, damp *= 0.5) {
      Eigen::Vector3d cand = theta - damp * step;
      if (!admissible(cand)) continue;
      Eigen::Vector3d rc = F(cand);
      if (rc.norm() < r.norm()) {
        theta = cand;
        r = rc;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw solver_failure("solve_septuple: line search stalled\n" +
                           history.str());
  }
  if (r.cwiseAbs().maxCoeff() >= opt.newton_tol)
    throw solver_failure("solve_septuple: Newton did not converge\n" +
                         history.str());

  Reduction red = reduce(theta[0], theta[1], theta[2], p, opt);
  Septuple s;
  s.alpha = red.alpha.truncated();
  s.beta = red.beta.truncated();
  s.gamma = red.gamma.truncated();
  s.f = red.f.truncated();
  s.a = red.a;
  s.b = red.b;
  s.c = red.c;
  s.p = p;

  auto violations = validate(s);
  if (!violations.empty()) {
    std::ostringstream os;
    os << "solve_septuple: produced invalid septuple:";
    for (const auto& v : violations) os << " [" << v << "]";
    os << "\n" << history.str();
    throw solver_failure(os.str());
  }
  SpectralTriple got = spec(s);
  const double miss = std::max({std::abs(got.lambda - target.lambda),
                                std::abs(got.mu - target.mu),
                                std::abs(got.nu - target.nu)});
  if (miss > 1e-8)
    throw solver_failure("solve_septuple: spec misses target by " +
                         std::to_string(miss) + "\n" + history.str());
  return s;
}

}  // namespace ecs::riccati
