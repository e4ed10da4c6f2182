#ifndef ECSKIT_RICCATI_HPP
#define ECSKIT_RICCATI_HPP

#include <optional>
#include <string>
#include <vector>

#include "ecskit/trig_poly.hpp"

namespace ecs::riccati {

/// Integer pair gating the cubic below: 4 < k < l <= k^2/4.
struct KLPair {
  int k = 0;
  int l = 0;
};

/// nullopt when the pair is admissible, else the reason.
std::optional<std::string> validate_kl(int k, int l);

/// Sorted positive triple (lambda < mu < nu) with its admissibility margins
/// for the open region U:  0 < lambda < mu < nu,  lambda < 1 < nu,
/// lambda mu < 1 < mu nu,  lambda nu != 1.
struct SpectralTriple {
  double lambda = 0.0, mu = 0.0, nu = 0.0;

  struct Margins {
    double positivity;   // lambda
    double ordering;     // min(mu - lambda, nu - mu)
    double below_one;    // 1 - lambda
    double above_one;    // nu - 1
    double lm;           // 1 - lambda mu
    double mn;           // mu nu - 1
    double ln;           // |lambda nu - 1|
  };
  Margins margins() const;
  bool in_U() const;
};

/// Real roots of  P(x) = -x^3 + k x^2 - l x + 1  for an admissible (k, l),
/// by the trigonometric method with a Newton polish.  Checks that the root
/// product is 1 (the constant term of P forces it) and that the triple lies
/// in U; violations signal a bad input gate, not a user error.
SpectralTriple roots_of_p(const KLPair& kl);

/// Periodic Riccati system data: alpha' + alpha^2 = f + a (and cyclically
/// for beta/b, gamma/c) with a + b + c = 0, b smallest, alpha > beta > gamma.
struct Septuple {
  TrigPoly alpha, beta, gamma, f;
  double a = 0.0, b = 0.0, c = 0.0;
  double p = 1.0;
};

struct SeptupleResiduals {
  double alpha_eq = 0.0, beta_eq = 0.0, gamma_eq = 0.0;
  double ordering_margin = 0.0;  // min over grid of min(alpha-beta, beta-gamma)
  double f_range = 0.0;          // max f - min f (nonconstancy)
};

SeptupleResiduals residuals(const Septuple& s, int samples = 512);
std::vector<std::string> validate(const Septuple& s, double eq_tol = 1e-8);

/// Solve the coupled pair  alpha' + alpha^2 = f + a,  beta' + beta^2 = f + b
/// (a > b) from a positive periodic rho = alpha - beta:
///   psi = (a - b - rho') / rho,  alpha = (psi + rho)/2,  beta = (psi - rho)/2,
///   f = alpha' + alpha^2 - a.
struct PairReconstruction {
  TrigPoly alpha, beta, f;
};
PairReconstruction reconstruct_pair(const TrigPoly& rho, double a, double b,
                                    int harmonics = 64, int samples = 512);

/// The three exponentials  exp(-int_0^p alpha), ... (trapezoid quadrature
/// with a refinement-based error estimate kept below 1e-10).
SpectralTriple spec(const Septuple& s);

struct SolveOptions {
  double w_amplitude = 0.6;  // fixed first-harmonic shape of w = log(sigma/rho)
  int samples = 512;
  int harmonics = 64;
  double newton_tol = 1e-12;
  int max_iterations = 60;
};

/// Septuple with spec(s) = target for any target in U.  Deterministic;
/// throws solver_failure with diagnostics on nonconvergence and
/// invalid_input_error when the target is outside U.
Septuple solve_septuple(const SpectralTriple& target, double p,
                        const SolveOptions& opt = {});

}  // namespace ecs::riccati

#endif
