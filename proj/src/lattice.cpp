#include "ecskit/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "ecskit/ode.hpp"
#include "ecskit/olszak.hpp"

namespace ecs::lattice {

namespace {

// Matrix ODE F' = diag(B(t)) F flattened column-major.
Eigen::MatrixXd propagate_fundamental(const BlockProfile& bp, double t0,
                                      double t1, double tol) {
  const int n = bp.dim();
  Eigen::VectorXd y0(n * n);
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  for (int c = 0; c < n; ++c) y0.segment(c * n, n) = I.col(c);
  auto rhs = [&](double t, const Eigen::VectorXd& y) {
    const Eigen::VectorXd d = bp.diagonal(t);
    Eigen::VectorXd dy(n * n);
    for (int c = 0; c < n; ++c)
      dy.segment(c * n, n) = d.cwiseProduct(y.segment(c * n, n));
    return dy;
  };
  OdeOptions opt;
  opt.atol = opt.rtol = tol;
  opt.initial_step = 1e-3;
  Eigen::VectorXd y = integrate_dopri5(rhs, t0, t1, y0, opt);
  Eigen::MatrixXd F(n, n);
  for (int c = 0; c < n; ++c) F.col(c) = y.segment(c * n, n);
  return F;
}

}  // namespace

Eigen::MatrixXd BlockProfile::constant_matrix() const {
  Eigen::VectorXd d(dim());
  for (int b = 0; b < j; ++b) {
    d[3 * b] = septuple.a;
    d[3 * b + 1] = septuple.b;
    d[3 * b + 2] = septuple.c;
  }
  return d.asDiagonal();
}

Eigen::VectorXd BlockProfile::diagonal(double t) const {
  Eigen::VectorXd d(dim());
  const double al = septuple.alpha(t), be = septuple.beta(t),
               ga = septuple.gamma(t);
  for (int b = 0; b < j; ++b) {
    d[3 * b] = al;
    d[3 * b + 1] = be;
    d[3 * b + 2] = ga;
  }
  return d;
}

double BlockProfile::equation_residual(int samples) const {
  const riccati::SeptupleResiduals r = riccati::residuals(septuple, samples);
  return std::max({r.alpha_eq, r.beta_eq, r.gamma_eq});
}

BlockProfile build_blocks(const riccati::Septuple& s, int j) {
  if (j < 1) throw invalid_input_error("build_blocks: j must be >= 1");
  auto violations = riccati::validate(s);
  if (!violations.empty()) {
    std::ostringstream os;
    os << "build_blocks: invalid septuple:";
    for (const auto& v : violations) os << " [" << v << "]";
    throw invalid_input_error(os.str());
  }
  return BlockProfile{s, j};
}

std::vector<double> characteristic_polynomial(const Eigen::MatrixXd& m) {
  const int n = int(m.rows());
  std::vector<double> c(std::size_t(n) + 1, 0.0);
  c[0] = 1.0;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i <= n; ++i) {
    M = m * M + c[std::size_t(i) - 1] * Eigen::MatrixXd::Identity(n, n);
    c[std::size_t(i)] = -(m * M).trace() / double(i);
  }
  return c;  // det(xI - m) = sum c[d] x^{n-d}
}

TranslationOperator translation_operator(const BlockProfile& bp) {
  TranslationOperator t;
  const double p = bp.septuple.p;
  Eigen::MatrixXd F = propagate_fundamental(bp, 0.0, -p, 1e-12);
  Eigen::MatrixXd F2 = propagate_fundamental(bp, 0.0, -p, 1e-13);
  t.integrator_crosscheck = (F - F2).cwiseAbs().maxCoeff();
  if (t.integrator_crosscheck > 1e-10)
    throw solver_failure(
        "translation_operator: integrator cross-check failed: " +
        std::to_string(t.integrator_crosscheck));
  t.matrix = F2;
  t.charpoly = characteristic_polynomial(t.matrix);
  return t;
}

GateResult charpoly_gate(const TranslationOperator& t, double tol) {
  GateResult g;
  g.coefficients = t.charpoly;
  g.determinant = t.matrix.determinant();
  for (double c : t.charpoly) {
    const double r = std::round(c);
    g.nearest_integer.push_back(static_cast<long long>(r));
    g.max_deviation = std::max(g.max_deviation, std::abs(c - r));
  }
  g.unit_constant_term = std::llabs(g.nearest_integer.back()) == 1;
  g.pass = g.max_deviation < tol && g.unit_constant_term;
  return g;
}

UState evaluate_u(const GroupElement& g, const d1::D1Data& data, double t) {
  const int m = data.n - 2;
  if (g.u0.size() != m || g.udot0.size() != m)
    throw invalid_input_error("evaluate_u: element dimension mismatch");
  UState st{g.u0, g.udot0};
  if (t == 0.0) return st;
  const Eigen::MatrixXd A = data.A;
  auto rhs = [&](double tt, const Eigen::VectorXd& y) {
    Eigen::VectorXd dy(2 * m);
    dy.head(m) = y.tail(m);
    dy.tail(m) = data.f.f(tt) * y.head(m) + A * y.head(m);
    return dy;
  };
  Eigen::VectorXd y0(2 * m);
  y0.head(m) = g.u0;
  y0.tail(m) = g.udot0;
  OdeOptions opt;
  opt.atol = opt.rtol = 1e-12;
  Eigen::VectorXd y = integrate_dopri5(rhs, 0.0, t, y0, opt);
  st.u = y.head(m);
  st.udot = y.tail(m);
  return st;
}

namespace {

ChartPoint act_impl(const GroupElement& g, const ChartPoint& x,
                    const d1::D1Data& data, bool corrupted) {
  if (!data.period)
    throw invalid_input_error("group action requires periodic data");
  const int m = data.n - 2;
  if (int(x.size()) != data.n)
    throw invalid_input_error("group_act: point dimension mismatch");
  const double t = x[0];
  const Eigen::VectorXd v = x.segment(2, m);
  const UState st = evaluate_u(g, data, t);
  ChartPoint y(data.n);
  y[0] = t + double(g.k) * *data.period;
  double sterm = 0.0;
  if (!corrupted)
    sterm = st.udot.dot(data.gram * (2.0 * v + st.u));
  y[1] = x[1] + g.q - sterm;
  y.segment(2, m) = v + st.u;
  return y;
}

}  // namespace

ChartPoint group_act(const GroupElement& g, const ChartPoint& x,
                     const d1::D1Data& data) {
  return act_impl(g, x, data, false);
}

ChartPoint group_act_corrupted(const GroupElement& g, const ChartPoint& x,
                               const d1::D1Data& data) {
  return act_impl(g, x, data, true);
}

GroupElement group_compose(const GroupElement& g1, const GroupElement& g2,
                           const d1::D1Data& data) {
  if (!data.period)
    throw invalid_input_error("group composition requires periodic data");
  const double p = *data.period;
  const UState u1 = evaluate_u(g1, data, double(g2.k) * p);
  GroupElement g;
  g.k = g1.k + g2.k;
  // The Wronskian-type pairing <u1', u2> - <u1, u2'> is t-independent
  // because A is gram-self-adjoint; evaluate it at t = 0.
  g.q = g1.q + g2.q + u1.udot.dot(data.gram * g2.u0) -
        u1.u.dot(data.gram * g2.udot0);
  g.u0 = g2.u0 + u1.u;
  g.udot0 = g2.udot0 + u1.udot;
  return g;
}

GroupElement group_inverse(const GroupElement& g, const d1::D1Data& data) {
  if (!data.period)
    throw invalid_input_error("group inverse requires periodic data");
  const double p = *data.period;
  const UState st = evaluate_u(g, data, -double(g.k) * p);
  GroupElement inv;
  inv.k = -g.k;
  inv.q = -g.q;
  inv.u0 = -st.u;
  inv.udot0 = -st.udot;
  return inv;
}

double isometry_residual(const GroupElement& g, const d1::D1Data& data,
                         const ToleranceProfile& prof, ExecMode mode,
                         bool corrupted) {
  MetricField field = d1::build_metric(data);
  const int n = data.n;
  const double h = 1e-6;

  // The action moves t only by a constant shift, so u(t), u'(t) is needed at
  // a handful of t values; precompute them so the sweep is read-only.
  std::map<double, UState> ucache;
  for (const auto& x : prof.grid)
    for (double dt : {0.0, h, -h}) ucache.emplace(x[0] + dt, UState{});
  for (auto& [t, st] : ucache) st = evaluate_u(g, data, t);

  auto act = [&](const ChartPoint& x) {
    const int m = n - 2;
    const double t = x[0];
    auto it = ucache.find(t);
    const UState st =
        (it != ucache.end()) ? it->second : evaluate_u(g, data, t);
    ChartPoint y(n);
    y[0] = t + double(g.k) * *data.period;
    const Eigen::VectorXd v = x.segment(2, m);
    double sterm = corrupted ? 0.0 : st.udot.dot(data.gram * (2.0 * v + st.u));
    y[1] = x[1] + g.q - sterm;
    y.segment(2, m) = v + st.u;
    return y;
  };

  auto residual_at = [&](const ChartPoint& x) {
    Eigen::MatrixXd jac(n, n);
    for (int m_ = 0; m_ < n; ++m_) {
      ChartPoint xp = x, xm = x;
      xp[m_] += h;
      xm[m_] -= h;
      jac.col(m_) = (act(xp) - act(xm)) / (2.0 * h);
    }
    const Eigen::MatrixXd gy = field.eval(act(x));
    const Eigen::MatrixXd pulled = jac.transpose() * gy * jac;
    return (pulled - field.eval(x)).cwiseAbs().maxCoeff();
  };
  return max_over_grid(prof.grid, residual_at, mode);
}

std::string septuple_digest(const riccati::Septuple& s) {
  const std::string repr = septuple_to_json(s).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : repr) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

nlohmann::ordered_json septuple_to_json(const riccati::Septuple& s) {
  auto series = [](const TrigPoly& f) {
    return nlohmann::ordered_json{{"mean", f.mean()},
                                  {"cos", f.cos_coeffs()},
                                  {"sin", f.sin_coeffs()}};
  };
  return nlohmann::ordered_json{
      {"period", s.p},        {"a", s.a},
      {"b", s.b},             {"c", s.c},
      {"alpha", series(s.alpha)}, {"beta", series(s.beta)},
      {"gamma", series(s.gamma)}, {"f", series(s.f)}};
}

d1::D1Data pipeline_d1_data(const riccati::Septuple& s, int j) {
  d1::D1Data d;
  d.n = 3 * j + 2;
  d.f = d1::ProfileFunction::from_series(s.f);
  d.period = s.p;
  d.gram = Eigen::MatrixXd::Identity(3 * j, 3 * j);
  d.A = build_blocks(s, j).constant_matrix();
  return d;
}

CompactnessCertificate certify_compact(int k, int l, int j, double p,
                                       const CertifyOptions& opt,
                                       const StageLogger& log) {
  auto stage = [&](const std::string& name, double resid, double tol,
                   bool ok) {
    if (log) log(name, resid, tol, ok);
  };
  CompactnessCertificate cert;
  cert.k = k;
  cert.l = l;
  cert.j = j;
  cert.p = p;
  cert.dimension = 3 * j + 2;
  auto fail = [&](const std::string& what) { cert.failures.push_back(what); };

  if (auto why = riccati::validate_kl(k, l))
    throw invalid_input_error("certify_compact: " + *why);
  if (j < 1) throw invalid_input_error("certify_compact: j must be >= 1");
  if (!(p > 0.0)) throw invalid_input_error("certify_compact: period must be positive");

  cert.roots = riccati::roots_of_p({k, l});
  stage("roots-of-P", std::abs(cert.roots.lambda * cert.roots.mu * cert.roots.nu - 1.0),
        1e-12, true);

  riccati::Septuple sept = riccati::solve_septuple(cert.roots, p);
  cert.septuple_digest = septuple_digest(sept);
  cert.septuple_residuals = riccati::residuals(sept);
  {
    const double r = std::max({cert.septuple_residuals.alpha_eq,
                               cert.septuple_residuals.beta_eq,
                               cert.septuple_residuals.gamma_eq});
    const bool ok = r < opt.tol_riccati;
    stage("septuple-riccati", r, opt.tol_riccati, ok);
    if (!ok) fail("riccati residual");
  }
  {
    riccati::SpectralTriple got = riccati::spec(sept);
    cert.spec_vs_target = std::max({std::abs(got.lambda - cert.roots.lambda),
                                    std::abs(got.mu - cert.roots.mu),
                                    std::abs(got.nu - cert.roots.nu)});
    const bool ok = cert.spec_vs_target < opt.tol_spec;
    stage("spec-vs-target", cert.spec_vs_target, opt.tol_spec, ok);
    if (!ok) fail("spec vs target");
  }

  BlockProfile bp = build_blocks(sept, j);
  TranslationOperator T = translation_operator(bp);
  cert.integrator_crosscheck = T.integrator_crosscheck;
  {
    // Floquet eigenvalues against the spec-map values: two independent
    // computations of the same spectrum.
    Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(T.matrix)
                              .eigenvalues();
    std::vector<double> got;
    for (Eigen::Index i = 0; i < ev.size(); ++i) got.push_back(ev[i].real());
    std::sort(got.begin(), got.end());
    std::vector<double> want;
    for (int b = 0; b < j; ++b) {
      want.push_back(cert.roots.lambda);
      want.push_back(cert.roots.mu);
      want.push_back(cert.roots.nu);
    }
    std::sort(want.begin(), want.end());
    double r = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i)
      r = std::max(r, std::abs(got[i] - want[i]));
    cert.spec_vs_floquet = r;
    const bool ok = r < opt.tol_spec;
    stage("spec-vs-floquet", r, opt.tol_spec, ok);
    if (!ok) fail("spec vs floquet");
  }

  cert.gate = charpoly_gate(T, opt.tol_charpoly);
  stage("charpoly-gate", cert.gate.max_deviation, opt.tol_charpoly,
        cert.gate.pass);
  if (!cert.gate.pass) fail("charpoly integrality gate");
  {
    const double det_err = std::abs(std::abs(cert.gate.determinant) - 1.0);
    const bool ok = det_err < opt.tol_det;
    stage("unit-determinant", det_err, opt.tol_det, ok);
    if (!ok) fail("determinant not +-1");
  }

  // The constructed metric data must pass the full d = 1 verification suite.
  d1::D1Data data = pipeline_d1_data(sept, j);
  const int points = opt.suite_points_per_coord
                         ? opt.suite_points_per_coord
                         : (cert.dimension <= 6 ? 5 : 3);
  ToleranceProfile prof = d1::default_profile(data, points);
  cert.metric_signature = d1::build_metric(data).signature;
  cert.d1_suite = d1::run_suite(data, prof);
  {
    const bool ok = cert.d1_suite.scalar_abs < opt.tol_scalar &&
                    cert.d1_suite.nabla_weyl < opt.tol_second &&
                    cert.d1_suite.harmonic < opt.tol_second &&
                    cert.d1_suite.semisym < opt.tol_second &&
                    cert.d1_suite.ricci_recurrence < opt.tol_second &&
                    cert.d1_suite.max_ricci_rank <= 2 &&
                    cert.d1_suite.olszak_dim_min == 1 &&
                    cert.d1_suite.olszak_dim_max == 1 &&
                    cert.d1_suite.weyl_min_over_grid > 1e-6;
    stage("d1-suite", std::max({cert.d1_suite.nabla_weyl, cert.d1_suite.harmonic,
                                cert.d1_suite.semisym}),
          opt.tol_second, ok);
    if (!ok) fail("d1 verification suite");
  }
  {
    auto verdict = d1::local_symmetry_dichotomy(data, prof);
    cert.dichotomy = (verdict == d1::SymmetryVerdict::Symmetric)
                         ? "symmetric"
                         : "essentially-conformally-symmetric";
    const bool ok =
        verdict == d1::SymmetryVerdict::EssentiallyConformallySymmetric;
    stage("nonconstant-f", cert.septuple_residuals.f_range, 1e-6, ok);
    if (!ok) fail("constructed f is constant");
  }

  // Isometry spot checks with seeded random group elements.
  {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    std::uniform_int_distribution<int> kdist(-1, 1);
    ToleranceProfile iso_prof =
        d1::default_profile(data, opt.isometry_points_per_coord);
    double worst = 0.0;
    for (int s = 0; s < opt.isometry_samples; ++s) {
      GroupElement ge;
      ge.k = kdist(rng);
      ge.q = unit(rng);
      ge.u0 = Eigen::VectorXd::NullaryExpr(3 * j, [&](Eigen::Index) { return unit(rng); });
      ge.udot0 = Eigen::VectorXd::NullaryExpr(3 * j, [&](Eigen::Index) { return unit(rng); });
      const double r = isometry_residual(ge, data, iso_prof);
      cert.isometry_residuals.push_back(r);
      worst = std::max(worst, r);
    }
    const bool ok = worst < opt.tol_isometry;
    stage("isometry", worst, opt.tol_isometry, ok);
    if (!ok) fail("isometry residual");

    // Group law spot check: associativity + identity on a few triples.
    double law = 0.0;
    for (int s = 0; s < 5; ++s) {
      auto mk = [&]() {
        GroupElement ge;
        ge.k = kdist(rng);
        ge.q = unit(rng);
        ge.u0 = Eigen::VectorXd::NullaryExpr(3 * j, [&](Eigen::Index) { return unit(rng); });
        ge.udot0 = Eigen::VectorXd::NullaryExpr(3 * j, [&](Eigen::Index) { return unit(rng); });
        return ge;
      };
      GroupElement g1 = mk(), g2 = mk(), g3 = mk();
      GroupElement lft = group_compose(group_compose(g1, g2, data), g3, data);
      GroupElement rgt = group_compose(g1, group_compose(g2, g3, data), data);
      law = std::max({law, std::abs(lft.q - rgt.q),
                      (lft.u0 - rgt.u0).cwiseAbs().maxCoeff(),
                      (lft.udot0 - rgt.udot0).cwiseAbs().maxCoeff()});
      law = std::max(law, double(std::abs(lft.k - rgt.k)));
    }
    cert.group_law_residual = law;
    const bool law_ok = law < 1e-10;
    stage("group-law", law, 1e-10, law_ok);
    if (!law_ok) fail("group law");
  }

  cert.pass = cert.failures.empty();
  return cert;
}

nlohmann::ordered_json to_json(const CompactnessCertificate& cert) {
  nlohmann::ordered_json j;
  j["schema_version"] = cert.schema_version;
  j["kl"] = {{"k", cert.k}, {"l", cert.l}};
  j["j"] = cert.j;
  j["p"] = cert.p;
  j["dimension"] = cert.dimension;
  j["metric_signature"] = {{"plus", cert.metric_signature.plus},
                           {"minus", cert.metric_signature.minus}};
  j["roots"] = {{"lambda", cert.roots.lambda},
                {"mu", cert.roots.mu},
                {"nu", cert.roots.nu}};
  j["septuple_digest"] = cert.septuple_digest;
  j["riccati_residuals"] = {{"alpha", cert.septuple_residuals.alpha_eq},
                            {"beta", cert.septuple_residuals.beta_eq},
                            {"gamma", cert.septuple_residuals.gamma_eq},
                            {"ordering_margin", cert.septuple_residuals.ordering_margin},
                            {"f_range", cert.septuple_residuals.f_range}};
  j["spec_vs_target"] = cert.spec_vs_target;
  j["spec_vs_floquet"] = cert.spec_vs_floquet;
  j["integrator_crosscheck"] = cert.integrator_crosscheck;
  j["charpoly"] = {{"coefficients", cert.gate.coefficients},
                   {"nearest_integer", cert.gate.nearest_integer},
                   {"residual", cert.gate.max_deviation}};
  j["detT"] = cert.gate.determinant;
  j["gate"] = {{"verdict", cert.gate.pass ? "pass" : "fail"},
               {"unit_constant_term", cert.gate.unit_constant_term}};
  j["d1_suite"] = {{"scalar", cert.d1_suite.scalar_abs},
                   {"nabla_weyl", cert.d1_suite.nabla_weyl},
                   {"harmonic", cert.d1_suite.harmonic},
                   {"semisymmetry", cert.d1_suite.semisym},
                   {"ricci_recurrence", cert.d1_suite.ricci_recurrence},
                   {"max_ricci_rank", cert.d1_suite.max_ricci_rank},
                   {"olszak_dim", cert.d1_suite.olszak_dim_max},
                   {"weyl_min", cert.d1_suite.weyl_min_over_grid}};
  j["dichotomy"] = cert.dichotomy;
  j["isometry_residuals"] = cert.isometry_residuals;
  j["group_law_residual"] = cert.group_law_residual;
  j["gate_scope"] =
      "translation-operator integrality and unit determinant only; "
      "construction of an invariant lattice and the remaining quotient "
      "conditions are out of scope";
  j["verdict"] = cert.pass ? "pass" : "fail";
  j["failures"] = cert.failures;
  return j;
}

}  // namespace ecs::lattice
