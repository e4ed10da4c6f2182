#include "ecskit/d1family.hpp"

#include <cmath>
#include <sstream>

#include "ecskit/olszak.hpp"

namespace ecs::d1 {

namespace {

// Coordinates are ordered (t, s, v^1, ..., v^{n-2}).

double kappa(const D1Data& d, double t, const Eigen::VectorXd& v) {
  return d.f.f(t) * v.dot(d.gram * v) + v.dot(d.gram * d.A * v);
}

}  // namespace

std::vector<std::string> validate(const D1Data& data) {
  std::vector<std::string> out;
  const int m = data.n - 2;
  if (data.n < 4) out.push_back("n must be at least 4");
  if (data.gram.rows() != m || data.gram.cols() != m)
    out.push_back("gram must be (n-2) x (n-2)");
  if (data.A.rows() != m || data.A.cols() != m)
    out.push_back("A must be (n-2) x (n-2)");
  if (!out.empty()) return out;  // shape errors make the rest meaningless

  const double gs = data.gram.cwiseAbs().maxCoeff();
  if ((data.gram - data.gram.transpose()).cwiseAbs().maxCoeff() > 1e-12 * gs)
    out.push_back("gram is not symmetric");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(data.gram);
  if (!lu.isInvertible()) out.push_back("gram is not invertible");

  const double as = data.A.cwiseAbs().maxCoeff();
  if (as < 1e-12) out.push_back("A must be nonzero");
  if (std::abs(data.A.trace()) > 1e-10 * std::max(1.0, as))
    out.push_back("trace A != 0");
  const Eigen::MatrixXd sa = data.A.transpose() * data.gram - data.gram * data.A;
  if (sa.cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, as * gs))
    out.push_back("A is not self-adjoint w.r.t. gram (A^T gram != gram A)");

  if (data.period) {
    if (!(*data.period > 0.0)) {
      out.push_back("period must be positive");
    } else {
      double resid = 0.0;
      for (int i = 0; i < 16; ++i) {
        const double t = -1.0 + 2.0 * i / 15.0;
        resid = std::max(resid,
                         std::abs(data.f.f(t + *data.period) - data.f.f(t)));
      }
      if (resid > 1e-8) out.push_back("f is not periodic with the given period");
    }
  }
  if (data.interval && !(data.interval->first < data.interval->second))
    out.push_back("interval is empty");
  return out;
}

MetricField build_metric(const D1Data& data) {
  {
    auto violations = validate(data);
    if (!violations.empty()) {
      std::ostringstream os;
      os << "invalid D1Data:";
      for (const auto& v : violations) os << " [" << v << "]";
      throw invalid_input_error(os.str());
    }
  }
  const int n = data.n;
  const int m = n - 2;
  const Eigen::MatrixXd G = data.gram;
  const Eigen::MatrixXd GA = G * data.A;  // symmetric by self-adjointness
  const D1Data d = data;

  MetricField field;
  field.dim = n;
  const Signature gsig = matrix_signature(G);
  field.signature = Signature{gsig.plus + 1, gsig.minus + 1};

  field.eval = [d, G, GA, n, m](const ChartPoint& x) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    const double t = x[0];
    const Eigen::VectorXd v = x.segment(2, m);
    g(0, 0) = kappa(d, t, v);
    g(0, 1) = g(1, 0) = 0.5;  // symmetric product dt ds
    g.block(2, 2, m, m) = G;
    return g;
  };
  field.deriv1 = [d, G, GA, n, m](const ChartPoint& x) {
    std::vector<Eigen::MatrixXd> dg(n, Eigen::MatrixXd::Zero(n, n));
    const double t = x[0];
    const Eigen::VectorXd v = x.segment(2, m);
    dg[0](0, 0) = d.f.df(t) * v.dot(G * v);
    const Eigen::VectorXd grad = 2.0 * (d.f.f(t) * (G * v) + GA * v);
    for (int a = 0; a < m; ++a) dg[2 + a](0, 0) = grad[a];
    return dg;
  };
  field.deriv2 = [d, G, GA, n, m](const ChartPoint& x) {
    std::vector<std::vector<Eigen::MatrixXd>> dd(
        n, std::vector<Eigen::MatrixXd>(n));
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) dd[a][b] = Eigen::MatrixXd::Zero(n, n);
    const double t = x[0];
    const Eigen::VectorXd v = x.segment(2, m);
    dd[0][0](0, 0) = d.f.ddf(t) * v.dot(G * v);
    const Eigen::VectorXd dgrad = 2.0 * d.f.df(t) * (G * v);
    for (int a = 0; a < m; ++a) dd[0][2 + a](0, 0) = dgrad[a];
    for (int a = 0; a < m; ++a)
      for (int b = a; b < m; ++b)
        dd[2 + a][2 + b](0, 0) = 2.0 * (d.f.f(t) * G(a, b) + GA(a, b));
    return dd;
  };
  return field;
}

ToleranceProfile default_profile(const D1Data& data, int points_per_coord,
                                 double half_width) {
  ToleranceProfile prof;
  ChartPoint base = ChartPoint::Zero(data.n);
  if (data.interval) {
    base[0] = 0.5 * (data.interval->first + data.interval->second);
    half_width = std::min(
        half_width, 0.45 * (data.interval->second - data.interval->first));
  }
  base[0] += 0.1;  // keep t away from symmetric special points of fixtures
  prof.grid = tensor_grid(base, half_width, points_per_coord);
  return prof;
}

SymmetryVerdict local_symmetry_dichotomy(const D1Data& data,
                                         const ToleranceProfile& prof) {
  MetricField field = build_metric(data);
  const double resid = chartcalc::local_symmetry_residual(field, prof);

  double fmin = std::numeric_limits<double>::infinity(), fmax = -fmin;
  for (const auto& x : prof.grid) {
    const double v = data.f.f(x[0]);
    fmin = std::min(fmin, v);
    fmax = std::max(fmax, v);
  }
  const bool f_constant = (fmax - fmin) < 1e-9;
  const bool symmetric = resid < prof.tol_second;
  if (symmetric != f_constant) {
    std::ostringstream os;
    os << "local_symmetry_dichotomy: nabla-R residual " << resid
       << " disagrees with f variation " << (fmax - fmin);
    throw internal_consistency_error(os.str());
  }
  return symmetric ? SymmetryVerdict::Symmetric
                   : SymmetryVerdict::EssentiallyConformallySymmetric;
}

SuiteReport run_suite(const D1Data& data, const ToleranceProfile& prof,
                      ExecMode mode) {
  MetricField field = build_metric(data);
  struct Acc {
    SuiteReport r;
    bool first = true;
  };
  Acc init;
  init.r.olszak_dim_min = std::numeric_limits<int>::max();
  init.r.weyl_min_over_grid = std::numeric_limits<double>::infinity();
  auto per_point = [&](const ChartPoint& x) {
    chartcalc::CurvaturePack pack = chartcalc::curvature_pack(field, x, prof);
    Acc a;
    a.first = false;
    a.r.scalar_abs = std::abs(pack.scalar);
    a.r.nabla_weyl = pack.nabla_weyl.max_abs();
    a.r.harmonic = chartcalc::harmonic_residual_at(pack);
    a.r.ricci_recurrence = chartcalc::ricci_recurrence_residual_at(pack);
    chartcalc::CoreCurvature core;
    core.g = pack.g;
    core.g_inv = pack.g_inv;
    core.gamma = pack.gamma;
    core.riem_down = pack.riem_down;
    core.ricci = pack.ricci;
    core.scalar = pack.scalar;
    core.weyl_down = pack.weyl_down;
    a.r.semisym = chartcalc::semisymmetry_residual_at(core);
    const double rs = std::max(pack.ricci.cwiseAbs().maxCoeff(), 1.0);
    a.r.max_ricci_rank = chartcalc::ricci_rank(pack, 1e-7 * rs);
    a.r.weyl_min_over_grid = pack.weyl_down.max_abs();
    olszak::DistributionFiber fiber =
        olszak::olszak_fiber(pack, pack.g, 1e-7);
    a.r.olszak_dim_min = a.r.olszak_dim_max = fiber.dim;
    a.r.olszak_nullity = fiber.nullity_residual;
    auto witness = olszak::rank_one_weyl_witness(pack, pack.g, 1e-7);
    a.r.witness_everywhere_absent = !witness.has_value();
    return a;
  };
  auto merge = [](Acc a, const Acc& b) {
    if (b.first) return a;
    if (a.first) return b;
    a.r.scalar_abs = std::max(a.r.scalar_abs, b.r.scalar_abs);
    a.r.nabla_weyl = std::max(a.r.nabla_weyl, b.r.nabla_weyl);
    a.r.harmonic = std::max(a.r.harmonic, b.r.harmonic);
    a.r.semisym = std::max(a.r.semisym, b.r.semisym);
    a.r.ricci_recurrence = std::max(a.r.ricci_recurrence, b.r.ricci_recurrence);
    a.r.max_ricci_rank = std::max(a.r.max_ricci_rank, b.r.max_ricci_rank);
    a.r.weyl_min_over_grid =
        std::min(a.r.weyl_min_over_grid, b.r.weyl_min_over_grid);
    a.r.olszak_dim_min = std::min(a.r.olszak_dim_min, b.r.olszak_dim_min);
    a.r.olszak_dim_max = std::max(a.r.olszak_dim_max, b.r.olszak_dim_max);
    a.r.olszak_nullity = std::max(a.r.olszak_nullity, b.r.olszak_nullity);
    a.r.witness_everywhere_absent =
        a.r.witness_everywhere_absent && b.r.witness_everywhere_absent;
    return a;
  };
  Acc out = sweep_reduce(prof.grid, init, per_point, merge, mode);
  return out.r;
}

D1Data random_data(std::mt19937_64& rng, int n) {
  const int m = n - 2;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> mag(0.5, 2.0);
  std::uniform_int_distribution<int> coin(0, 1);

  // gram: Q diag(+-d) Q^T with random orthogonal Q and at least the declared
  // chance of mixed signature.
  Eigen::MatrixXd B(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) B(i, j) = unit(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
  Eigen::MatrixXd Q = qr.householderQ();
  Eigen::VectorXd diag(m);
  for (int i = 0; i < m; ++i) diag[i] = (coin(rng) ? 1.0 : -1.0) * mag(rng);
  Eigen::MatrixXd gram = Q * diag.asDiagonal() * Q.transpose();
  gram = 0.5 * (gram + gram.transpose());

  // A = gram^{-1} S with S symmetric gives a gram-self-adjoint operator;
  // subtract the trace part (which stays self-adjoint).
  D1Data d;
  d.n = n;
  d.gram = gram;
  while (true) {
    Eigen::MatrixXd S(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) S(i, j) = S(j, i) = unit(rng);
    Eigen::MatrixXd A = gram.partialPivLu().solve(S);
    A -= (A.trace() / double(m)) * Eigen::MatrixXd::Identity(m, m);
    if (A.cwiseAbs().maxCoeff() > 1e-6) {
      d.A = A;
      break;
    }
  }

  const double period = 2.0 * M_PI;
  std::vector<double> ac(3), as(3);
  for (int k = 0; k < 3; ++k) {
    ac[k] = unit(rng);
    as[k] = unit(rng);
  }
  d.f = ProfileFunction::from_series(TrigPoly(period, 0.0, ac, as));
  d.period = period;
  return d;
}

nlohmann::ordered_json to_json(const D1Data& data) {
  nlohmann::ordered_json j;
  j["n"] = data.n;
  if (!data.f.series)
    throw invalid_input_error("to_json: only trig-series profile functions serialize");
  const TrigPoly& s = *data.f.series;
  j["f"] = {{"family", "trig"},
            {"period", s.period()},
            {"mean", s.mean()},
            {"cos", s.cos_coeffs()},
            {"sin", s.sin_coeffs()}};
  if (data.period) j["period"] = *data.period;
  if (data.interval) j["interval"] = {data.interval->first, data.interval->second};
  auto mat = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row;
      for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
      rows.push_back(row);
    }
    return rows;
  };
  j["gram"] = mat(data.gram);
  j["A"] = mat(data.A);
  return j;
}

D1Data from_json(const nlohmann::ordered_json& j) {
  D1Data d;
  d.n = j.at("n").get<int>();
  const auto& jf = j.at("f");
  if (jf.at("family").get<std::string>() != "trig")
    throw invalid_input_error("from_json: unknown profile-function family");
  TrigPoly s(jf.at("period").get<double>(), jf.at("mean").get<double>(),
             jf.at("cos").get<std::vector<double>>(),
             jf.at("sin").get<std::vector<double>>());
  d.f = ProfileFunction::from_series(s);
  if (j.contains("period")) d.period = j.at("period").get<double>();
  if (j.contains("interval")) {
    auto iv = j.at("interval").get<std::vector<double>>();
    d.interval = {iv.at(0), iv.at(1)};
  }
  auto mat = [](const nlohmann::ordered_json& rows) {
    const int r = int(rows.size());
    const int c = r ? int(rows.at(0).size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int k = 0; k < c; ++k) m(i, k) = rows.at(i).at(k).get<double>();
    return m;
  };
  d.gram = mat(j.at("gram"));
  d.A = mat(j.at("A"));
  return d;
}

}  // namespace ecs::d1
