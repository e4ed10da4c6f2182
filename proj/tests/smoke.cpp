#include <cstdio>
#include "ecskit/d1family.hpp"
#include "ecskit/olszak.hpp"

using namespace ecs;

int main() {
  d1::D1Data d;
  d.n = 4;
  d.f = d1::ProfileFunction::sine();
  d.gram = Eigen::Matrix2d::Identity();
  d.A = Eigen::Vector2d(1.0, -1.0).asDiagonal();
  auto viol = d1::validate(d);
  for (auto& v : viol) std::printf("violation: %s\n", v.c_str());
  MetricField field = d1::build_metric(d);
  ToleranceProfile prof = d1::default_profile(d, 3, 0.8);
  std::printf("grid size %zu\n", prof.grid.size());

  ChartPoint x(4);
  x << 0.3, 0.0, 1.0, 2.0;
  auto g = field.eval(x);
  std::printf("g_tt = %.12f (expect %.12f)\n", g(0,0), 5*std::sin(0.3)-3);

  auto pack = chartcalc::curvature_pack(field, x, prof);
  std::printf("scalar = %.3e\n", pack.scalar);
  std::printf("|W| = %.6f\n", pack.weyl_down.max_abs());
  std::printf("|nabla W| = %.3e\n", pack.nabla_weyl.max_abs());
  std::printf("|nabla R| = %.3e\n", pack.nabla_riem.max_abs());
  std::printf("bianchi = %.3e\n", chartcalc::first_bianchi_residual(pack.riem_down));
  std::printf("weyl traces = %.3e\n", chartcalc::weyl_trace_residual(pack.weyl_down, pack.g_inv));
  std::printf("pair sym = %.3e\n", chartcalc::pair_symmetry_residual(pack.riem_down));
  std::printf("harmonic = %.3e\n", chartcalc::harmonic_residual_at(pack));
  std::printf("ricci rank = %d\n", chartcalc::ricci_rank(pack, 1e-7));
  std::printf("ricci rec = %.3e\n", chartcalc::ricci_recurrence_residual_at(pack));

  auto fiber = olszak::olszak_fiber(pack, pack.g, 1e-7);
  std::printf("olszak dim = %d nullity = %.3e\n", fiber.dim, fiber.nullity_residual);
  auto wit = olszak::rank_one_weyl_witness(pack, pack.g, 1e-7);
  std::printf("witness: %s\n", wit ? "present" : "absent");

  auto rep = d1::run_suite(d, prof);
  std::printf("suite: s=%.2e nW=%.2e harm=%.2e semi=%.2e rec=%.2e rank<=%d d=[%d,%d] |W|min=%.3f\n",
              rep.scalar_abs, rep.nabla_weyl, rep.harmonic, rep.semisym,
              rep.ricci_recurrence, rep.max_ricci_rank, rep.olszak_dim_min,
              rep.olszak_dim_max, rep.weyl_min_over_grid);
  return 0;
}
