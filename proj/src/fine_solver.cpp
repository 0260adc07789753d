#include "dualhom/fine_solver.hpp"

#include <cmath>

namespace dualhom {

Vec2 fine_cell_coordinate(const Vec2& x, double epsilon, int dim) {
  Vec2 y{0.0, 0.0};
  for (int i = 0; i < dim; ++i) y[i] = frac01(x[i] / epsilon);
  return y;
}

MacroMesh fine_mesh(const ProblemData& data, const FineRunSpec& spec) {
  if (!(spec.epsilon > 0.0 && spec.epsilon < 1.0)) {
    throw ConfigError("epsilon must lie in (0,1)");
  }
  if (spec.rho < 2) throw ConfigError("resolution factor rho must be >= 2");
  const double target_h = spec.epsilon / spec.rho;
  std::array<int, 2> cells{2, 2};
  for (int i = 0; i < data.dim; ++i) {
    if (target_h > data.domain.extent(i)) {
      throw ConfigError("resolution rule h = eps/rho exceeds the domain extent");
    }
    if (spec.mesh_cells[i] > 0) {
      cells[i] = spec.mesh_cells[i];
    } else {
      cells[i] = static_cast<int>(std::ceil(data.domain.extent(i) / target_h - 1e-9));
    }
  }
  MacroMesh mesh(data.domain, cells);
  for (int i = 0; i < data.dim; ++i) {
    if (mesh.h(i) > target_h * (1.0 + 1e-12)) {
      throw ConfigError("mesh does not resolve epsilon: h = " + format_double(mesh.h(i)) +
                        " > eps/rho = " + format_double(target_h));
    }
  }
  return mesh;
}

TwoFieldOperator assemble_fine_operator(const ProblemData& data, double epsilon,
                                        const MacroMesh& mesh) {
  const double inv_eps = 1.0 / epsilon;
  TwoFieldSampler sampler = [&data, epsilon, inv_eps](std::size_t /*elem*/, int /*q*/,
                                                      const Vec2& x, TwoFieldQuadData& out) {
    const Vec2 y = fine_cell_coordinate(x, epsilon, data.dim);
    const double qv = data.exchange.eval_xy(x, y) * inv_eps;
    for (int k = 0; k < 2; ++k) {
      out.f[k].mass = data.capacity[k].eval_xy(x, y);
      out.f[k].diffusion = Mat2{};
      const double kv = data.kappa[k].eval_xy(x, y);
      out.f[k].diffusion[0][0] = kv;
      out.f[k].diffusion[1][1] = kv;
      out.f[k].convection = {0.0, 0.0};
      out.f[k].drift = {0.0, 0.0};
      out.f[k].gamma = qv;
    }
  };
  return assemble_two_field(mesh, sampler, /*peclet_limit=*/0.0);
}

TransientField solve_fine(const ProblemData& data, const FineRunSpec& spec,
                          const TransientOptions& opts, RunStats* stats) {
  if (opts.scheme != TimeScheme::ImplicitEuler) {
    throw ConfigError("the fine-scale solver uses implicit Euler");
  }
  require_valid(data);
  MacroMesh mesh = fine_mesh(data, spec);
  TwoFieldOperator op = assemble_fine_operator(data, spec.epsilon, mesh);
  const SourceFn q = [&data](double t, const Vec2& x) { return data.source.eval(t, x, {0, 0}); };
  const SpatialFn g1 = [&data](const Vec2& x) { return data.initial[0].eval(0.0, x, {0, 0}); };
  const SpatialFn g2 = [&data](const Vec2& x) { return data.initial[1].eval(0.0, x, {0, 0}); };
  return run_transient(op, SourcePair::same(q), g1, g2, spec.tgrid, opts,
                       /*force_monolithic=*/false, stats);
}

}  // namespace dualhom
