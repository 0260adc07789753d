#include "dualhom/macro_solver.hpp"

namespace dualhom {

TwoFieldOperator assemble_macro_operator(const EffectiveField& eff, const MacroMesh& mesh,
                                         double peclet_limit) {
  TwoFieldSampler sampler = [&eff, &mesh](std::size_t elem, int q, const Vec2& /*x*/,
                                          TwoFieldQuadData& out) {
    const EffectivePointData p = eff.at(mesh, elem, q);
    for (int k = 0; k < 2; ++k) {
      out.f[k].mass = p.capacity_bar[k];
      out.f[k].diffusion = p.kappa_star[k];
      out.f[k].convection = p.convection[k];
      out.f[k].drift = p.drift[k];
      out.f[k].gamma = -p.beta;
    }
  };
  return assemble_two_field(mesh, sampler, peclet_limit);
}

TransientField solve_homogenized(const EffectiveField& eff, const SourcePair& source,
                                 const SpatialFn& g1, const SpatialFn& g2, const MacroMesh& mesh,
                                 const TimeGrid& tgrid, const MacroSolveOptions& opts,
                                 RunStats* stats) {
  TwoFieldOperator op = assemble_macro_operator(eff, mesh, opts.peclet_limit);
  return run_transient(op, source, g1, g2, tgrid, opts.transient, /*force_monolithic=*/true,
                       stats);
}

}  // namespace dualhom
