#ifndef DUALHOM_MACRO_SOLVER_HPP
#define DUALHOM_MACRO_SOLVER_HPP

#include "dualhom/block_system.hpp"
#include "dualhom/effective.hpp"

namespace dualhom {

struct MacroSolveOptions {
  TransientOptions transient;
  // plain Galerkin refuses convection-dominated meshes instead of stabilizing
  double peclet_limit = 2.0;
};

// Spatial operator of the homogenized dual-continuum system: diffusion by
// kappa*, divergence-form convection b_k integrated by parts onto the test
// function, drift a_k, and the interaction coefficient -beta.
TwoFieldOperator assemble_macro_operator(const EffectiveField& eff, const MacroMesh& mesh,
                                         double peclet_limit = 2.0);

// Galerkin-in-space theta-scheme solve of the homogenized system with zero
// Dirichlet data. The coupled two-field step is always one monolithic block
// solve.
TransientField solve_homogenized(const EffectiveField& eff, const SourcePair& source,
                                 const SpatialFn& g1, const SpatialFn& g2, const MacroMesh& mesh,
                                 const TimeGrid& tgrid, const MacroSolveOptions& opts = {},
                                 RunStats* stats = nullptr);

}  // namespace dualhom

#endif
