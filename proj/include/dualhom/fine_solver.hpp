#ifndef DUALHOM_FINE_SOLVER_HPP
#define DUALHOM_FINE_SOLVER_HPP

#include "dualhom/block_system.hpp"
#include "dualhom/coefficient.hpp"

namespace dualhom {

// Resolved-scale run description. The mesh must satisfy h <= epsilon/rho in
// every direction (refused otherwise, not warned).
struct FineRunSpec {
  double epsilon = 0.125;
  int rho = 16;
  TimeGrid tgrid;
  std::array<int, 2> mesh_cells{0, 0};  // 0 -> smallest mesh satisfying the rule
};

MacroMesh fine_mesh(const ProblemData& data, const FineRunSpec& spec);

// Two-scale operator with coefficients evaluated at (x, frac(x/eps)) by
// exact argument reduction; the (1/eps) exchange enters the time-step matrix
// as a mass-type coupling. Element coupling blocks that vanish identically
// are skipped, so Q == 0 decouples the fields structurally.
TwoFieldOperator assemble_fine_operator(const ProblemData& data, double epsilon,
                                        const MacroMesh& mesh);

// Implicit-Euler Galerkin solve of the original dual-continuum system at
// resolved epsilon. When the operator is decoupled each field advances by
// the same single-field stepper a reference solver uses.
TransientField solve_fine(const ProblemData& data, const FineRunSpec& spec,
                          const TransientOptions& opts = {}, RunStats* stats = nullptr);

// y = frac(x/eps) componentwise; shared by the solver and the corrector so
// cell lookups see identical arguments.
Vec2 fine_cell_coordinate(const Vec2& x, double epsilon, int dim);

}  // namespace dualhom

#endif
