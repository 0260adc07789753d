#ifndef DUALHOM_EFFECTIVE_HPP
#define DUALHOM_EFFECTIVE_HPP

#include <string>
#include <vector>

#include "dualhom/cell.hpp"
#include "dualhom/mesh.hpp"

namespace dualhom {

// All homogenized coefficients at one macro point:
//   kappa_star[k] : homogenized diffusion tensors
//   convection[k] : b_k = int_Y kappa_k grad_y M_k dy
//   drift[k]      : a_k with components int_Y Q N^i_k dy
//   beta          : int_Y Q (M_1 + M_2) dy, enters the system as -beta
//   capacity_bar  : cell averages of C_kk
struct EffectivePointData {
  Vec2 macro_point{0.0, 0.0};
  std::array<double, 2> capacity_bar{1.0, 1.0};
  std::array<Mat2, 2> kappa_star{};
  std::array<Vec2, 2> convection{};
  std::array<Vec2, 2> drift{};
  double beta = 0.0;
};

// Recorded per-point invariant diagnostics.
struct EffectivePointChecks {
  double symmetry_defect = 0.0;                 // relative
  std::array<double, 2> lambda_min{0.0, 0.0};   // smallest eigenvalue per continuum
  std::array<double, 2> lambda_max{0.0, 0.0};
  std::array<double, 2> harmonic_mean{0.0, 0.0};
  std::array<double, 2> arithmetic_mean{0.0, 0.0};
  bool spd = false;
  bool voigt_reuss = false;
  bool beta_nonnegative = false;
  bool ok() const { return spd && voigt_reuss && beta_nonnegative; }
};

double cell_average(const CellFn& f, const UnitCellGrid& grid);

Mat2 assemble_kappa_star(const CellFn& kappa, const std::vector<CellField>& corrector_n);
Vec2 assemble_convection(const CellFn& kappa, const CellField& exchange_m);
Vec2 assemble_drift(const CellFn& exchange, const std::vector<CellField>& corrector_n);
double assemble_exchange(const CellFn& exchange, const CellField& m1, const CellField& m2);

EffectivePointData assemble_effective_point(const ProblemData& data,
                                            const CellSolutionSet& cells);
EffectivePointChecks check_effective_point(const ProblemData& data,
                                           const EffectivePointData& point,
                                           const UnitCellGrid& grid);
double symmetric_eigen_min(const Mat2& m, int dim);
double symmetric_eigen_max(const Mat2& m, int dim);

// Effective coefficients over the macro domain. Three sampling modes:
//   Uniform     one point reused everywhere (x-independent cell data)
//   Quadrature  cell problems solved at every quadrature point of a macro
//               mesh (default; the macro solver consumes it directly)
//   Lattice     coarse x-lattice, multilinearly interpolated
class EffectiveField {
 public:
  enum class Mode { Uniform, Quadrature, Lattice };

  static EffectiveField uniform(EffectivePointData point, Box domain);
  static EffectiveField quadrature(const MacroMesh& mesh, std::vector<EffectivePointData> data);
  static EffectiveField lattice(Box domain, std::array<int, 2> counts,
                                std::vector<EffectivePointData> data);

  Mode mode() const { return mode_; }
  const Box& domain() const { return domain_; }
  bool matches_mesh(const MacroMesh& mesh) const;
  // Fast path for assembly on the mesh the field was built for.
  const EffectivePointData& at_quadrature(std::size_t elem, int q) const;
  // Multilinear evaluation (Uniform/Lattice); refuses in Quadrature mode.
  EffectivePointData sample(const Vec2& x) const;
  EffectivePointData at(const MacroMesh& mesh, std::size_t elem, int q) const;

  const std::vector<EffectivePointData>& points() const { return data_; }
  const std::vector<EffectivePointChecks>& checks() const { return checks_; }
  void set_checks(std::vector<EffectivePointChecks> c) { checks_ = std::move(c); }

  void save_json(const std::string& path) const;
  static EffectiveField load_json(const std::string& path);

 private:
  Mode mode_ = Mode::Uniform;
  Box domain_;
  MacroMesh mesh_;  // Quadrature mode
  std::array<int, 2> lattice_n_{1, 1};
  std::vector<EffectivePointData> data_;
  std::vector<EffectivePointChecks> checks_;
};

struct EffectiveBuildOptions {
  CellSolveOptions cell;
  int jobs = 1;
  bool record_checks = true;
  // refuse on indefinite kappa_star; other check failures are recorded only
  bool require_spd = true;
};

// Cell problems and coefficient assembly at every quadrature point of the
// mesh (or a single point when the cell data does not depend on x).
EffectiveField build_effective_field(const ProblemData& data, const MacroMesh& mesh,
                                     const UnitCellGrid& grid,
                                     const EffectiveBuildOptions& opts = {});
EffectiveField build_effective_field_lattice(const ProblemData& data,
                                             std::array<int, 2> lattice_counts,
                                             const UnitCellGrid& grid,
                                             const EffectiveBuildOptions& opts = {});

}  // namespace dualhom

#endif
