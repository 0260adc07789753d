#ifndef DUALHOM_CELL_HPP
#define DUALHOM_CELL_HPP

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dualhom/coefficient.hpp"
#include "dualhom/common.hpp"

namespace dualhom {

// Uniform periodic grid on the unit cell Y = [0,1)^d with n cells per
// dimension and n^d nodes (periodic identification).
struct UnitCellGrid {
  int dim = 1;
  int n = 4;

  UnitCellGrid() = default;
  UnitCellGrid(int dim_, int n_);

  double h() const { return 1.0 / n; }
  std::size_t node_count() const {
    std::size_t c = static_cast<std::size_t>(n);
    return dim == 1 ? c : c * n;
  }
  std::size_t element_count() const { return node_count(); }

  std::size_t node_index(std::array<int, 2> mi) const {
    const int i0 = wrap(mi[0]);
    if (dim == 1) return static_cast<std::size_t>(i0);
    return static_cast<std::size_t>(i0) + static_cast<std::size_t>(n) * wrap(mi[1]);
  }
  std::array<int, 2> node_multi(std::size_t idx) const {
    if (dim == 1) return {static_cast<int>(idx), 0};
    return {static_cast<int>(idx % n), static_cast<int>(idx / n)};
  }
  int wrap(int i) const {
    int r = i % n;
    return r < 0 ? r + n : r;
  }
  Vec2 node_coords(std::size_t idx) const {
    const auto mi = node_multi(idx);
    return {mi[0] * h(), dim > 1 ? mi[1] * h() : 0.0};
  }

  int corners() const { return dim == 1 ? 2 : 4; }
  int quad_points() const { return corners(); }
  int stencil_size() const { return dim == 1 ? 3 : 9; }
};

// Quadrature point of a cell element; coefficients may be sampled either
// through the physical coordinate y or, for lattice-shift reasoning, through
// the (element, local point) pair.
struct CellQuadPoint {
  std::array<int, 2> elem{0, 0};
  int q = 0;
  Vec2 y{0.0, 0.0};
};

using CellFn = std::function<double(const CellQuadPoint&)>;

inline CellFn cell_fn(std::function<double(const Vec2&)> f) {
  return [f = std::move(f)](const CellQuadPoint& qp) { return f(qp.y); };
}

// y coordinate of local quadrature point q in element e (2-point tensor
// Gauss). Deterministic: all assembly paths share these exact values.
Vec2 cell_quad_coords(const UnitCellGrid& grid, std::array<int, 2> elem, int q);
double cell_quad_weight(const UnitCellGrid& grid);

// Nodal field on the unit cell.
struct CellField {
  UnitCellGrid grid;
  std::vector<double> values;

  CellField() = default;
  explicit CellField(const UnitCellGrid& g) : grid(g), values(g.node_count(), 0.0) {}

  double mean() const;  // nodal-quadrature mean (uniform weights), exact sum
  void make_zero_mean();
};

// Symmetric positive semidefinite periodic operator stored as a fixed-order
// stencil: per node, 3^d neighbor offsets in lexicographic order. The fixed
// offset order keeps matrix application invariant under lattice translation.
class PeriodicStencilMatrix {
 public:
  explicit PeriodicStencilMatrix(const UnitCellGrid& grid);

  void apply(std::span<const double> x, std::span<double> y) const;
  double& at(std::size_t node, int slot) { return a_[node * stencil_ + slot]; }
  double at(std::size_t node, int slot) const { return a_[node * stencil_ + slot]; }
  double diagonal(std::size_t node) const { return at(node, diag_slot_); }

  const UnitCellGrid& grid() const { return grid_; }
  int stencil_size() const { return stencil_; }
  std::array<int, 2> offset(int slot) const;
  int slot_of(std::array<int, 2> off) const;

  double max_asymmetry() const;
  double max_row_sum() const;

 private:
  UnitCellGrid grid_;
  int stencil_ = 3;
  int diag_slot_ = 1;
  std::vector<double> a_;
};

// Multilinear periodic stiffness operator for coefficient kappa, assembled
// node by node so that equal elements produce bitwise-equal contributions
// regardless of position.
PeriodicStencilMatrix assemble_periodic_operator(const CellFn& kappa, const UnitCellGrid& grid,
                                                 double coercivity_min = 0.0);

struct CgResult {
  bool converged = false;
  long iterations = 0;
  double rel_residual = 0.0;
  std::vector<double> history;
};

// Conjugate gradients with diagonal preconditioning on the zero-mean
// subspace (constant-vector deflation). All reductions are exact and hence
// independent of node ordering.
CgResult deflated_pcg(const PeriodicStencilMatrix& A, std::span<const double> b,
                      std::vector<double>& x, double tol_rel, long max_iterations);

struct CellSolveOptions {
  double tol_lin = 1e-10;
  double tol_mean = 1e-10;
  long max_iterations = 0;  // 0 -> 10 * n^d
};

// Corrector N^i for unit macroscopic gradient e^i: weak form
// (kappa grad N, grad phi) = -(kappa e^i, grad phi), zero-mean solution.
CellField solve_corrector_n(const CellFn& kappa, int direction, const UnitCellGrid& grid,
                            const CellSolveOptions& opts = {}, CgResult* stats = nullptr);
CellField solve_corrector_n(const PeriodicStencilMatrix& A, const CellFn& kappa, int direction,
                            const CellSolveOptions& opts = {}, CgResult* stats = nullptr);

// Exchange corrector M: (kappa grad M, grad phi) = (Q, phi); requires the
// cell mean of Q to vanish (within tol_mean), otherwise refuses.
CellField solve_exchange_m(const CellFn& kappa, const CellFn& exchange, const UnitCellGrid& grid,
                           const CellSolveOptions& opts = {}, CgResult* stats = nullptr);
CellField solve_exchange_m(const PeriodicStencilMatrix& A, const CellFn& exchange,
                           const CellSolveOptions& opts = {}, CgResult* stats = nullptr);

// Periodic vector potential with div_y = Q: solves the Poisson problem
// (grad chi, grad phi) = -(Q, phi) and returns the recovered gradient of chi
// as nodal component fields.
std::array<CellField, 2> compute_vector_potential(const CellFn& exchange,
                                                  const UnitCellGrid& grid,
                                                  const CellSolveOptions& opts = {},
                                                  CgResult* stats = nullptr);

// Gradient of the finite element interpolant inside element `elem` at local
// coordinate xi in [0,1]^d.
Vec2 element_gradient(const CellField& f, std::array<int, 2> elem, const Vec2& xi);

// Nodal gradient recovered by averaging adjacent element gradients at each
// node; second-order accurate on the uniform grid.
std::array<std::vector<double>, 2> recovered_gradient(const CellField& f);

// Periodic multilinear interpolation of nodal data at y.
double interp_periodic(const UnitCellGrid& grid, std::span<const double> nodal, const Vec2& y);

// All cell solutions at one frozen macro point.
struct CellSolutionSet {
  UnitCellGrid grid;
  Vec2 macro_point{0.0, 0.0};
  std::array<std::vector<CellField>, 2> corrector_n;  // [continuum][direction]
  std::array<CellField, 2> exchange_m;
  double max_rel_residual = 0.0;
  long total_iterations = 0;
};

CellSolutionSet solve_cell_problems(const ProblemData& data, const Vec2& macro_point,
                                    const UnitCellGrid& grid, const CellSolveOptions& opts = {});

// Exports: CSV (node coordinates + one column per field) and a compact
// binary dump (header u32 dim, u32 n, u32 field count; payload row-major
// 64-bit floats per field).
void write_cell_csv(const std::string& path, const UnitCellGrid& grid,
                    const std::vector<const CellField*>& fields,
                    const std::vector<std::string>& names);
void write_cell_binary(const std::string& path, const UnitCellGrid& grid,
                       const std::vector<const CellField*>& fields);
std::vector<CellField> read_cell_binary(const std::string& path, UnitCellGrid* grid_out = nullptr);

}  // namespace dualhom

#endif
