#include "dualhom/cell.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "dualhom/exact_sum.hpp"

namespace dualhom {

namespace {

// 2-point Gauss abscissae on [0,1].
constexpr double kGaussLo = 0.5 - 0.28867513459481288225;  // 0.5 - 1/(2 sqrt 3)
constexpr double kGaussHi = 0.5 + 0.28867513459481288225;

double gauss_xi(int bit) { return bit ? kGaussHi : kGaussLo; }

// Q1 shape value/derivative on [0,1].
double shape1(int corner_bit, double xi) { return corner_bit ? xi : 1.0 - xi; }
double dshape1(int corner_bit) { return corner_bit ? 1.0 : -1.0; }

}  // namespace

UnitCellGrid::UnitCellGrid(int dim_, int n_) : dim(dim_), n(n_) {
  if (dim < 1 || dim > 2) throw ConfigError("cell grid dimension must be 1 or 2");
  if (n < 4 || n % 2 != 0) throw ConfigError("cell grid size must be even and >= 4");
}

Vec2 cell_quad_coords(const UnitCellGrid& grid, std::array<int, 2> elem, int q) {
  const double h = grid.h();
  Vec2 y{0.0, 0.0};
  for (int i = 0; i < grid.dim; ++i) {
    const int bit = (q >> i) & 1;
    y[i] = (grid.wrap(elem[i]) + gauss_xi(bit)) * h;
  }
  return y;
}

double cell_quad_weight(const UnitCellGrid& grid) {
  const double h = grid.h();
  double w = h / 2.0;
  if (grid.dim > 1) w *= h / 2.0;
  return w;
}

double CellField::mean() const {
  return exact_sum(values) / static_cast<double>(values.size());
}

void CellField::make_zero_mean() {
  const double m = mean();
  for (double& v : values) v -= m;
}

PeriodicStencilMatrix::PeriodicStencilMatrix(const UnitCellGrid& grid)
    : grid_(grid),
      stencil_(grid.stencil_size()),
      diag_slot_(grid.dim == 1 ? 1 : 4),
      a_(grid.node_count() * grid.stencil_size(), 0.0) {}

std::array<int, 2> PeriodicStencilMatrix::offset(int slot) const {
  if (grid_.dim == 1) return {slot - 1, 0};
  return {slot % 3 - 1, slot / 3 - 1};
}

int PeriodicStencilMatrix::slot_of(std::array<int, 2> off) const {
  if (grid_.dim == 1) return off[0] + 1;
  return (off[0] + 1) + 3 * (off[1] + 1);
}

void PeriodicStencilMatrix::apply(std::span<const double> x, std::span<double> y) const {
  const std::size_t nodes = grid_.node_count();
  for (std::size_t v = 0; v < nodes; ++v) {
    const auto mi = grid_.node_multi(v);
    double acc = 0.0;
    for (int s = 0; s < stencil_; ++s) {
      const auto off = offset(s);
      const std::size_t col = grid_.node_index({mi[0] + off[0], mi[1] + off[1]});
      acc += at(v, s) * x[col];
    }
    y[v] = acc;
  }
}

double PeriodicStencilMatrix::max_asymmetry() const {
  const std::size_t nodes = grid_.node_count();
  double worst = 0.0;
  for (std::size_t v = 0; v < nodes; ++v) {
    const auto mi = grid_.node_multi(v);
    for (int s = 0; s < stencil_; ++s) {
      const auto off = offset(s);
      const std::size_t u = grid_.node_index({mi[0] + off[0], mi[1] + off[1]});
      const double mirror = at(u, slot_of({-off[0], -off[1]}));
      worst = std::max(worst, std::fabs(at(v, s) - mirror));
    }
  }
  return worst;
}

double PeriodicStencilMatrix::max_row_sum() const {
  const std::size_t nodes = grid_.node_count();
  double worst = 0.0;
  for (std::size_t v = 0; v < nodes; ++v) {
    double sum = 0.0;
    for (int s = 0; s < stencil_; ++s) sum += at(v, s);
    worst = std::max(worst, std::fabs(sum));
  }
  return worst;
}

namespace {

// Element stiffness for the element whose low corner is `low`, with the
// coefficient sampled at the 2^d tensor-Gauss points. Entries are computed
// once per unordered pair and mirrored, so the matrix is exactly symmetric.
void element_stiffness(const UnitCellGrid& grid, const CellFn& kappa, std::array<int, 2> low,
                       double coercivity_min, double ke[4][4]) {
  const int nc = grid.corners();
  const int nq = grid.quad_points();
  const double w = cell_quad_weight(grid);
  const double inv_h = static_cast<double>(grid.n);
  for (int a = 0; a < nc; ++a) {
    for (int b = 0; b < nc; ++b) ke[a][b] = 0.0;
  }
  for (int q = 0; q < nq; ++q) {
    CellQuadPoint qp;
    qp.elem = {grid.wrap(low[0]), grid.dim > 1 ? grid.wrap(low[1]) : 0};
    qp.q = q;
    qp.y = cell_quad_coords(grid, low, q);
    const double k = kappa(qp);
    if (!(k > coercivity_min)) {
      throw ConfigError("coefficient not coercive at cell quadrature point y=(" +
                        format_double(qp.y[0]) + "," + format_double(qp.y[1]) +
                        "): value " + format_double(k));
    }
    // physical gradients of the corner shape functions at this point
    double g[4][2];
    for (int a = 0; a < nc; ++a) {
      for (int i = 0; i < grid.dim; ++i) {
        double gi = dshape1((a >> i) & 1) * inv_h;
        for (int j = 0; j < grid.dim; ++j) {
          if (j == i) continue;
          gi *= shape1((a >> j) & 1, gauss_xi((q >> j) & 1));
        }
        g[a][i] = gi;
      }
    }
    for (int a = 0; a < nc; ++a) {
      for (int b = a; b < nc; ++b) {
        double dd = g[a][0] * g[b][0];
        if (grid.dim > 1) dd += g[a][1] * g[b][1];
        const double contrib = w * k * dd;
        ke[a][b] += contrib;
        if (b != a) ke[b][a] += contrib;
      }
    }
  }
}

std::array<int, 2> corner_offset(int corner, int dim) {
  return {corner & 1, dim > 1 ? (corner >> 1) & 1 : 0};
}

}  // namespace

PeriodicStencilMatrix assemble_periodic_operator(const CellFn& kappa, const UnitCellGrid& grid,
                                                 double coercivity_min) {
  PeriodicStencilMatrix A(grid);
  const std::size_t nodes = grid.node_count();
  const int nc = grid.corners();
  double ke[4][4];
  // Node-centred assembly: every node gathers contributions from its 2^d
  // adjacent elements in a fixed relative order, which keeps the stored
  // values and their rounding independent of the node's absolute position.
  for (std::size_t v = 0; v < nodes; ++v) {
    const auto mi = grid.node_multi(v);
    for (int adj = 0; adj < nc; ++adj) {
      const auto rel = corner_offset(adj, grid.dim);  // node's corner within element
      const std::array<int, 2> low = {mi[0] - rel[0], mi[1] - rel[1]};
      element_stiffness(grid, kappa, low, coercivity_min, ke);
      const int a = adj;
      for (int b = 0; b < nc; ++b) {
        const auto cb = corner_offset(b, grid.dim);
        const std::array<int, 2> off = {cb[0] - rel[0], cb[1] - rel[1]};
        A.at(v, A.slot_of(off)) += ke[a][b];
      }
    }
  }
  return A;
}

namespace {

double exact_mean(std::span<const double> v) {
  return exact_sum(v) / static_cast<double>(v.size());
}

void subtract_mean(std::vector<double>& v) {
  const double m = exact_mean(v);
  for (double& x : v) x -= m;
}

}  // namespace

CgResult deflated_pcg(const PeriodicStencilMatrix& A, std::span<const double> b,
                      std::vector<double>& x, double tol_rel, long max_iterations) {
  const std::size_t n = b.size();
  CgResult res;
  x.assign(n, 0.0);

  std::vector<double> r(b.begin(), b.end());
  subtract_mean(r);
  const double bnorm = std::sqrt(exact_dot(r, r));
  if (bnorm == 0.0) {
    res.converged = true;
    res.rel_residual = 0.0;
    return res;
  }

  std::vector<double> invd(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = A.diagonal(i);
    invd[i] = (d > 0.0) ? 1.0 / d : 1.0;
  }

  std::vector<double> z(n), p(n), Ap(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] * invd[i];
  p = z;
  double rz = exact_dot(r, z);

  for (long it = 0; it < max_iterations; ++it) {
    A.apply(p, Ap);
    const double pAp = exact_dot(p, Ap);
    if (!(pAp > 0.0)) {
      res.converged = false;
      res.iterations = it;
      res.rel_residual = std::sqrt(exact_dot(r, r)) / bnorm;
      return res;
    }
    const double alpha = rz / pAp;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    subtract_mean(r);  // keep the iteration in the zero-mean subspace
    const double rnorm = std::sqrt(exact_dot(r, r));
    res.history.push_back(rnorm / bnorm);
    if (rnorm <= tol_rel * bnorm) {
      res.converged = true;
      res.iterations = it + 1;
      res.rel_residual = rnorm / bnorm;
      subtract_mean(x);
      return res;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] * invd[i];
    const double rz_next = exact_dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  res.converged = false;
  res.iterations = max_iterations;
  res.rel_residual = std::sqrt(exact_dot(r, r)) / bnorm;
  return res;
}

namespace {

long default_max_iter(const UnitCellGrid& grid, const CellSolveOptions& opts) {
  if (opts.max_iterations > 0) return opts.max_iterations;
  return 10 * static_cast<long>(grid.node_count());
}

// Load vector assembled node by node (same ordering discipline as the
// operator): rhs[v] = sum over adjacent elements of the weighted integrand.
// mode 0: (Q, phi_v); mode 1: -(kappa e_i, grad phi_v).
std::vector<double> assemble_load(const UnitCellGrid& grid, const CellFn& f, int mode,
                                  int direction) {
  const std::size_t nodes = grid.node_count();
  const int nc = grid.corners();
  const int nq = grid.quad_points();
  const double w = cell_quad_weight(grid);
  const double inv_h = static_cast<double>(grid.n);
  std::vector<double> rhs(nodes, 0.0);
  for (std::size_t v = 0; v < nodes; ++v) {
    const auto mi = grid.node_multi(v);
    double acc = 0.0;
    for (int adj = 0; adj < nc; ++adj) {
      const auto rel = corner_offset(adj, grid.dim);
      const std::array<int, 2> low = {mi[0] - rel[0], mi[1] - rel[1]};
      for (int q = 0; q < nq; ++q) {
        CellQuadPoint qp;
        qp.elem = {grid.wrap(low[0]), grid.dim > 1 ? grid.wrap(low[1]) : 0};
        qp.q = q;
        qp.y = cell_quad_coords(grid, low, q);
        const double fv = f(qp);
        if (mode == 0) {
          double phi = 1.0;
          for (int i = 0; i < grid.dim; ++i) {
            phi *= shape1((adj >> i) & 1, gauss_xi((q >> i) & 1));
          }
          acc += w * fv * phi;
        } else {
          double gi = dshape1((adj >> direction) & 1) * inv_h;
          for (int j = 0; j < grid.dim; ++j) {
            if (j == direction) continue;
            gi *= shape1((adj >> j) & 1, gauss_xi((q >> j) & 1));
          }
          acc -= w * fv * gi;
        }
      }
    }
    rhs[v] = acc;
  }
  return rhs;
}

CellField run_solve(const PeriodicStencilMatrix& A, std::vector<double> rhs,
                    const CellSolveOptions& opts, CgResult* stats, const char* what) {
  CellField out(A.grid());
  CgResult cg = deflated_pcg(A, rhs, out.values, opts.tol_lin, default_max_iter(A.grid(), opts));
  if (!cg.converged) {
    std::string hist;
    const std::size_t tail = cg.history.size() > 5 ? cg.history.size() - 5 : 0;
    for (std::size_t i = tail; i < cg.history.size(); ++i) {
      hist += " " + format_double(cg.history[i]);
    }
    throw SolveError(std::string(what) + ": CG failed to converge after " +
                     std::to_string(cg.iterations) + " iterations, relative residual " +
                     format_double(cg.rel_residual) + ", tail history:" + hist);
  }
  out.make_zero_mean();
  if (stats) *stats = std::move(cg);
  return out;
}

}  // namespace

CellField solve_corrector_n(const PeriodicStencilMatrix& A, const CellFn& kappa, int direction,
                            const CellSolveOptions& opts, CgResult* stats) {
  if (direction < 0 || direction >= A.grid().dim) {
    throw ConfigError("corrector direction out of range");
  }
  return run_solve(A, assemble_load(A.grid(), kappa, 1, direction), opts, stats, "corrector N");
}

CellField solve_corrector_n(const CellFn& kappa, int direction, const UnitCellGrid& grid,
                            const CellSolveOptions& opts, CgResult* stats) {
  PeriodicStencilMatrix A = assemble_periodic_operator(kappa, grid);
  return solve_corrector_n(A, kappa, direction, opts, stats);
}

CellField solve_exchange_m(const PeriodicStencilMatrix& A, const CellFn& exchange,
                           const CellSolveOptions& opts, CgResult* stats) {
  std::vector<double> rhs = assemble_load(A.grid(), exchange, 0, 0);
  // Solvability: sum of the load is the quadrature cell mean of Q.
  const double mean = exact_sum(rhs);
  if (std::fabs(mean) > opts.tol_mean) {
    throw ConfigError("exchange coefficient has nonzero cell mean " + format_double(mean) +
                      "; the cell problem for M is unsolvable");
  }
  return run_solve(A, std::move(rhs), opts, stats, "exchange M");
}

CellField solve_exchange_m(const CellFn& kappa, const CellFn& exchange, const UnitCellGrid& grid,
                           const CellSolveOptions& opts, CgResult* stats) {
  PeriodicStencilMatrix A = assemble_periodic_operator(kappa, grid);
  return solve_exchange_m(A, exchange, opts, stats);
}

std::array<CellField, 2> compute_vector_potential(const CellFn& exchange,
                                                  const UnitCellGrid& grid,
                                                  const CellSolveOptions& opts, CgResult* stats) {
  const CellFn unit = cell_fn([](const Vec2&) { return 1.0; });
  PeriodicStencilMatrix A = assemble_periodic_operator(unit, grid);
  std::vector<double> rhs = assemble_load(grid, exchange, 0, 0);
  const double mean = exact_sum(rhs);
  if (std::fabs(mean) > opts.tol_mean) {
    throw ConfigError("exchange coefficient has nonzero cell mean " + format_double(mean) +
                      "; no periodic vector potential exists");
  }
  // chi solves (grad chi, grad phi) = -(Q, phi), i.e. laplace chi = Q.
  for (double& v : rhs) v = -v;
  CellField chi = run_solve(A, std::move(rhs), opts, stats, "vector potential");
  auto grad = recovered_gradient(chi);
  std::array<CellField, 2> out{CellField(grid), CellField(grid)};
  for (int i = 0; i < grid.dim; ++i) {
    out[i].values = std::move(grad[i]);
    out[i].make_zero_mean();
  }
  return out;
}

Vec2 element_gradient(const CellField& f, std::array<int, 2> elem, const Vec2& xi) {
  const UnitCellGrid& grid = f.grid;
  const int nc = grid.corners();
  const double inv_h = static_cast<double>(grid.n);
  Vec2 g{0.0, 0.0};
  for (int a = 0; a < nc; ++a) {
    const std::size_t idx = grid.node_index({elem[0] + (a & 1), elem[1] + ((a >> 1) & 1)});
    const double v = f.values[idx];
    for (int i = 0; i < grid.dim; ++i) {
      double gi = dshape1((a >> i) & 1) * inv_h;
      for (int j = 0; j < grid.dim; ++j) {
        if (j == i) continue;
        gi *= shape1((a >> j) & 1, xi[j]);
      }
      g[i] += v * gi;
    }
  }
  return g;
}

std::array<std::vector<double>, 2> recovered_gradient(const CellField& f) {
  const UnitCellGrid& grid = f.grid;
  const std::size_t nodes = grid.node_count();
  const int nc = grid.corners();
  std::array<std::vector<double>, 2> out;
  for (int i = 0; i < grid.dim; ++i) out[i].assign(nodes, 0.0);
  const double scale = 1.0 / nc;
  for (std::size_t v = 0; v < nodes; ++v) {
    const auto mi = grid.node_multi(v);
    Vec2 acc{0.0, 0.0};
    for (int adj = 0; adj < nc; ++adj) {
      const auto rel = corner_offset(adj, grid.dim);
      const std::array<int, 2> low = {mi[0] - rel[0], mi[1] - rel[1]};
      const Vec2 xi{static_cast<double>(rel[0]), static_cast<double>(rel[1])};
      const Vec2 g = element_gradient(f, low, xi);
      acc[0] += g[0];
      acc[1] += g[1];
    }
    for (int i = 0; i < grid.dim; ++i) out[i][v] = acc[i] * scale;
  }
  return out;
}

double interp_periodic(const UnitCellGrid& grid, std::span<const double> nodal, const Vec2& y) {
  const int dim = grid.dim;
  std::array<int, 2> i0{0, 0};
  std::array<double, 2> w{0.0, 0.0};
  for (int i = 0; i < dim; ++i) {
    const double r = frac01(y[i]) * grid.n;
    double rf = std::floor(r);
    if (rf > grid.n - 1) rf = grid.n - 1;
    i0[i] = static_cast<int>(rf);
    w[i] = r - rf;
  }
  const int nc = grid.corners();
  double acc = 0.0;
  for (int a = 0; a < nc; ++a) {
    double ww = 1.0;
    std::array<int, 2> mi = i0;
    for (int i = 0; i < dim; ++i) {
      if ((a >> i) & 1) {
        mi[i] += 1;
        ww *= w[i];
      } else {
        ww *= 1.0 - w[i];
      }
    }
    if (ww == 0.0) continue;
    acc += ww * nodal[grid.node_index(mi)];
  }
  return acc;
}

CellSolutionSet solve_cell_problems(const ProblemData& data, const Vec2& macro_point,
                                    const UnitCellGrid& grid, const CellSolveOptions& opts) {
  CellSolutionSet set;
  set.grid = grid;
  set.macro_point = macro_point;
  const CellFn q_fn = cell_fn([&data, macro_point](const Vec2& y) {
    return data.exchange.eval_xy(macro_point, y);
  });
  for (int k = 0; k < 2; ++k) {
    const CellFn kappa_fn = cell_fn([&data, macro_point, k](const Vec2& y) {
      return data.kappa[k].eval_xy(macro_point, y);
    });
    PeriodicStencilMatrix A = assemble_periodic_operator(kappa_fn, grid);
    for (int i = 0; i < data.dim; ++i) {
      CgResult stats;
      set.corrector_n[k].push_back(solve_corrector_n(A, kappa_fn, i, opts, &stats));
      set.max_rel_residual = std::max(set.max_rel_residual, stats.rel_residual);
      set.total_iterations += stats.iterations;
    }
    CgResult stats;
    set.exchange_m[k] = solve_exchange_m(A, q_fn, opts, &stats);
    set.max_rel_residual = std::max(set.max_rel_residual, stats.rel_residual);
    set.total_iterations += stats.iterations;
  }
  return set;
}

void write_cell_csv(const std::string& path, const UnitCellGrid& grid,
                    const std::vector<const CellField*>& fields,
                    const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "y1";
  if (grid.dim > 1) out << ",y2";
  for (const auto& n : names) out << "," << n;
  out << "\n";
  const std::size_t nodes = grid.node_count();
  for (std::size_t v = 0; v < nodes; ++v) {
    const Vec2 y = grid.node_coords(v);
    out << format_double(y[0]);
    if (grid.dim > 1) out << "," << format_double(y[1]);
    for (const CellField* f : fields) out << "," << format_double(f->values[v]);
    out << "\n";
  }
}

void write_cell_binary(const std::string& path, const UnitCellGrid& grid,
                       const std::vector<const CellField*>& fields) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  auto write_u32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
  write_u32(static_cast<std::uint32_t>(grid.dim));
  write_u32(static_cast<std::uint32_t>(grid.n));
  write_u32(static_cast<std::uint32_t>(fields.size()));
  for (const CellField* f : fields) {
    out.write(reinterpret_cast<const char*>(f->values.data()),
              static_cast<std::streamsize>(f->values.size() * 8));
  }
  if (!out) throw IoError("failed writing " + path);
}

std::vector<CellField> read_cell_binary(const std::string& path, UnitCellGrid* grid_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  auto read_u32 = [&in, &path]() {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw IoError("truncated cell dump: " + path);
    return v;
  };
  const int dim = static_cast<int>(read_u32());
  const int n = static_cast<int>(read_u32());
  const int count = static_cast<int>(read_u32());
  UnitCellGrid grid(dim, n);
  std::vector<CellField> fields;
  for (int f = 0; f < count; ++f) {
    CellField field(grid);
    in.read(reinterpret_cast<char*>(field.values.data()),
            static_cast<std::streamsize>(field.values.size() * 8));
    if (!in) throw IoError("truncated cell dump: " + path);
    fields.push_back(std::move(field));
  }
  if (grid_out) *grid_out = grid;
  return fields;
}

}  // namespace dualhom
