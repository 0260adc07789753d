#include "dualhom/block_system.hpp"

#include <chrono>
#include <cmath>
#include <vector>

#include "dualhom/effective.hpp"

namespace dualhom {

namespace {

using Triplet = Eigen::Triplet<double>;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct ElementBlocks {
  double mass[2][4][4];
  double stiff[2][4][4];
  double off[2][4][4];  // block (k, other)
  bool off_nonzero[2];
};

// One element's contribution for both fields. The per-field arithmetic is
// independent of the other field except for the off-diagonal drift term, so
// a single-field assembly calling this with a dummy second field produces
// bit-identical diagonal blocks.
void element_blocks(const MacroMesh& mesh, std::array<int, 2> emi,
                    const TwoFieldQuadData* qdata, ElementBlocks& eb) {
  const int nc = mesh.corners();
  const int nq = mesh.quad_points();
  const double w = mesh.quad_weight();
  for (int k = 0; k < 2; ++k) {
    eb.off_nonzero[k] = false;
    for (int a = 0; a < nc; ++a) {
      for (int b = 0; b < nc; ++b) {
        eb.mass[k][a][b] = 0.0;
        eb.stiff[k][a][b] = 0.0;
        eb.off[k][a][b] = 0.0;
      }
    }
  }
  double phi[4];
  Vec2 grad[4];
  for (int q = 0; q < nq; ++q) {
    const Vec2 xi = mesh.quad_local(q);
    for (int a = 0; a < nc; ++a) {
      phi[a] = mesh.shape(a, xi);
      grad[a] = mesh.shape_gradient(a, xi);
    }
    const TwoFieldQuadData& qd = qdata[q];
    for (int k = 0; k < 2; ++k) {
      const QuadData& f = qd.f[k];
      const QuadData& other = qd.f[1 - k];
      // symmetrized diffusion tensor
      Mat2 ks = f.diffusion;
      if (mesh.dim > 1) {
        const double sym = 0.5 * (ks[0][1] + ks[1][0]);
        ks[0][1] = sym;
        ks[1][0] = sym;
      }
      for (int a = 0; a < nc; ++a) {
        // mass, symmetric diffusion and the gamma coupling are mirrored per
        // unordered pair, which keeps them exactly symmetric (and the fine
        // exchange blocks exact transposes of each other)
        for (int b = a; b < nc; ++b) {
          const double pp = phi[a] * phi[b];
          const double mv = w * f.mass * pp;
          double kv = ks[0][0] * grad[a][0] * grad[b][0];
          if (mesh.dim > 1) {
            kv += ks[0][1] * (grad[a][0] * grad[b][1] + grad[a][1] * grad[b][0]) +
                  ks[1][1] * grad[a][1] * grad[b][1];
          }
          kv *= w;
          const double g = w * f.gamma * pp;
          eb.mass[k][a][b] += mv;
          eb.stiff[k][a][b] += kv + g;
          eb.off[k][a][b] -= g;
          if (b != a) {
            eb.mass[k][b][a] += mv;
            eb.stiff[k][b][a] += kv + g;
            eb.off[k][b][a] -= g;
          }
        }
        for (int b = 0; b < nc; ++b) {
          // convection (b_k . grad phi_a)(u_j - u_k)
          const double conv = w * dot(f.convection, grad[a], mesh.dim) * phi[b];
          eb.stiff[k][a][b] -= conv;
          eb.off[k][a][b] += conv;
          // drift (a_k . grad u_k - a_j . grad u_j) phi_a
          eb.stiff[k][a][b] += w * dot(f.drift, grad[b], mesh.dim) * phi[a];
          eb.off[k][a][b] -= w * dot(other.drift, grad[b], mesh.dim) * phi[a];
        }
      }
    }
  }
  for (int k = 0; k < 2; ++k) {
    for (int a = 0; a < mesh.corners() && !eb.off_nonzero[k]; ++a) {
      for (int b = 0; b < mesh.corners(); ++b) {
        if (eb.off[k][a][b] != 0.0) {
          eb.off_nonzero[k] = true;
          break;
        }
      }
    }
  }
}

double element_peclet(const MacroMesh& mesh, const TwoFieldQuadData& qd) {
  double pe = 0.0;
  for (int k = 0; k < 2; ++k) {
    const QuadData& f = qd.f[k];
    const double speed = std::max(norm2(f.convection, mesh.dim), norm2(f.drift, mesh.dim));
    if (speed == 0.0) continue;
    const double lam = symmetric_eigen_min(f.diffusion, mesh.dim);
    if (!(lam > 0.0)) throw SolveError("indefinite diffusion tensor in Peclet estimate");
    pe = std::max(pe, speed * mesh.h_max() / (2.0 * lam));
  }
  return pe;
}

}  // namespace

DofMap DofMap::interior(const MacroMesh& mesh) {
  DofMap map;
  const std::size_t nodes = mesh.node_count();
  map.node_to_dof.assign(nodes, -1);
  for (std::size_t v = 0; v < nodes; ++v) {
    if (!mesh.is_boundary(v)) {
      map.node_to_dof[v] = static_cast<std::ptrdiff_t>(map.dof_to_node.size());
      map.dof_to_node.push_back(v);
    }
  }
  map.count = map.dof_to_node.size();
  return map;
}

TwoFieldOperator assemble_two_field(const MacroMesh& mesh, const TwoFieldSampler& sampler,
                                    double peclet_limit) {
  TwoFieldOperator op;
  op.mesh = mesh;
  op.dofs = DofMap::interior(mesh);
  const std::size_t n = op.dofs.count;
  if (n == 0) throw ConfigError("mesh has no interior nodes");

  std::vector<Triplet> tm[2], tk[2], toff[2];
  const int nc = mesh.corners();
  std::vector<TwoFieldQuadData> qdata(mesh.quad_points());
  ElementBlocks eb;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto emi = mesh.element_multi(e);
    for (int q = 0; q < mesh.quad_points(); ++q) {
      const Vec2 x = mesh.quad_coords(emi, q);
      sampler(e, q, x, qdata[q]);
      op.max_element_peclet = std::max(op.max_element_peclet, element_peclet(mesh, qdata[q]));
    }
    element_blocks(mesh, emi, qdata.data(), eb);
    for (int a = 0; a < nc; ++a) {
      const std::ptrdiff_t ra = op.dofs.node_to_dof[mesh.element_node(emi, a)];
      if (ra < 0) continue;
      for (int b = 0; b < nc; ++b) {
        const std::ptrdiff_t cb = op.dofs.node_to_dof[mesh.element_node(emi, b)];
        if (cb < 0) continue;
        for (int k = 0; k < 2; ++k) {
          tm[k].emplace_back(ra, cb, eb.mass[k][a][b]);
          tk[k].emplace_back(ra, cb, eb.stiff[k][a][b]);
          if (eb.off_nonzero[k]) toff[k].emplace_back(ra, cb, eb.off[k][a][b]);
        }
      }
    }
  }
  if (peclet_limit > 0.0 && op.max_element_peclet > peclet_limit) {
    throw ConfigError("element Peclet number " + format_double(op.max_element_peclet) +
                      " exceeds limit " + format_double(peclet_limit) +
                      "; refine the mesh instead of stabilizing");
  }
  for (int k = 0; k < 2; ++k) {
    op.M[k].resize(n, n);
    op.M[k].setFromTriplets(tm[k].begin(), tm[k].end());
    op.K[k].resize(n, n);
    op.K[k].setFromTriplets(tk[k].begin(), tk[k].end());
  }
  op.C12.resize(n, n);
  op.C12.setFromTriplets(toff[0].begin(), toff[0].end());
  op.C21.resize(n, n);
  op.C21.setFromTriplets(toff[1].begin(), toff[1].end());
  op.C12.prune(0.0);
  op.C21.prune(0.0);
  op.coupled = op.C12.nonZeros() > 0 || op.C21.nonZeros() > 0;
  // assembly bug guard: mass diagonals must be positive
  for (int k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!(op.M[k].coeff(i, i) > 0.0)) {
        throw SolveError("non-SPD mass block detected (assembly bug guard)");
      }
    }
  }
  return op;
}

SingleFieldOperator assemble_single_field(const MacroMesh& mesh,
                                          const SingleFieldSampler& sampler) {
  SingleFieldOperator out;
  out.mesh = mesh;
  out.dofs = DofMap::interior(mesh);
  const std::size_t n = out.dofs.count;
  std::vector<Triplet> tm, tk;
  const int nc = mesh.corners();
  std::vector<TwoFieldQuadData> qdata(mesh.quad_points());
  ElementBlocks eb;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto emi = mesh.element_multi(e);
    for (int q = 0; q < mesh.quad_points(); ++q) {
      const Vec2 x = mesh.quad_coords(emi, q);
      sampler(e, q, x, qdata[q].f[0]);
      qdata[q].f[1] = QuadData{};  // inert companion
    }
    element_blocks(mesh, emi, qdata.data(), eb);
    for (int a = 0; a < nc; ++a) {
      const std::ptrdiff_t ra = out.dofs.node_to_dof[mesh.element_node(emi, a)];
      if (ra < 0) continue;
      for (int b = 0; b < nc; ++b) {
        const std::ptrdiff_t cb = out.dofs.node_to_dof[mesh.element_node(emi, b)];
        if (cb < 0) continue;
        tm.emplace_back(ra, cb, eb.mass[0][a][b]);
        tk.emplace_back(ra, cb, eb.stiff[0][a][b]);
      }
    }
  }
  out.M.resize(n, n);
  out.M.setFromTriplets(tm.begin(), tm.end());
  out.K.resize(n, n);
  out.K.setFromTriplets(tk.begin(), tk.end());
  return out;
}

namespace {
double scheme_theta(TimeScheme s) { return s == TimeScheme::CrankNicolson ? 0.5 : 1.0; }
}

SingleFieldStepper::SingleFieldStepper(const SpMat& M, const SpMat& K, double dt,
                                       TimeScheme scheme)
    : theta_(scheme_theta(scheme)) {
  lhs_ = (M * (1.0 / dt) + K * theta_).pruned();
  rhs_mat_ = (M * (1.0 / dt) - K * (1.0 - theta_)).pruned();
  lu_ = std::make_unique<Eigen::SparseLU<SpMat>>();
  lu_->compute(lhs_);
  if (lu_->info() != Eigen::Success) {
    throw SolveError("sparse LU factorization failed for the time-step operator");
  }
}

void SingleFieldStepper::step(const Eigen::VectorXd& u_prev, const Eigen::VectorXd& load,
                              Eigen::VectorXd& u_next, double* rel_residual) const {
  const Eigen::VectorXd rhs = rhs_mat_ * u_prev + load;
  u_next = lu_->solve(rhs);
  if (lu_->info() != Eigen::Success) throw SolveError("sparse LU solve failed");
  if (rel_residual) {
    const double scale = std::max(1.0, rhs.norm());
    *rel_residual = (lhs_ * u_next - rhs).norm() / scale;
  }
}

BlockStepper::BlockStepper(const TwoFieldOperator& op, double dt, TimeScheme scheme)
    : op_(op), dt_(dt), theta_(scheme_theta(scheme)) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(op.dofs.count);
  std::vector<Triplet> trips;
  auto add_block = [&trips](const SpMat& m, double scale, std::ptrdiff_t ro, std::ptrdiff_t co) {
    if (scale == 0.0) return;
    for (int c = 0; c < m.outerSize(); ++c) {
      for (SpMat::InnerIterator it(m, c); it; ++it) {
        trips.emplace_back(it.row() + ro, it.col() + co, scale * it.value());
      }
    }
  };
  add_block(op.M[0], 1.0 / dt, 0, 0);
  add_block(op.K[0], theta_, 0, 0);
  add_block(op.C12, theta_, 0, n);
  add_block(op.C21, theta_, n, 0);
  add_block(op.M[1], 1.0 / dt, n, n);
  add_block(op.K[1], theta_, n, n);
  lhs_.resize(2 * n, 2 * n);
  lhs_.setFromTriplets(trips.begin(), trips.end());
  lu_ = std::make_unique<Eigen::SparseLU<SpMat>>();
  lu_->compute(lhs_);
  if (lu_->info() != Eigen::Success) {
    throw SolveError("sparse LU factorization failed for the coupled time-step operator");
  }
}

void BlockStepper::step(const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                        const Eigen::VectorXd& load1, const Eigen::VectorXd& load2,
                        Eigen::VectorXd& u1_next, Eigen::VectorXd& u2_next,
                        double* rel_residual) const {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(op_.dofs.count);
  Eigen::VectorXd rhs(2 * n);
  const double om_theta = 1.0 - theta_;
  Eigen::VectorXd r1 = op_.M[0] * (u1 / dt_) + load1;
  Eigen::VectorXd r2 = op_.M[1] * (u2 / dt_) + load2;
  if (om_theta != 0.0) {
    r1 -= om_theta * (op_.K[0] * u1 + op_.C12 * u2);
    r2 -= om_theta * (op_.K[1] * u2 + op_.C21 * u1);
  }
  rhs.head(n) = r1;
  rhs.tail(n) = r2;
  const Eigen::VectorXd sol = lu_->solve(rhs);
  if (lu_->info() != Eigen::Success) throw SolveError("sparse LU solve failed");
  u1_next = sol.head(n);
  u2_next = sol.tail(n);
  if (rel_residual) {
    const double scale = std::max(1.0, rhs.norm());
    *rel_residual = (lhs_ * sol - rhs).norm() / scale;
  }
}

void assemble_load(const MacroMesh& mesh, const DofMap& dofs, const SourceFn& q, double t,
                   Eigen::VectorXd& out) {
  out.setZero(static_cast<std::ptrdiff_t>(dofs.count));
  const int nc = mesh.corners();
  const double w = mesh.quad_weight();
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto emi = mesh.element_multi(e);
    for (int qp = 0; qp < mesh.quad_points(); ++qp) {
      const Vec2 x = mesh.quad_coords(emi, qp);
      const double qv = q(t, x);
      if (qv == 0.0) continue;
      const Vec2 xi = mesh.quad_local(qp);
      for (int a = 0; a < nc; ++a) {
        const std::ptrdiff_t dof = dofs.node_to_dof[mesh.element_node(emi, a)];
        if (dof < 0) continue;
        out[dof] += w * qv * mesh.shape(a, xi);
      }
    }
  }
}

namespace {

Eigen::VectorXd initial_dofs(const MacroMesh& mesh, const DofMap& dofs, const SpatialFn& g) {
  Eigen::VectorXd u(static_cast<std::ptrdiff_t>(dofs.count));
  for (std::size_t d = 0; d < dofs.count; ++d) {
    u[static_cast<std::ptrdiff_t>(d)] = g(mesh.node_coords(dofs.dof_to_node[d]));
  }
  return u;
}

void scatter(const MacroMesh& mesh, const DofMap& dofs, const Eigen::VectorXd& u,
             std::vector<double>& nodal) {
  nodal.assign(mesh.node_count(), 0.0);
  for (std::size_t d = 0; d < dofs.count; ++d) {
    nodal[dofs.dof_to_node[d]] = u[static_cast<std::ptrdiff_t>(d)];
  }
}

}  // namespace

TransientField run_transient(const TwoFieldOperator& op, const SourcePair& source,
                             const SpatialFn& g1, const SpatialFn& g2, const TimeGrid& tgrid,
                             const TransientOptions& opts, bool force_monolithic,
                             RunStats* stats) {
  const auto t_begin = Clock::now();
  const double dt = tgrid.dt();
  const bool monolithic = force_monolithic || op.coupled;

  std::unique_ptr<BlockStepper> block;
  std::unique_ptr<SingleFieldStepper> single[2];
  if (monolithic) {
    block = std::make_unique<BlockStepper>(op, dt, opts.scheme);
  } else {
    single[0] = std::make_unique<SingleFieldStepper>(op.M[0], op.K[0], dt, opts.scheme);
    single[1] = std::make_unique<SingleFieldStepper>(op.M[1], op.K[1], dt, opts.scheme);
  }
  RunStats local;
  local.monolithic = monolithic;
  local.assemble_seconds = seconds_since(t_begin);

  Eigen::VectorXd u1 = initial_dofs(op.mesh, op.dofs, g1);
  Eigen::VectorXd u2 = initial_dofs(op.mesh, op.dofs, g2);

  TransientField field;
  field.mesh = op.mesh;
  field.tgrid = tgrid;
  std::vector<double> nodal1, nodal2;
  scatter(op.mesh, op.dofs, u1, nodal1);
  scatter(op.mesh, op.dofs, u2, nodal2);
  if (opts.store_series) {
    field.u1.push_back(nodal1);
    field.u2.push_back(nodal2);
  }
  if (opts.observer) opts.observer(0, 0.0, nodal1, nodal2);

  Eigen::VectorXd load1, load2, u1n, u2n;
  const auto t_steps = Clock::now();
  for (int s = 1; s <= tgrid.steps; ++s) {
    const double t_next = tgrid.time_at(s);
    const double t_src =
        opts.scheme == TimeScheme::CrankNicolson ? tgrid.time_at(s - 1) + 0.5 * dt : t_next;
    assemble_load(op.mesh, op.dofs, source.q1, t_src, load1);
    assemble_load(op.mesh, op.dofs, source.q2, t_src, load2);
    double res = 0.0;
    if (monolithic) {
      block->step(u1, u2, load1, load2, u1n, u2n, &res);
    } else {
      double r1 = 0.0, r2 = 0.0;
      single[0]->step(u1, load1, u1n, &r1);
      single[1]->step(u2, load2, u2n, &r2);
      res = std::max(r1, r2);
    }
    local.max_step_residual = std::max(local.max_step_residual, res);
    if (res > opts.tol_lin) {
      throw SolveError("per-step weak residual " + format_double(res) +
                       " exceeds tolerance at step " + std::to_string(s));
    }
    u1.swap(u1n);
    u2.swap(u2n);
    scatter(op.mesh, op.dofs, u1, nodal1);
    scatter(op.mesh, op.dofs, u2, nodal2);
    if (opts.store_series) {
      field.u1.push_back(nodal1);
      field.u2.push_back(nodal2);
    }
    if (opts.observer) opts.observer(s, t_next, nodal1, nodal2);
  }
  local.steps = tgrid.steps;
  local.solve_seconds = seconds_since(t_steps);
  if (stats) *stats = local;
  if (!opts.store_series) {
    // keep at least the final state for callers that want it
    field.u1.push_back(nodal1);
    field.u2.push_back(nodal2);
  }
  return field;
}

std::vector<std::vector<double>> solve_parabolic_single(const MacroMesh& mesh,
                                                        const SingleFieldSampler& sampler,
                                                        const SourceFn& q, const SpatialFn& g,
                                                        const TimeGrid& tgrid,
                                                        const TransientOptions& opts) {
  SingleFieldOperator op = assemble_single_field(mesh, sampler);
  SingleFieldStepper stepper(op.M, op.K, tgrid.dt(), opts.scheme);
  Eigen::VectorXd u = initial_dofs(mesh, op.dofs, g);
  std::vector<std::vector<double>> series;
  std::vector<double> nodal;
  scatter(mesh, op.dofs, u, nodal);
  series.push_back(nodal);
  Eigen::VectorXd load, un;
  for (int s = 1; s <= tgrid.steps; ++s) {
    const double t_next = tgrid.time_at(s);
    const double t_src = opts.scheme == TimeScheme::CrankNicolson
                             ? tgrid.time_at(s - 1) + 0.5 * tgrid.dt()
                             : t_next;
    assemble_load(mesh, op.dofs, q, t_src, load);
    double res = 0.0;
    stepper.step(u, load, un, &res);
    if (res > opts.tol_lin) {
      throw SolveError("per-step weak residual " + format_double(res) +
                       " exceeds tolerance at step " + std::to_string(s));
    }
    u.swap(un);
    scatter(mesh, op.dofs, u, nodal);
    series.push_back(nodal);
  }
  return series;
}

}  // namespace dualhom
