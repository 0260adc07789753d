#ifndef DUALHOM_BLOCK_SYSTEM_HPP
#define DUALHOM_BLOCK_SYSTEM_HPP

#include <functional>
#include <memory>
#include <span>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "dualhom/mesh.hpp"
#include "dualhom/transient.hpp"

namespace dualhom {

using SpMat = Eigen::SparseMatrix<double>;

enum class TimeScheme { ImplicitEuler, CrankNicolson };

// Interior (non-Dirichlet) unknowns of a mesh.
struct DofMap {
  std::vector<std::ptrdiff_t> node_to_dof;  // -1 on the boundary
  std::vector<std::size_t> dof_to_node;
  std::size_t count = 0;

  static DofMap interior(const MacroMesh& mesh);
};

// Coefficients of one continuum at one quadrature point. The weak form
// contribution per continuum k (with j the other continuum) is
//   mass d/dt u_k + (diffusion grad u_k, grad phi) + (convection . grad phi)(u_j - u_k)
//   + (drift_k . grad u_k - drift_j . grad u_j) phi + gamma (u_k - u_j) phi,
// which covers both the homogenized system (gamma = -beta) and the fine
// two-scale system (gamma = Q^eps / eps, convection = drift = 0).
struct QuadData {
  double mass = 1.0;
  Mat2 diffusion{};
  Vec2 convection{0.0, 0.0};
  Vec2 drift{0.0, 0.0};
  double gamma = 0.0;
};

struct TwoFieldQuadData {
  QuadData f[2];
};

using TwoFieldSampler =
    std::function<void(std::size_t elem, int q, const Vec2& x, TwoFieldQuadData&)>;

// Assembled spatial operator. K_k are the per-field diagonal spatial blocks
// (diffusion + convection + drift + coupling diagonal); C12/C21 the
// off-diagonal blocks. Element coupling blocks that vanish identically are
// skipped, so an exchange-free problem is structurally decoupled.
struct TwoFieldOperator {
  MacroMesh mesh;
  DofMap dofs;
  SpMat M[2];
  SpMat K[2];
  SpMat C12, C21;
  bool coupled = false;
  double max_element_peclet = 0.0;
};

TwoFieldOperator assemble_two_field(const MacroMesh& mesh, const TwoFieldSampler& sampler,
                                    double peclet_limit = 0.0);

// Mass and stiffness of a single continuum, assembled by the identical
// element sweep the two-field assembler uses.
struct SingleFieldOperator {
  MacroMesh mesh;
  DofMap dofs;
  SpMat M, K;
};

using SingleFieldSampler = std::function<void(std::size_t elem, int q, const Vec2& x, QuadData&)>;

SingleFieldOperator assemble_single_field(const MacroMesh& mesh,
                                          const SingleFieldSampler& sampler);

// theta-scheme stepper for one field: (M/dt + theta K) u+ = (M/dt - (1-theta) K) u + load.
class SingleFieldStepper {
 public:
  SingleFieldStepper(const SpMat& M, const SpMat& K, double dt, TimeScheme scheme);
  void step(const Eigen::VectorXd& u_prev, const Eigen::VectorXd& load, Eigen::VectorXd& u_next,
            double* rel_residual = nullptr) const;
  double theta() const { return theta_; }

 private:
  SpMat lhs_, rhs_mat_;
  std::unique_ptr<Eigen::SparseLU<SpMat>> lu_;
  double theta_;
};

// Monolithic stepper for the coupled two-field system.
class BlockStepper {
 public:
  BlockStepper(const TwoFieldOperator& op, double dt, TimeScheme scheme);
  void step(const Eigen::VectorXd& u1, const Eigen::VectorXd& u2, const Eigen::VectorXd& load1,
            const Eigen::VectorXd& load2, Eigen::VectorXd& u1_next, Eigen::VectorXd& u2_next,
            double* rel_residual = nullptr) const;

 private:
  const TwoFieldOperator& op_;
  double dt_, theta_;
  SpMat lhs_;
  std::unique_ptr<Eigen::SparseLU<SpMat>> lu_;
};

using SourceFn = std::function<double(double t, const Vec2& x)>;
using SpatialFn = std::function<double(const Vec2& x)>;

struct SourcePair {
  SourceFn q1, q2;
  static SourcePair same(SourceFn q) { return {q, q}; }
};

// Per-step hook; vectors are full nodal (boundary zeros included).
using StepObserver =
    std::function<void(int step, double t, std::span<const double> u1, std::span<const double> u2)>;

struct TransientOptions {
  TimeScheme scheme = TimeScheme::ImplicitEuler;
  double tol_lin = 1e-10;
  bool store_series = true;
  StepObserver observer;
};

struct RunStats {
  double max_step_residual = 0.0;
  int steps = 0;
  bool monolithic = true;
  double assemble_seconds = 0.0;
  double solve_seconds = 0.0;
};

// Interior load vector from a source at time t.
void assemble_load(const MacroMesh& mesh, const DofMap& dofs, const SourceFn& q, double t,
                   Eigen::VectorXd& out);

// Time loop shared by the macro and fine solvers. If `force_monolithic` is
// false and the operator is structurally decoupled, each field advances
// through its own SingleFieldStepper (identical arithmetic to a single-field
// reference solve).
TransientField run_transient(const TwoFieldOperator& op, const SourcePair& source,
                             const SpatialFn& g1, const SpatialFn& g2, const TimeGrid& tgrid,
                             const TransientOptions& opts, bool force_monolithic,
                             RunStats* stats = nullptr);

// Reference single-continuum parabolic solve (used by tests and by the
// decoupled fine path): mass/diffusion from the sampler, source q, initial g.
std::vector<std::vector<double>> solve_parabolic_single(const MacroMesh& mesh,
                                                        const SingleFieldSampler& sampler,
                                                        const SourceFn& q, const SpatialFn& g,
                                                        const TimeGrid& tgrid,
                                                        const TransientOptions& opts);

}  // namespace dualhom

#endif
