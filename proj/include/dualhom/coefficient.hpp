#ifndef DUALHOM_COEFFICIENT_HPP
#define DUALHOM_COEFFICIENT_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dualhom/common.hpp"
#include "dualhom/expression.hpp"

namespace dualhom {

// Samples of a coefficient on a tensor lattice over Omega x Y. Macro samples
// are node-centered (clamped multilinear interpolation); cell samples sit at
// j/ny and wrap periodically. A resolution of 1 in a direction means the
// field is constant there.
class SampledGrid {
 public:
  SampledGrid() = default;
  SampledGrid(int dim, std::array<int, 2> nx, std::array<int, 2> ny, Box domain,
              std::vector<double> values);

  double eval(const Vec2& x, const Vec2& y) const;

  int dim() const { return dim_; }
  const std::array<int, 2>& nx() const { return nx_; }
  const std::array<int, 2>& ny() const { return ny_; }
  const Box& domain() const { return domain_; }
  const std::vector<double>& values() const { return values_; }
  bool varies_in_x() const { return nx_[0] > 1 || (dim_ > 1 && nx_[1] > 1); }
  bool varies_in_y() const { return ny_[0] > 1 || (dim_ > 1 && ny_[1] > 1); }

  // Binary dump: magic "DHGRID01", u32 dim, u32 nx[dim], u32 ny[dim],
  // f64 lo[dim], f64 hi[dim], then row-major f64 payload (x-major, y-minor).
  static SampledGrid load(const std::string& path);
  void save(const std::string& path) const;
  static SampledGrid load_csv(const std::string& path);
  void save_csv(const std::string& path) const;

  std::size_t index(std::array<int, 2> ix, std::array<int, 2> iy) const;

 private:
  int dim_ = 1;
  std::array<int, 2> nx_{1, 1};
  std::array<int, 2> ny_{1, 1};
  Box domain_;
  std::vector<double> values_;
};

// One problem coefficient: either a parsed expression or a sampled grid.
class CoefficientField {
 public:
  CoefficientField() = default;
  static CoefficientField from_expression(Expression e);
  static CoefficientField from_grid(SampledGrid g);
  static CoefficientField constant(double v, int dim);

  // y is reduced modulo 1 internally, so Y-periodicity holds exactly for
  // sampled fields and bitwise for periodic expression primitives.
  double eval(double t, const Vec2& x, const Vec2& y) const;
  double eval_xy(const Vec2& x, const Vec2& y) const { return eval(0.0, x, y); }

  bool is_expression() const { return expr_.has_value(); }
  const Expression& expression() const { return *expr_; }
  const SampledGrid& grid() const { return *grid_; }

  bool varies_in_time() const;
  bool varies_in_x() const;
  bool varies_in_y() const;
  int dim() const;

  // Stable content fingerprint, used for cache keys.
  std::uint64_t content_hash() const;

 private:
  std::optional<Expression> expr_;
  std::optional<SampledGrid> grid_;
};

// Full data set of the two-scale problem.
struct ProblemData {
  int dim = 1;
  Box domain;
  double horizon = 1.0;                        // T
  std::array<CoefficientField, 2> kappa;       // kappa_1, kappa_2
  std::array<CoefficientField, 2> capacity;    // C_11, C_22
  CoefficientField exchange;                   // Q
  CoefficientField source;                     // q(t, x)
  std::array<CoefficientField, 2> initial;     // g_1, g_2

  bool cell_data_varies_in_x() const;
  std::uint64_t content_hash() const;
};

struct ValidationOptions {
  double tol_mean_expression = 1e-10;
  double tol_mean_sampled = 1e-8;
  double coercivity_min = 1e-8;
  int sample_resolution = 32;  // per dimension, >= 8
};

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double worst_value = 0.0;
  Vec2 worst_x{0.0, 0.0};
  Vec2 worst_y{0.0, 0.0};
  std::string note;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_passed() const;
  std::string to_string() const;
};

// Checks coercivity of kappa_i, C_ii and the zero cell mean of Q at every
// macro sample point. Failures are reported, never thrown; solvers refuse
// data whose report fails.
ValidationReport validate(const ProblemData& data, const ValidationOptions& opts = {});

// Cell mean of a coefficient at frozen x by the midpoint lattice rule
// (exact for per-variable degree <= 1, spectrally accurate for smooth
// periodic integrands).
double cell_mean(const CoefficientField& f, const Vec2& x, int resolution);

void require_valid(const ProblemData& data, const ValidationOptions& opts = {});

}  // namespace dualhom

#endif
