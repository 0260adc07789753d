#include "dualhom/coefficient.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace dualhom {

namespace {

// Clamped node lattice coordinate -> (index, weight) pair.
void locate_clamped(double s, double lo, double hi, int n, int& i0, double& w) {
  if (n <= 1) {
    i0 = 0;
    w = 0.0;
    return;
  }
  const double r = (s - lo) / (hi - lo) * (n - 1);
  double rf = std::floor(r);
  if (rf < 0) rf = 0;
  if (rf > n - 2) rf = n - 2;
  i0 = static_cast<int>(rf);
  w = r - rf;
  if (w < 0.0) w = 0.0;
  if (w > 1.0) w = 1.0;
}

// Periodic cell coordinate (samples at j/n) -> (index, weight).
void locate_periodic(double s, int n, int& i0, double& w) {
  if (n <= 1) {
    i0 = 0;
    w = 0.0;
    return;
  }
  const double r = frac01(s) * n;
  double rf = std::floor(r);
  if (rf > n - 1) rf = n - 1;
  i0 = static_cast<int>(rf);
  w = r - rf;
}

}  // namespace

SampledGrid::SampledGrid(int dim, std::array<int, 2> nx, std::array<int, 2> ny, Box domain,
                         std::vector<double> values)
    : dim_(dim), nx_(nx), ny_(ny), domain_(domain), values_(std::move(values)) {
  if (dim_ < 1 || dim_ > 2) throw ConfigError("sampled grid dimension must be 1 or 2");
  std::size_t count = 1;
  for (int i = 0; i < dim_; ++i) {
    if (nx_[i] < 1 || ny_[i] < 1) throw ConfigError("sampled grid resolutions must be >= 1");
    count *= static_cast<std::size_t>(nx_[i]) * static_cast<std::size_t>(ny_[i]);
  }
  if (values_.size() != count) {
    throw ConfigError("sampled grid payload size mismatch: expected " + std::to_string(count) +
                      ", got " + std::to_string(values_.size()));
  }
}

std::size_t SampledGrid::index(std::array<int, 2> ix, std::array<int, 2> iy) const {
  // x-major, then y, each lexicographic
  std::size_t idx = static_cast<std::size_t>(ix[0]);
  if (dim_ > 1) idx = idx * nx_[1] + ix[1];
  idx = idx * ny_[0] + iy[0];
  if (dim_ > 1) idx = idx * ny_[1] + iy[1];
  return idx;
}

double SampledGrid::eval(const Vec2& x, const Vec2& y) const {
  std::array<int, 2> ix0{0, 0}, iy0{0, 0};
  std::array<double, 2> wx{0.0, 0.0}, wy{0.0, 0.0};
  for (int i = 0; i < dim_; ++i) {
    locate_clamped(x[i], domain_.lo[i], domain_.hi[i], nx_[i], ix0[i], wx[i]);
    locate_periodic(y[i], ny_[i], iy0[i], wy[i]);
  }
  const int xc = (dim_ > 1) ? 4 : 2;
  const int yc = (dim_ > 1) ? 4 : 2;
  double acc = 0.0;
  for (int a = 0; a < xc; ++a) {
    std::array<int, 2> ix = ix0;
    double w = 1.0;
    for (int i = 0; i < dim_; ++i) {
      const int bit = (a >> i) & 1;
      if (bit) {
        ix[i] = std::min(ix[i] + 1, nx_[i] - 1);
        w *= wx[i];
      } else {
        w *= 1.0 - wx[i];
      }
    }
    if (w == 0.0) continue;
    for (int b = 0; b < yc; ++b) {
      std::array<int, 2> iy = iy0;
      double v = w;
      for (int i = 0; i < dim_; ++i) {
        const int bit = (b >> i) & 1;
        if (bit) {
          iy[i] = (iy[i] + 1) % ny_[i];
          v *= wy[i];
        } else {
          v *= 1.0 - wy[i];
        }
      }
      if (v == 0.0) continue;
      acc += v * values_[index(ix, iy)];
    }
  }
  return acc;
}

namespace {
constexpr char kGridMagic[8] = {'D', 'H', 'G', 'R', 'I', 'D', '0', '1'};
}

SampledGrid SampledGrid::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open grid file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kGridMagic, 8) != 0) {
    throw IoError("bad grid file magic: " + path);
  }
  auto read_u32 = [&in, &path]() {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw IoError("truncated grid file: " + path);
    return v;
  };
  auto read_f64 = [&in, &path]() {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw IoError("truncated grid file: " + path);
    return v;
  };
  const int dim = static_cast<int>(read_u32());
  if (dim < 1 || dim > 2) throw IoError("grid file dimension out of range: " + path);
  std::array<int, 2> nx{1, 1}, ny{1, 1};
  for (int i = 0; i < dim; ++i) nx[i] = static_cast<int>(read_u32());
  for (int i = 0; i < dim; ++i) ny[i] = static_cast<int>(read_u32());
  Box box;
  box.dim = dim;
  for (int i = 0; i < dim; ++i) box.lo[i] = read_f64();
  for (int i = 0; i < dim; ++i) box.hi[i] = read_f64();
  std::size_t count = 1;
  for (int i = 0; i < dim; ++i) count *= static_cast<std::size_t>(nx[i]) * ny[i];
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * 8));
  if (!in) throw IoError("truncated grid payload: " + path);
  return SampledGrid(dim, nx, ny, box, std::move(values));
}

void SampledGrid::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write grid file: " + path);
  out.write(kGridMagic, 8);
  auto write_u32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
  auto write_f64 = [&out](double v) { out.write(reinterpret_cast<char*>(&v), 8); };
  write_u32(static_cast<std::uint32_t>(dim_));
  for (int i = 0; i < dim_; ++i) write_u32(static_cast<std::uint32_t>(nx_[i]));
  for (int i = 0; i < dim_; ++i) write_u32(static_cast<std::uint32_t>(ny_[i]));
  for (int i = 0; i < dim_; ++i) write_f64(domain_.lo[i]);
  for (int i = 0; i < dim_; ++i) write_f64(domain_.hi[i]);
  out.write(reinterpret_cast<const char*>(values_.data()),
            static_cast<std::streamsize>(values_.size() * 8));
  if (!out) throw IoError("failed writing grid file: " + path);
}

SampledGrid SampledGrid::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grid file: " + path);
  std::string header;
  std::getline(in, header);
  if (header.rfind("# dualhom-grid", 0) != 0) {
    throw IoError("bad CSV grid header: " + path);
  }
  std::string meta;
  std::getline(in, meta);
  std::istringstream ms(meta);
  auto next = [&ms, &path]() {
    std::string field;
    if (!std::getline(ms, field, ',')) throw IoError("short CSV grid metadata: " + path);
    return std::stod(field);
  };
  const int dim = static_cast<int>(next());
  if (dim < 1 || dim > 2) throw IoError("grid file dimension out of range: " + path);
  std::array<int, 2> nx{1, 1}, ny{1, 1};
  for (int i = 0; i < dim; ++i) nx[i] = static_cast<int>(next());
  for (int i = 0; i < dim; ++i) ny[i] = static_cast<int>(next());
  Box box;
  box.dim = dim;
  for (int i = 0; i < dim; ++i) box.lo[i] = next();
  for (int i = 0; i < dim; ++i) box.hi[i] = next();
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    values.push_back(std::stod(line));
  }
  return SampledGrid(dim, nx, ny, box, std::move(values));
}

void SampledGrid::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write grid file: " + path);
  out << "# dualhom-grid v1\n";
  out << dim_;
  for (int i = 0; i < dim_; ++i) out << "," << nx_[i];
  for (int i = 0; i < dim_; ++i) out << "," << ny_[i];
  for (int i = 0; i < dim_; ++i) out << "," << format_double(domain_.lo[i]);
  for (int i = 0; i < dim_; ++i) out << "," << format_double(domain_.hi[i]);
  out << "\n";
  for (double v : values_) out << format_double(v) << "\n";
}

CoefficientField CoefficientField::from_expression(Expression e) {
  CoefficientField f;
  f.expr_ = std::move(e);
  return f;
}

CoefficientField CoefficientField::from_grid(SampledGrid g) {
  CoefficientField f;
  f.grid_ = std::move(g);
  return f;
}

CoefficientField CoefficientField::constant(double v, int dim) {
  return from_expression(Expression::parse(format_double(v), dim));
}

double CoefficientField::eval(double t, const Vec2& x, const Vec2& y) const {
  Vec2 yw{frac01(y[0]), frac01(y[1])};
  if (expr_) {
    EvalContext ctx;
    ctx.t = t;
    ctx.x = x;
    ctx.y = yw;
    return expr_->evaluate(ctx);
  }
  if (grid_) return grid_->eval(x, yw);
  throw EvalError("evaluating empty coefficient field");
}

bool CoefficientField::varies_in_time() const {
  return expr_ ? expr_->depends_on_time() : false;
}

bool CoefficientField::varies_in_x() const {
  if (expr_) return expr_->depends_on_macro();
  if (grid_) return grid_->varies_in_x();
  return false;
}

bool CoefficientField::varies_in_y() const {
  if (expr_) return expr_->depends_on_cell();
  if (grid_) return grid_->varies_in_y();
  return false;
}

int CoefficientField::dim() const {
  if (expr_) return expr_->dim();
  if (grid_) return grid_->dim();
  return 0;
}

std::uint64_t CoefficientField::content_hash() const {
  if (expr_) return fnv1a(expr_->serialize(), fnv1a("expr"));
  if (grid_) {
    std::uint64_t h = fnv1a("grid");
    const auto& g = *grid_;
    auto mix = [&h](const void* p, std::size_t n) {
      h = fnv1a(std::string_view(static_cast<const char*>(p), n), h);
    };
    const int dim = g.dim();
    mix(&dim, sizeof(dim));
    mix(g.nx().data(), sizeof(int) * 2);
    mix(g.ny().data(), sizeof(int) * 2);
    mix(g.values().data(), g.values().size() * sizeof(double));
    return h;
  }
  return 0;
}

bool ProblemData::cell_data_varies_in_x() const {
  return kappa[0].varies_in_x() || kappa[1].varies_in_x() || exchange.varies_in_x() ||
         capacity[0].varies_in_x() || capacity[1].varies_in_x();
}

std::uint64_t ProblemData::content_hash() const {
  std::uint64_t h = fnv1a("problem");
  auto mix = [&h](std::uint64_t v) {
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(&v), 8), h);
  };
  mix(static_cast<std::uint64_t>(dim));
  for (int i = 0; i < dim; ++i) {
    mix(std::bit_cast<std::uint64_t>(domain.lo[i]));
    mix(std::bit_cast<std::uint64_t>(domain.hi[i]));
  }
  mix(std::bit_cast<std::uint64_t>(horizon));
  for (int k = 0; k < 2; ++k) mix(kappa[k].content_hash());
  for (int k = 0; k < 2; ++k) mix(capacity[k].content_hash());
  mix(exchange.content_hash());
  mix(source.content_hash());
  for (int k = 0; k < 2; ++k) mix(initial[k].content_hash());
  return h;
}

double cell_mean(const CoefficientField& f, const Vec2& x, int resolution) {
  const int dim = f.dim() > 0 ? f.dim() : 1;
  const int n = resolution;
  double sum = 0.0;
  if (dim == 1) {
    for (int j = 0; j < n; ++j) {
      Vec2 y{(j + 0.5) / n, 0.0};
      sum += f.eval_xy(x, y);
    }
    return sum / n;
  }
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      Vec2 y{(j + 0.5) / n, (k + 0.5) / n};
      sum += f.eval_xy(x, y);
    }
  }
  return sum / (static_cast<double>(n) * n);
}

namespace {

void coercivity_check(const std::string& name, const CoefficientField& f, const Box& domain,
                      double bound, int res, std::vector<ValidationCheck>& out) {
  ValidationCheck c;
  c.name = name + " coercivity";
  double worst = std::numeric_limits<double>::infinity();
  Vec2 wx{0, 0}, wy{0, 0};
  const int dim = domain.dim;
  const int mx = f.varies_in_x() ? res : 1;
  const int my = f.varies_in_y() ? res : 1;
  auto sample = [&](const Vec2& x, const Vec2& y) {
    const double v = f.eval_xy(x, y);
    if (v < worst) {
      worst = v;
      wx = x;
      wy = y;
    }
  };
  std::array<int, 2> xc{mx, dim > 1 ? mx : 1};
  std::array<int, 2> yc{my, dim > 1 ? my : 1};
  for (int a = 0; a < xc[0]; ++a) {
    for (int b = 0; b < xc[1]; ++b) {
      Vec2 x{domain.lo[0] + (a + 0.5) / xc[0] * domain.extent(0), 0.0};
      if (dim > 1) x[1] = domain.lo[1] + (b + 0.5) / xc[1] * domain.extent(1);
      for (int j = 0; j < yc[0]; ++j) {
        for (int k = 0; k < yc[1]; ++k) {
          Vec2 y{(j + 0.5) / yc[0], 0.0};
          if (dim > 1) y[1] = (k + 0.5) / yc[1];
          sample(x, y);
        }
      }
    }
  }
  c.worst_value = worst;
  c.worst_x = wx;
  c.worst_y = wy;
  c.passed = worst >= bound;
  if (!c.passed) c.note = "minimum sample " + format_double(worst) + " below bound";
  out.push_back(std::move(c));
}

}  // namespace

ValidationReport validate(const ProblemData& data, const ValidationOptions& opts) {
  if (opts.sample_resolution < 8) {
    throw ConfigError("validation sample_resolution must be >= 8");
  }
  ValidationReport report;
  coercivity_check("kappa_1", data.kappa[0], data.domain, opts.coercivity_min,
                   opts.sample_resolution, report.checks);
  coercivity_check("kappa_2", data.kappa[1], data.domain, opts.coercivity_min,
                   opts.sample_resolution, report.checks);
  coercivity_check("capacity_11", data.capacity[0], data.domain, opts.coercivity_min,
                   opts.sample_resolution, report.checks);
  coercivity_check("capacity_22", data.capacity[1], data.domain, opts.coercivity_min,
                   opts.sample_resolution, report.checks);

  ValidationCheck mean_check;
  mean_check.name = "exchange zero cell mean";
  const double tol = data.exchange.is_expression() ? opts.tol_mean_expression
                                                   : opts.tol_mean_sampled;
  const int dim = data.dim;
  const int mx = data.exchange.varies_in_x() ? opts.sample_resolution : 1;
  double worst = 0.0;
  Vec2 worst_x{0, 0};
  for (int a = 0; a < mx; ++a) {
    const int bx = (dim > 1) ? mx : 1;
    for (int b = 0; b < bx; ++b) {
      Vec2 x{data.domain.lo[0] + (a + 0.5) / mx * data.domain.extent(0), 0.0};
      if (dim > 1) x[1] = data.domain.lo[1] + (b + 0.5) / bx * data.domain.extent(1);
      const double m = cell_mean(data.exchange, x, opts.sample_resolution);
      if (std::fabs(m) > std::fabs(worst)) {
        worst = m;
        worst_x = x;
      }
    }
  }
  mean_check.worst_value = worst;
  mean_check.worst_x = worst_x;
  mean_check.passed = std::fabs(worst) <= tol;
  if (!mean_check.passed) {
    mean_check.note = "cell mean " + format_double(worst) + " exceeds tolerance " +
                      format_double(tol);
  }
  report.checks.push_back(std::move(mean_check));

  ValidationCheck reg;
  reg.name = "cell-solution regularity";
  reg.passed = true;
  reg.note = "not checked numerically; smoothness of the data is the user's responsibility";
  report.checks.push_back(std::move(reg));
  return report;
}

bool ValidationReport::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

std::string ValidationReport::to_string() const {
  std::string out;
  for (const auto& c : checks) {
    out += (c.passed ? "pass  " : "FAIL  ") + c.name;
    out += "  worst=" + format_double(c.worst_value);
    if (!c.note.empty()) out += "  (" + c.note + ")";
    out += "\n";
  }
  return out;
}

void require_valid(const ProblemData& data, const ValidationOptions& opts) {
  ValidationReport report = validate(data, opts);
  if (!report.all_passed()) {
    throw ConfigError("problem data failed validation:\n" + report.to_string());
  }
}

}  // namespace dualhom
