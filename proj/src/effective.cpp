#include "dualhom/effective.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace dualhom {

namespace {

using ordered_json = nlohmann::ordered_json;

// Iterate cell elements x quadrature points; cb(qp, weight).
template <typename Cb>
void for_cell_quadrature(const UnitCellGrid& grid, Cb&& cb) {
  const double w = cell_quad_weight(grid);
  const int e1max = grid.dim > 1 ? grid.n : 1;
  for (int e1 = 0; e1 < e1max; ++e1) {
    for (int e0 = 0; e0 < grid.n; ++e0) {
      const std::array<int, 2> elem{e0, e1};
      for (int q = 0; q < grid.quad_points(); ++q) {
        CellQuadPoint qp;
        qp.elem = elem;
        qp.q = q;
        qp.y = cell_quad_coords(grid, elem, q);
        cb(qp, w);
      }
    }
  }
}

Vec2 local_of(const UnitCellGrid& grid, const CellQuadPoint& qp) {
  Vec2 xi{0.0, 0.0};
  for (int i = 0; i < grid.dim; ++i) {
    xi[i] = qp.y[i] * grid.n - qp.elem[i];
  }
  return xi;
}

double interp_at(const CellField& f, const CellQuadPoint& qp, const Vec2& xi) {
  const UnitCellGrid& grid = f.grid;
  double acc = 0.0;
  for (int a = 0; a < grid.corners(); ++a) {
    double s = (a & 1) ? xi[0] : 1.0 - xi[0];
    if (grid.dim > 1) s *= ((a >> 1) & 1) ? xi[1] : 1.0 - xi[1];
    acc += s * f.values[grid.node_index({qp.elem[0] + (a & 1), qp.elem[1] + ((a >> 1) & 1)})];
  }
  return acc;
}

}  // namespace

double cell_average(const CellFn& f, const UnitCellGrid& grid) {
  double acc = 0.0;
  for_cell_quadrature(grid, [&](const CellQuadPoint& qp, double w) { acc += w * f(qp); });
  return acc;
}

Mat2 assemble_kappa_star(const CellFn& kappa, const std::vector<CellField>& corrector_n) {
  const UnitCellGrid& grid = corrector_n.at(0).grid;
  const int dim = grid.dim;
  if (static_cast<int>(corrector_n.size()) != dim) {
    throw ConfigError("kappa_star needs one corrector per direction");
  }
  Mat2 ks{};
  for_cell_quadrature(grid, [&](const CellQuadPoint& qp, double w) {
    const double k = kappa(qp);
    const Vec2 xi = local_of(grid, qp);
    for (int j = 0; j < dim; ++j) {
      const Vec2 g = element_gradient(corrector_n[j], qp.elem, xi);
      for (int i = 0; i < dim; ++i) {
        const double delta = (i == j) ? 1.0 : 0.0;
        ks[i][j] += w * k * (delta + g[i]);
      }
    }
  });
  return ks;
}

Vec2 assemble_convection(const CellFn& kappa, const CellField& exchange_m) {
  const UnitCellGrid& grid = exchange_m.grid;
  Vec2 b{0.0, 0.0};
  for_cell_quadrature(grid, [&](const CellQuadPoint& qp, double w) {
    const double k = kappa(qp);
    const Vec2 g = element_gradient(exchange_m, qp.elem, local_of(grid, qp));
    for (int i = 0; i < grid.dim; ++i) b[i] += w * k * g[i];
  });
  return b;
}

Vec2 assemble_drift(const CellFn& exchange, const std::vector<CellField>& corrector_n) {
  const UnitCellGrid& grid = corrector_n.at(0).grid;
  Vec2 a{0.0, 0.0};
  for_cell_quadrature(grid, [&](const CellQuadPoint& qp, double w) {
    const double q = exchange(qp);
    const Vec2 xi = local_of(grid, qp);
    for (int i = 0; i < grid.dim; ++i) {
      a[i] += w * q * interp_at(corrector_n[i], qp, xi);
    }
  });
  return a;
}

double assemble_exchange(const CellFn& exchange, const CellField& m1, const CellField& m2) {
  const UnitCellGrid& grid = m1.grid;
  double beta = 0.0;
  for_cell_quadrature(grid, [&](const CellQuadPoint& qp, double w) {
    const Vec2 xi = local_of(grid, qp);
    beta += w * exchange(qp) * (interp_at(m1, qp, xi) + interp_at(m2, qp, xi));
  });
  return beta;
}

EffectivePointData assemble_effective_point(const ProblemData& data,
                                            const CellSolutionSet& cells) {
  EffectivePointData p;
  p.macro_point = cells.macro_point;
  const Vec2 x = cells.macro_point;
  const CellFn q_fn = cell_fn([&data, x](const Vec2& y) { return data.exchange.eval_xy(x, y); });
  for (int k = 0; k < 2; ++k) {
    const CellFn kappa_fn =
        cell_fn([&data, x, k](const Vec2& y) { return data.kappa[k].eval_xy(x, y); });
    const CellFn cap_fn =
        cell_fn([&data, x, k](const Vec2& y) { return data.capacity[k].eval_xy(x, y); });
    p.capacity_bar[k] = cell_average(cap_fn, cells.grid);
    p.kappa_star[k] = assemble_kappa_star(kappa_fn, cells.corrector_n[k]);
    p.convection[k] = assemble_convection(kappa_fn, cells.exchange_m[k]);
    p.drift[k] = assemble_drift(q_fn, cells.corrector_n[k]);
  }
  p.beta = assemble_exchange(q_fn, cells.exchange_m[0], cells.exchange_m[1]);
  return p;
}

double symmetric_eigen_min(const Mat2& m, int dim) {
  if (dim == 1) return m[0][0];
  const double mean = 0.5 * (m[0][0] + m[1][1]);
  const double off = 0.5 * (m[0][1] + m[1][0]);
  const double r = std::sqrt(0.25 * (m[0][0] - m[1][1]) * (m[0][0] - m[1][1]) + off * off);
  return mean - r;
}

double symmetric_eigen_max(const Mat2& m, int dim) {
  if (dim == 1) return m[0][0];
  const double mean = 0.5 * (m[0][0] + m[1][1]);
  const double off = 0.5 * (m[0][1] + m[1][0]);
  const double r = std::sqrt(0.25 * (m[0][0] - m[1][1]) * (m[0][0] - m[1][1]) + off * off);
  return mean + r;
}

EffectivePointChecks check_effective_point(const ProblemData& data,
                                           const EffectivePointData& point,
                                           const UnitCellGrid& grid) {
  EffectivePointChecks c;
  const Vec2 x = point.macro_point;
  c.spd = true;
  c.voigt_reuss = true;
  for (int k = 0; k < 2; ++k) {
    const Mat2& m = point.kappa_star[k];
    double scale = 0.0;
    for (int i = 0; i < data.dim; ++i) {
      for (int j = 0; j < data.dim; ++j) scale = std::max(scale, std::fabs(m[i][j]));
    }
    if (data.dim > 1) {
      c.symmetry_defect =
          std::max(c.symmetry_defect, std::fabs(m[0][1] - m[1][0]) / std::max(scale, 1e-300));
    }
    c.lambda_min[k] = symmetric_eigen_min(m, data.dim);
    c.lambda_max[k] = symmetric_eigen_max(m, data.dim);
    if (!(c.lambda_min[k] > 0.0)) c.spd = false;

    const CellFn kappa_fn =
        cell_fn([&data, x, k](const Vec2& y) { return data.kappa[k].eval_xy(x, y); });
    const CellFn inv_kappa_fn =
        cell_fn([&data, x, k](const Vec2& y) { return 1.0 / data.kappa[k].eval_xy(x, y); });
    c.arithmetic_mean[k] = cell_average(kappa_fn, grid);
    c.harmonic_mean[k] = 1.0 / cell_average(inv_kappa_fn, grid);
    const double slack = 1e-8 + 1e-6 * c.arithmetic_mean[k];
    if (c.lambda_min[k] < c.harmonic_mean[k] - slack ||
        c.lambda_max[k] > c.arithmetic_mean[k] + slack) {
      c.voigt_reuss = false;
    }
  }
  c.beta_nonnegative = point.beta >= -1e-10 * std::max(1.0, std::fabs(point.beta));
  if (data.dim > 1 && c.symmetry_defect > 1e-10) c.spd = false;
  return c;
}

EffectiveField EffectiveField::uniform(EffectivePointData point, Box domain) {
  EffectiveField f;
  f.mode_ = Mode::Uniform;
  f.domain_ = domain;
  f.data_ = {std::move(point)};
  return f;
}

EffectiveField EffectiveField::quadrature(const MacroMesh& mesh,
                                          std::vector<EffectivePointData> data) {
  if (data.size() != mesh.element_count() * mesh.quad_points()) {
    throw ConfigError("quadrature effective field size mismatch");
  }
  EffectiveField f;
  f.mode_ = Mode::Quadrature;
  f.domain_ = mesh.box;
  f.mesh_ = mesh;
  f.data_ = std::move(data);
  return f;
}

EffectiveField EffectiveField::lattice(Box domain, std::array<int, 2> counts,
                                       std::vector<EffectivePointData> data) {
  std::size_t expected = counts[0];
  if (domain.dim > 1) expected *= counts[1];
  if (data.size() != expected) throw ConfigError("lattice effective field size mismatch");
  EffectiveField f;
  f.mode_ = Mode::Lattice;
  f.domain_ = domain;
  f.lattice_n_ = counts;
  f.data_ = std::move(data);
  return f;
}

bool EffectiveField::matches_mesh(const MacroMesh& mesh) const {
  if (mode_ != Mode::Quadrature) return false;
  if (mesh_.dim != mesh.dim || mesh_.cells != mesh.cells) return false;
  for (int i = 0; i < mesh.dim; ++i) {
    if (mesh_.box.lo[i] != mesh.box.lo[i] || mesh_.box.hi[i] != mesh.box.hi[i]) return false;
  }
  return true;
}

const EffectivePointData& EffectiveField::at_quadrature(std::size_t elem, int q) const {
  if (mode_ == Mode::Uniform) return data_[0];
  if (mode_ != Mode::Quadrature) {
    throw ConfigError("at_quadrature requires a quadrature-mode effective field");
  }
  return data_[elem * mesh_.quad_points() + q];
}

EffectivePointData EffectiveField::sample(const Vec2& x) const {
  if (mode_ == Mode::Uniform) {
    EffectivePointData p = data_[0];
    p.macro_point = x;
    return p;
  }
  if (mode_ != Mode::Lattice) {
    throw ConfigError("pointwise sampling requires a uniform or lattice effective field");
  }
  // multilinear interpolation on the inclusive node lattice
  std::array<int, 2> i0{0, 0};
  std::array<double, 2> w{0.0, 0.0};
  for (int i = 0; i < domain_.dim; ++i) {
    const int n = lattice_n_[i];
    if (n == 1) continue;
    const double r = (x[i] - domain_.lo[i]) / domain_.extent(i) * (n - 1);
    double rf = std::floor(r);
    if (rf < 0) rf = 0;
    if (rf > n - 2) rf = n - 2;
    i0[i] = static_cast<int>(rf);
    w[i] = std::min(std::max(r - rf, 0.0), 1.0);
  }
  auto at = [this](std::array<int, 2> mi) -> const EffectivePointData& {
    std::size_t idx = static_cast<std::size_t>(mi[0]);
    if (domain_.dim > 1) idx += static_cast<std::size_t>(lattice_n_[0]) * mi[1];
    return data_[idx];
  };
  EffectivePointData out;
  out.macro_point = x;
  out.beta = 0.0;
  out.capacity_bar = {0.0, 0.0};
  for (int k = 0; k < 2; ++k) {
    out.kappa_star[k] = {};
    out.convection[k] = {0.0, 0.0};
    out.drift[k] = {0.0, 0.0};
  }
  const int count = domain_.dim > 1 ? 4 : 2;
  for (int a = 0; a < count; ++a) {
    std::array<int, 2> mi = i0;
    double ww = 1.0;
    for (int i = 0; i < domain_.dim; ++i) {
      if (lattice_n_[i] == 1) continue;
      if ((a >> i) & 1) {
        mi[i] += 1;
        ww *= w[i];
      } else {
        ww *= 1.0 - w[i];
      }
    }
    if (ww == 0.0) continue;
    const EffectivePointData& p = at(mi);
    out.beta += ww * p.beta;
    for (int k = 0; k < 2; ++k) {
      out.capacity_bar[k] += ww * p.capacity_bar[k];
      for (int i = 0; i < 2; ++i) {
        out.convection[k][i] += ww * p.convection[k][i];
        out.drift[k][i] += ww * p.drift[k][i];
        for (int j = 0; j < 2; ++j) out.kappa_star[k][i][j] += ww * p.kappa_star[k][i][j];
      }
    }
  }
  return out;
}

EffectivePointData EffectiveField::at(const MacroMesh& mesh, std::size_t elem, int q) const {
  if (mode_ == Mode::Quadrature && matches_mesh(mesh)) return at_quadrature(elem, q);
  if (mode_ == Mode::Quadrature) {
    throw ConfigError("quadrature-mode effective field used with a different mesh");
  }
  return sample(mesh.quad_coords(mesh.element_multi(elem), q));
}

namespace {

ordered_json point_to_json(const EffectivePointData& p, int dim) {
  ordered_json j;
  j["x"] = ordered_json::array();
  for (int i = 0; i < dim; ++i) j["x"].push_back(p.macro_point[i]);
  for (int k = 0; k < 2; ++k) {
    ordered_json jk;
    jk["capacity_bar"] = p.capacity_bar[k];
    ordered_json mat = ordered_json::array();
    for (int i = 0; i < dim; ++i) {
      ordered_json row = ordered_json::array();
      for (int jj = 0; jj < dim; ++jj) row.push_back(p.kappa_star[k][i][jj]);
      mat.push_back(row);
    }
    jk["kappa_star"] = mat;
    ordered_json conv = ordered_json::array(), drift = ordered_json::array();
    for (int i = 0; i < dim; ++i) {
      conv.push_back(p.convection[k][i]);
      drift.push_back(p.drift[k][i]);
    }
    jk["convection"] = conv;
    jk["drift"] = drift;
    j["continuum_" + std::to_string(k + 1)] = jk;
  }
  j["beta"] = p.beta;
  return j;
}

EffectivePointData point_from_json(const ordered_json& j, int dim) {
  EffectivePointData p;
  for (int i = 0; i < dim; ++i) p.macro_point[i] = j.at("x").at(i).get<double>();
  for (int k = 0; k < 2; ++k) {
    const auto& jk = j.at("continuum_" + std::to_string(k + 1));
    p.capacity_bar[k] = jk.at("capacity_bar").get<double>();
    for (int i = 0; i < dim; ++i) {
      for (int jj = 0; jj < dim; ++jj) {
        p.kappa_star[k][i][jj] = jk.at("kappa_star").at(i).at(jj).get<double>();
      }
      p.convection[k][i] = jk.at("convection").at(i).get<double>();
      p.drift[k][i] = jk.at("drift").at(i).get<double>();
    }
  }
  p.beta = j.at("beta").get<double>();
  return p;
}

}  // namespace

void EffectiveField::save_json(const std::string& path) const {
  ordered_json j;
  j["schema"] = "dualhom-effective-v1";
  j["dim"] = domain_.dim;
  switch (mode_) {
    case Mode::Uniform:
      j["mode"] = "uniform";
      break;
    case Mode::Quadrature:
      j["mode"] = "quadrature";
      break;
    case Mode::Lattice:
      j["mode"] = "lattice";
      break;
  }
  ordered_json lo = ordered_json::array(), hi = ordered_json::array();
  for (int i = 0; i < domain_.dim; ++i) {
    lo.push_back(domain_.lo[i]);
    hi.push_back(domain_.hi[i]);
  }
  j["domain"] = {{"lo", lo}, {"hi", hi}};
  if (mode_ == Mode::Quadrature) {
    ordered_json cells = ordered_json::array();
    for (int i = 0; i < domain_.dim; ++i) cells.push_back(mesh_.cells[i]);
    j["mesh_cells"] = cells;
  }
  if (mode_ == Mode::Lattice) {
    ordered_json counts = ordered_json::array();
    for (int i = 0; i < domain_.dim; ++i) counts.push_back(lattice_n_[i]);
    j["lattice"] = counts;
  }
  ordered_json pts = ordered_json::array();
  for (const auto& p : data_) pts.push_back(point_to_json(p, domain_.dim));
  j["points"] = pts;
  if (!checks_.empty()) {
    ordered_json checks = ordered_json::array();
    for (const auto& c : checks_) {
      ordered_json jc;
      jc["symmetry_defect"] = c.symmetry_defect;
      jc["lambda_min"] = {c.lambda_min[0], c.lambda_min[1]};
      jc["lambda_max"] = {c.lambda_max[0], c.lambda_max[1]};
      jc["harmonic_mean"] = {c.harmonic_mean[0], c.harmonic_mean[1]};
      jc["arithmetic_mean"] = {c.arithmetic_mean[0], c.arithmetic_mean[1]};
      jc["spd"] = c.spd;
      jc["voigt_reuss"] = c.voigt_reuss;
      jc["beta_nonnegative"] = c.beta_nonnegative;
      checks.push_back(jc);
    }
    j["checks"] = checks;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
}

EffectiveField EffectiveField::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  ordered_json j = ordered_json::parse(in, nullptr, true);
  if (j.value("schema", "") != std::string("dualhom-effective-v1")) {
    throw IoError("unexpected effective-field schema in " + path);
  }
  const int dim = j.at("dim").get<int>();
  Box box;
  box.dim = dim;
  for (int i = 0; i < dim; ++i) {
    box.lo[i] = j.at("domain").at("lo").at(i).get<double>();
    box.hi[i] = j.at("domain").at("hi").at(i).get<double>();
  }
  std::vector<EffectivePointData> pts;
  for (const auto& pj : j.at("points")) pts.push_back(point_from_json(pj, dim));
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "uniform") {
    if (pts.size() != 1) throw IoError("uniform effective field must hold one point");
    return EffectiveField::uniform(pts[0], box);
  }
  if (mode == "lattice") {
    std::array<int, 2> counts{1, 1};
    for (int i = 0; i < dim; ++i) counts[i] = j.at("lattice").at(i).get<int>();
    return EffectiveField::lattice(box, counts, std::move(pts));
  }
  std::array<int, 2> cells{2, 2};
  for (int i = 0; i < dim; ++i) cells[i] = j.at("mesh_cells").at(i).get<int>();
  return EffectiveField::quadrature(MacroMesh(box, cells), std::move(pts));
}

namespace {

// Solve cell problems + assemble at each requested point, in parallel slots.
std::vector<EffectivePointData> assemble_at_points(const ProblemData& data,
                                                   const std::vector<Vec2>& points,
                                                   const UnitCellGrid& grid,
                                                   const EffectiveBuildOptions& opts,
                                                   std::vector<EffectivePointChecks>* checks) {
  std::vector<EffectivePointData> out(points.size());
  std::vector<EffectivePointChecks> chk(points.size());
  std::vector<std::string> failures(points.size());
  std::atomic<std::size_t> next{0};
  const int jobs = std::max(1, opts.jobs);
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        CellSolutionSet cells = solve_cell_problems(data, points[i], grid, opts.cell);
        out[i] = assemble_effective_point(data, cells);
        if (opts.record_checks) chk[i] = check_effective_point(data, out[i], grid);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  if (jobs == 1 || points.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!failures[i].empty()) {
      throw SolveError("cell solve failed at macro point (" + format_double(points[i][0]) +
                       "," + format_double(points[i][1]) + "): " + failures[i]);
    }
    if (opts.require_spd && opts.record_checks && !chk[i].spd) {
      throw SolveError("effective tensor not SPD at macro point (" +
                       format_double(points[i][0]) + "," + format_double(points[i][1]) + ")");
    }
  }
  if (checks) *checks = std::move(chk);
  return out;
}

}  // namespace

EffectiveField build_effective_field(const ProblemData& data, const MacroMesh& mesh,
                                     const UnitCellGrid& grid,
                                     const EffectiveBuildOptions& opts) {
  if (!data.cell_data_varies_in_x()) {
    Vec2 center{0.5 * (data.domain.lo[0] + data.domain.hi[0]),
                data.dim > 1 ? 0.5 * (data.domain.lo[1] + data.domain.hi[1]) : 0.0};
    std::vector<EffectivePointChecks> checks;
    auto pts = assemble_at_points(data, {center}, grid, opts, &checks);
    EffectiveField f = EffectiveField::uniform(pts[0], data.domain);
    f.set_checks(std::move(checks));
    return f;
  }
  std::vector<Vec2> points;
  points.reserve(mesh.element_count() * mesh.quad_points());
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto emi = mesh.element_multi(e);
    for (int q = 0; q < mesh.quad_points(); ++q) points.push_back(mesh.quad_coords(emi, q));
  }
  std::vector<EffectivePointChecks> checks;
  auto pts = assemble_at_points(data, points, grid, opts, &checks);
  EffectiveField f = EffectiveField::quadrature(mesh, std::move(pts));
  f.set_checks(std::move(checks));
  return f;
}

EffectiveField build_effective_field_lattice(const ProblemData& data,
                                             std::array<int, 2> lattice_counts,
                                             const UnitCellGrid& grid,
                                             const EffectiveBuildOptions& opts) {
  std::vector<Vec2> points;
  const int n0 = lattice_counts[0];
  const int n1 = data.dim > 1 ? lattice_counts[1] : 1;
  for (int b = 0; b < n1; ++b) {
    for (int a = 0; a < n0; ++a) {
      Vec2 x{0.0, 0.0};
      x[0] = n0 == 1 ? 0.5 * (data.domain.lo[0] + data.domain.hi[0])
                     : data.domain.lo[0] + data.domain.extent(0) * a / (n0 - 1);
      if (data.dim > 1) {
        x[1] = n1 == 1 ? 0.5 * (data.domain.lo[1] + data.domain.hi[1])
                       : data.domain.lo[1] + data.domain.extent(1) * b / (n1 - 1);
      }
      points.push_back(x);
    }
  }
  std::vector<EffectivePointChecks> checks;
  auto pts = assemble_at_points(data, points, grid, opts, &checks);
  EffectiveField f = EffectiveField::lattice(data.domain, lattice_counts, std::move(pts));
  f.set_checks(std::move(checks));
  return f;
}

}  // namespace dualhom
