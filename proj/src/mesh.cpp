#include "dualhom/mesh.hpp"

#include <cmath>

namespace dualhom {

namespace {
constexpr double kGaussLo = 0.5 - 0.28867513459481288225;
constexpr double kGaussHi = 0.5 + 0.28867513459481288225;
}  // namespace

MacroMesh::MacroMesh(Box b, std::array<int, 2> n) : dim(b.dim), box(b), cells(n) {
  if (dim < 1 || dim > 2) throw ConfigError("mesh dimension must be 1 or 2");
  for (int i = 0; i < dim; ++i) {
    if (cells[i] < 2) throw ConfigError("mesh needs at least 2 cells per dimension");
    if (!(box.extent(i) > 0.0)) throw ConfigError("degenerate domain box");
  }
}

Vec2 MacroMesh::quad_local(int q) const {
  Vec2 xi{0.0, 0.0};
  for (int i = 0; i < dim; ++i) xi[i] = ((q >> i) & 1) ? kGaussHi : kGaussLo;
  return xi;
}

Vec2 MacroMesh::quad_coords(std::array<int, 2> emi, int q) const {
  const Vec2 xi = quad_local(q);
  Vec2 x{0.0, 0.0};
  for (int i = 0; i < dim; ++i) x[i] = box.lo[i] + (emi[i] + xi[i]) * h(i);
  return x;
}

double MacroMesh::quad_weight() const {
  double w = h(0) / 2.0;
  if (dim > 1) w *= h(1) / 2.0;
  return w;
}

Vec2 MacroMesh::element_center(std::array<int, 2> emi) const {
  Vec2 x{0.0, 0.0};
  for (int i = 0; i < dim; ++i) x[i] = box.lo[i] + (emi[i] + 0.5) * h(i);
  return x;
}

double MacroMesh::shape(int corner, const Vec2& xi) const {
  double v = (corner & 1) ? xi[0] : 1.0 - xi[0];
  if (dim > 1) v *= ((corner >> 1) & 1) ? xi[1] : 1.0 - xi[1];
  return v;
}

Vec2 MacroMesh::shape_gradient(int corner, const Vec2& xi) const {
  Vec2 g{0.0, 0.0};
  for (int i = 0; i < dim; ++i) {
    double gi = (((corner >> i) & 1) ? 1.0 : -1.0) / h(i);
    for (int j = 0; j < dim; ++j) {
      if (j == i) continue;
      gi *= ((corner >> j) & 1) ? xi[j] : 1.0 - xi[j];
    }
    g[i] = gi;
  }
  return g;
}

void MacroMesh::locate(const Vec2& x, std::array<int, 2>& emi, Vec2& xi) const {
  emi = {0, 0};
  xi = {0.0, 0.0};
  for (int i = 0; i < dim; ++i) {
    const double r = (x[i] - box.lo[i]) / h(i);
    double rf = std::floor(r);
    if (rf < 0) rf = 0;
    if (rf > cells[i] - 1) rf = cells[i] - 1;
    emi[i] = static_cast<int>(rf);
    double w = r - rf;
    if (w < 0.0) w = 0.0;
    if (w > 1.0) w = 1.0;
    xi[i] = w;
  }
}

double MacroMesh::interpolate(std::span<const double> nodal, const Vec2& x) const {
  std::array<int, 2> emi;
  Vec2 xi;
  locate(x, emi, xi);
  double acc = 0.0;
  for (int a = 0; a < corners(); ++a) {
    acc += shape(a, xi) * nodal[element_node(emi, a)];
  }
  return acc;
}

Vec2 MacroMesh::element_gradient_at(std::span<const double> nodal, const Vec2& x) const {
  std::array<int, 2> emi;
  Vec2 xi;
  locate(x, emi, xi);
  Vec2 g{0.0, 0.0};
  for (int a = 0; a < corners(); ++a) {
    const Vec2 ga = shape_gradient(a, xi);
    const double v = nodal[element_node(emi, a)];
    g[0] += v * ga[0];
    g[1] += v * ga[1];
  }
  return g;
}

std::array<std::vector<double>, 2> MacroMesh::recovered_gradient(
    std::span<const double> nodal) const {
  std::array<std::vector<double>, 2> out;
  const std::size_t nodes = node_count();
  for (int i = 0; i < dim; ++i) out[i].assign(nodes, 0.0);
  for (std::size_t v = 0; v < nodes; ++v) {
    const auto mi = node_multi(v);
    Vec2 acc{0.0, 0.0};
    int adjacent = 0;
    for (int c = 0; c < corners(); ++c) {
      // element for which node v is corner c
      std::array<int, 2> emi{mi[0] - (c & 1), dim > 1 ? mi[1] - ((c >> 1) & 1) : 0};
      bool ok = true;
      for (int i = 0; i < dim; ++i) {
        if (emi[i] < 0 || emi[i] >= cells[i]) ok = false;
      }
      if (!ok) continue;
      const Vec2 xi{static_cast<double>(c & 1), static_cast<double>((c >> 1) & 1)};
      Vec2 g{0.0, 0.0};
      for (int a = 0; a < corners(); ++a) {
        const Vec2 ga = shape_gradient(a, xi);
        const double val = nodal[element_node(emi, a)];
        g[0] += val * ga[0];
        g[1] += val * ga[1];
      }
      acc[0] += g[0];
      acc[1] += g[1];
      ++adjacent;
    }
    for (int i = 0; i < dim; ++i) out[i][v] = acc[i] / adjacent;
  }
  return out;
}

Vec2 MacroMesh::interpolate_gradient(const std::array<std::vector<double>, 2>& grad,
                                     const Vec2& x) const {
  Vec2 g{0.0, 0.0};
  g[0] = interpolate(grad[0], x);
  if (dim > 1) g[1] = interpolate(grad[1], x);
  return g;
}

}  // namespace dualhom
