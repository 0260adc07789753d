#ifndef DUALHOM_MESH_HPP
#define DUALHOM_MESH_HPP

#include <array>
#include <span>
#include <vector>

#include "dualhom/common.hpp"

namespace dualhom {

// Uniform tensor-product mesh on an axis-aligned box with multilinear (Q1)
// elements and homogeneous Dirichlet boundary. Nodes are lexicographic with
// the first coordinate fastest; interior nodes carry the unknowns.
struct MacroMesh {
  int dim = 1;
  Box box;
  std::array<int, 2> cells{1, 1};

  MacroMesh() = default;
  MacroMesh(Box b, std::array<int, 2> n);

  int nodes_per_dim(int i) const { return cells[i] + 1; }
  std::size_t node_count() const {
    std::size_t c = nodes_per_dim(0);
    return dim == 1 ? c : c * nodes_per_dim(1);
  }
  std::size_t element_count() const {
    std::size_t c = cells[0];
    return dim == 1 ? c : c * cells[1];
  }
  double h(int i) const { return box.extent(i) / cells[i]; }
  double h_max() const { return dim == 1 ? h(0) : std::max(h(0), h(1)); }
  double element_volume() const { return dim == 1 ? h(0) : h(0) * h(1); }

  std::size_t node_index(std::array<int, 2> mi) const {
    std::size_t idx = static_cast<std::size_t>(mi[0]);
    if (dim > 1) idx += static_cast<std::size_t>(nodes_per_dim(0)) * mi[1];
    return idx;
  }
  std::array<int, 2> node_multi(std::size_t idx) const {
    if (dim == 1) return {static_cast<int>(idx), 0};
    const int npd = nodes_per_dim(0);
    return {static_cast<int>(idx % npd), static_cast<int>(idx / npd)};
  }
  Vec2 node_coords(std::size_t idx) const {
    const auto mi = node_multi(idx);
    return {box.lo[0] + mi[0] * h(0), dim > 1 ? box.lo[1] + mi[1] * h(1) : 0.0};
  }
  bool is_boundary(std::size_t idx) const {
    const auto mi = node_multi(idx);
    for (int i = 0; i < dim; ++i) {
      if (mi[i] == 0 || mi[i] == cells[i]) return true;
    }
    return false;
  }

  std::size_t element_index(std::array<int, 2> emi) const {
    std::size_t idx = static_cast<std::size_t>(emi[0]);
    if (dim > 1) idx += static_cast<std::size_t>(cells[0]) * emi[1];
    return idx;
  }
  std::array<int, 2> element_multi(std::size_t idx) const {
    if (dim == 1) return {static_cast<int>(idx), 0};
    return {static_cast<int>(idx % cells[0]), static_cast<int>(idx / cells[0])};
  }
  int corners() const { return dim == 1 ? 2 : 4; }
  int quad_points() const { return corners(); }
  std::size_t element_node(std::array<int, 2> emi, int corner) const {
    return node_index({emi[0] + (corner & 1), dim > 1 ? emi[1] + ((corner >> 1) & 1) : 0});
  }

  // 2-point tensor Gauss rule
  Vec2 quad_coords(std::array<int, 2> emi, int q) const;
  double quad_weight() const;
  Vec2 quad_local(int q) const;
  Vec2 element_center(std::array<int, 2> emi) const;

  double shape(int corner, const Vec2& xi) const;
  Vec2 shape_gradient(int corner, const Vec2& xi) const;  // physical gradient

  // Multilinear interpolation of nodal data (x clamped into the box).
  double interpolate(std::span<const double> nodal, const Vec2& x) const;
  // Gradient of the FE interpolant inside the element containing x.
  Vec2 element_gradient_at(std::span<const double> nodal, const Vec2& x) const;
  // Nodal gradient recovered by corner averaging (superconvergent on the
  // uniform mesh); returned per component.
  std::array<std::vector<double>, 2> recovered_gradient(std::span<const double> nodal) const;
  Vec2 interpolate_gradient(const std::array<std::vector<double>, 2>& grad,
                            const Vec2& x) const;

  void locate(const Vec2& x, std::array<int, 2>& emi, Vec2& xi) const;
};

struct TimeGrid {
  double horizon = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double T, int m) : horizon(T), steps(m) {
    if (!(T > 0.0) || m < 1) throw ConfigError("time grid requires T > 0 and steps >= 1");
  }
  double dt() const { return horizon / steps; }
  double time_at(int step) const { return horizon * step / steps; }
};

}  // namespace dualhom

#endif
