#ifndef DUALHOM_TRANSIENT_HPP
#define DUALHOM_TRANSIENT_HPP

#include <string>
#include <vector>

#include "dualhom/mesh.hpp"

namespace dualhom {

// Nodal time series of the two continua. Step 0 holds the discrete initial
// data; boundary nodes are zero at every step.
struct TransientField {
  MacroMesh mesh;
  TimeGrid tgrid;
  std::vector<std::vector<double>> u1;  // steps+1 vectors of node_count values
  std::vector<std::vector<double>> u2;

  int step_count() const { return static_cast<int>(u1.size()); }
};

// CSV snapshot: node coordinates plus u1,u2 at the selected step.
void write_snapshot_csv(const std::string& path, const TransientField& field, int step);

// Compact binary time series: magic "DHTS0001", u32 dim, u32 cells[dim],
// f64 lo[dim], f64 hi[dim], f64 T, u32 stored steps, then per step u1 then
// u2 nodal values as 64-bit floats.
void write_series_binary(const std::string& path, const TransientField& field);
TransientField read_series_binary(const std::string& path);

}  // namespace dualhom

#endif
