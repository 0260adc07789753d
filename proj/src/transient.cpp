#include "dualhom/transient.hpp"

#include <cstring>
#include <fstream>

namespace dualhom {

void write_snapshot_csv(const std::string& path, const TransientField& field, int step) {
  if (step < 0 || step >= field.step_count()) throw ConfigError("snapshot step out of range");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "x1";
  if (field.mesh.dim > 1) out << ",x2";
  out << ",u1,u2\n";
  const std::size_t nodes = field.mesh.node_count();
  for (std::size_t v = 0; v < nodes; ++v) {
    const Vec2 x = field.mesh.node_coords(v);
    out << format_double(x[0]);
    if (field.mesh.dim > 1) out << "," << format_double(x[1]);
    out << "," << format_double(field.u1[step][v]) << "," << format_double(field.u2[step][v])
        << "\n";
  }
}

namespace {
constexpr char kSeriesMagic[8] = {'D', 'H', 'T', 'S', '0', '0', '0', '1'};
}

void write_series_binary(const std::string& path, const TransientField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kSeriesMagic, 8);
  auto u32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
  auto f64 = [&out](double v) { out.write(reinterpret_cast<char*>(&v), 8); };
  const MacroMesh& m = field.mesh;
  u32(static_cast<std::uint32_t>(m.dim));
  for (int i = 0; i < m.dim; ++i) u32(static_cast<std::uint32_t>(m.cells[i]));
  for (int i = 0; i < m.dim; ++i) f64(m.box.lo[i]);
  for (int i = 0; i < m.dim; ++i) f64(m.box.hi[i]);
  f64(field.tgrid.horizon);
  u32(static_cast<std::uint32_t>(field.step_count()));
  for (int s = 0; s < field.step_count(); ++s) {
    out.write(reinterpret_cast<const char*>(field.u1[s].data()),
              static_cast<std::streamsize>(field.u1[s].size() * 8));
    out.write(reinterpret_cast<const char*>(field.u2[s].data()),
              static_cast<std::streamsize>(field.u2[s].size() * 8));
  }
  if (!out) throw IoError("failed writing " + path);
}

TransientField read_series_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kSeriesMagic, 8) != 0) throw IoError("bad series file: " + path);
  auto u32 = [&in, &path]() {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw IoError("truncated series file: " + path);
    return v;
  };
  auto f64 = [&in, &path]() {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw IoError("truncated series file: " + path);
    return v;
  };
  const int dim = static_cast<int>(u32());
  std::array<int, 2> cells{2, 2};
  for (int i = 0; i < dim; ++i) cells[i] = static_cast<int>(u32());
  Box box;
  box.dim = dim;
  for (int i = 0; i < dim; ++i) box.lo[i] = f64();
  for (int i = 0; i < dim; ++i) box.hi[i] = f64();
  const double horizon = f64();
  const int stored = static_cast<int>(u32());
  TransientField field;
  field.mesh = MacroMesh(box, cells);
  field.tgrid = TimeGrid(horizon, stored > 1 ? stored - 1 : 1);
  const std::size_t nodes = field.mesh.node_count();
  field.u1.assign(stored, std::vector<double>(nodes));
  field.u2.assign(stored, std::vector<double>(nodes));
  for (int s = 0; s < stored; ++s) {
    in.read(reinterpret_cast<char*>(field.u1[s].data()),
            static_cast<std::streamsize>(nodes * 8));
    in.read(reinterpret_cast<char*>(field.u2[s].data()),
            static_cast<std::streamsize>(nodes * 8));
    if (!in) throw IoError("truncated series payload: " + path);
  }
  return field;
}

}  // namespace dualhom
