#include "ems/vtk.hpp"

#include <fstream>
#include <stdexcept>

namespace ems {

void write_vtk(const std::string& path, const StructuredGrid2D& grid,
               const std::vector<std::pair<std::string, Vector>>& fields,
               const std::string& title) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_vtk: cannot open " + path);
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\n";
  out << "DATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << grid.nx + 1 << " " << grid.ny + 1 << " 1\n";
  out << "ORIGIN " << grid.bounds.xmin << " " << grid.bounds.ymin << " 0\n";
  out << "SPACING " << grid.hx() << " " << grid.hy() << " 1\n";
  out << "POINT_DATA " << grid.num_nodes() << "\n";
  out.precision(9);
  for (const auto& [name, values] : fields) {
    if (values.size() != grid.num_nodes()) {
      throw std::invalid_argument("write_vtk: field '" + name + "' is not a full nodal vector");
    }
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (Index n = 0; n < values.size(); ++n) out << values[n] << "\n";
  }
}

}  // namespace ems
