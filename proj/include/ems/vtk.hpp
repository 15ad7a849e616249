#pragma once

#include "ems/grid.hpp"
#include "ems/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace ems {

/// Legacy-ASCII structured-points VTK with one or more nodal scalar fields
/// (full-node vectors).
void write_vtk(const std::string& path, const StructuredGrid2D& grid,
               const std::vector<std::pair<std::string, Vector>>& fields,
               const std::string& title = "ems field");

}  // namespace ems
