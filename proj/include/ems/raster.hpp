#pragma once

#include "ems/coefficient.hpp"
#include "ems/grid.hpp"

#include <string>

namespace ems {

/// Plain-text permeability raster:
///   line 1: EMSK 1 <nx> <ny>
///   then ny rows of nx positive decimal values, row-major, y increasing.
/// The raster dimensions must equal or integer-divide the fine element grid;
/// coarser rasters are replicated nearest-cell. Load failures throw
/// std::runtime_error carrying the offending line number.
CoefficientField load_permeability(const std::string& path, const StructuredGrid2D& fine);

/// Writes one value per element of `grid` in the same format.
void save_raster(const std::string& path, Index nx, Index ny, const Vector& values);

}  // namespace ems
