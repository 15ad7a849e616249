#pragma once

#include "ems/assembly.hpp"
#include "ems/coefficient.hpp"
#include "ems/grid.hpp"
#include "ems/types.hpp"

#include <array>
#include <vector>

namespace ems {

/// Nodal values over a rectangular fine-node box (inclusive index ranges,
/// x-fastest storage). Used for partition-of-unity functions and local
/// harmonic extensions, which share the neighborhood box layout.
struct PatchField {
  Index fi0 = 0, fi1 = 0, fj0 = 0, fj1 = 0;
  Vector values;

  Index box_nx() const { return fi1 - fi0; }
  Index box_ny() const { return fj1 - fj0; }
  Index size() const { return (box_nx() + 1) * (box_ny() + 1); }
  Index local(Index fi, Index fj) const { return (fj - fj0) * (box_nx() + 1) + (fi - fi0); }
  bool contains(Index fi, Index fj) const {
    return fi >= fi0 && fi <= fi1 && fj >= fj0 && fj <= fj1;
  }
};

/// MsFEM-type partition of unity: one kappa-harmonic hat per coarse node,
/// supported on the closed neighborhood box.
struct PartitionOfUnity {
  std::vector<PatchField> chi;  ///< indexed by coarse node id

  /// chi_i at a global fine node (zero outside the patch).
  Real value(Index coarse_node, const StructuredGrid2D& fine, Index fine_node) const;
};

/// Solve the four element-local problems -div(kappa grad v) = 0 on K with
/// affine Dirichlet data g_c (g_c = 1 at corner c, affine along dK). Returns
/// nodal fields over K's fine sub-grid in corner order SW, SE, NE, NW.
std::array<Vector, 4> solve_pou_element(const CoarseDecomposition& decomp,
                                        Index coarse_element, const CoefficientField& kappa);

/// Stitch the element-local solutions into per-node functions chi_i.
PartitionOfUnity assemble_pou(const CoarseDecomposition& decomp, const CoefficientField& kappa);

}  // namespace ems
