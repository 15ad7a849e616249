#pragma once

#include "ems/coefficient.hpp"
#include "ems/grid.hpp"
#include "ems/types.hpp"

#include <functional>
#include <vector>

namespace ems {

/// Square sparse operator over fine nodes, either all nodes or the free
/// (non-Dirichlet) subset, with a symmetry tag.
struct SparseOperator {
  SparseMatrix matrix;
  bool symmetric = false;
};

/// 4x4 bilinear element matrices on an hx-by-hy rectangle; corner order
/// SW, SE, NE, NW. Mass and stiffness use 2x2 Gauss (exact for bilinear
/// shapes and per-element-constant kappa), convection uses 3x3 Gauss.
Eigen::Matrix4d element_mass(Real hx, Real hy);
Eigen::Matrix4d element_stiffness(Real hx, Real hy);
Eigen::Matrix4d element_convection(Real x0, Real y0, Real hx, Real hy,
                                   const VelocityField& beta);

SparseOperator assemble_mass(const StructuredGrid2D& grid);
SparseOperator assemble_stiffness(const StructuredGrid2D& grid, const CoefficientField& kappa);
/// Entry (p,q) = int (beta0 . grad phi_q) phi_p; unmodulated, generally
/// nonsymmetric. Time enters later as g(t) * C.
SparseOperator assemble_convection(const StructuredGrid2D& grid, const VelocityField& beta);

/// Load vector b_p = int f phi_p dx with 3x3 Gauss.
Vector assemble_load(const StructuredGrid2D& grid, const std::function<Real(Real, Real)>& f);

/// Nodal interpolation of an analytic function.
Vector interpolate(const StructuredGrid2D& grid, const std::function<Real(Real, Real)>& f);

/// Fine-grid L2 projection: solves M c = b with b the load vector of f.
Vector l2_project_fine(const StructuredGrid2D& grid, const std::function<Real(Real, Real)>& f);

/// Free-node indexing after removing a constrained node set.
struct FreeNodeMap {
  std::vector<Index> node_of_free;
  std::vector<Index> free_of_node;  ///< -1 for constrained nodes

  Index num_free() const { return static_cast<Index>(node_of_free.size()); }
};

FreeNodeMap make_free_map(Index num_nodes, const std::vector<Index>& constrained);

SparseMatrix reduce_matrix(const SparseMatrix& full, const FreeNodeMap& map);
Vector restrict_to_free(const Vector& full, const FreeNodeMap& map);
Vector extend_to_all(const Vector& free_values, const FreeNodeMap& map, Index num_nodes);

/// Reduced system after strong (row/column elimination) homogeneous
/// Dirichlet treatment.
struct ReducedSystem {
  SparseMatrix matrix;
  Vector rhs;
  FreeNodeMap map;
  bool symmetric = false;
};

ReducedSystem apply_dirichlet(const SparseOperator& op, const Vector& rhs,
                              const std::vector<Index>& boundary);

}  // namespace ems
