#pragma once

#include "ems/assembly.hpp"
#include "ems/coefficient.hpp"
#include "ems/edge_basis.hpp"
#include "ems/grid.hpp"
#include "ems/pou.hpp"
#include "ems/types.hpp"

#include <utility>
#include <vector>

namespace ems {

/// Global edge multiscale ansatz space on the fine free nodes.
///
/// Column c of `basis` is chi_i * (local extension of edge function j), with
/// provenance (i, j). Coarse operators are Galerkin projections B^T X B,
/// stored sparse (columns only couple between overlapping neighborhoods) and
/// densified on demand by the integrator.
struct MultiscaleSpace {
  int level = 0;
  SparseMatrix basis;  ///< fine free nodes x m
  std::vector<std::pair<Index, Index>> provenance;  ///< (coarse node, edge dof)
  SparseMatrix mass;        ///< B^T M B, symmetrized
  SparseMatrix diffusion;   ///< B^T A B, symmetrized
  SparseMatrix convection;  ///< B^T C B, unmodulated
  std::vector<Index> pruned_columns;  ///< original column ids removed
  Vector column_norms;  ///< mass norms of the raw columns (columns are stored normalized)
  Real mass_symmetry_defect = 0.0;      ///< relative, max|X - X^T| / max|X|
  Real diffusion_symmetry_defect = 0.0;

  Index dim() const { return basis.cols(); }
};

/// Solve the local problem -div(kappa grad v) + g(0) beta0 . grad v = 0 on
/// omega_i with Dirichlet data `edge_fn` on the trace of d(omega_i)\dD and
/// zero on d(omega_i) ∩ dD. Returns the nodal field over the neighborhood
/// box. Throws std::runtime_error carrying the node id on solver failure.
PatchField harmonic_extension(const CoarseDecomposition& decomp, Index coarse_node,
                              const CoefficientField& kappa, const VelocityField& velocity,
                              const Vector& edge_fn);

/// Drop near-dependent columns: greedy rank-revealing Cholesky of B^T M B in
/// column order with tolerance 1e-12 * trace / m. Returns the original ids of
/// the dropped columns; `basis` is replaced by the kept columns.
std::vector<Index> prune_columns(SparseMatrix& basis, const SparseMatrix& fine_mass_free);

/// Assemble the global basis (interior coarse nodes, level-l edge spaces),
/// prune, and project the coarse mass. Diffusion/convection projections are
/// installed by project_operators.
MultiscaleSpace build_multiscale_space(const CoarseDecomposition& decomp,
                                       const CoefficientField& kappa,
                                       const VelocityField& velocity, int level,
                                       const PartitionOfUnity& pou,
                                       const SparseMatrix& fine_mass_free,
                                       const FreeNodeMap& free_map);

/// Galerkin projections of the fine operators onto the (pruned) basis.
/// Mass and diffusion are symmetrized; the defect max|X - X^T| is recorded.
void project_operators(MultiscaleSpace& space, const SparseMatrix& fine_mass,
                       const SparseMatrix& fine_diffusion, const SparseMatrix& fine_convection);

/// L2 projection of a fine free-node vector: solves M_ms c = B^T M u0.
Vector project_initial(const MultiscaleSpace& space, const SparseMatrix& fine_mass,
                       const Vector& u0_free);

Vector prolongate(const MultiscaleSpace& space, const Vector& coeffs);

}  // namespace ems
