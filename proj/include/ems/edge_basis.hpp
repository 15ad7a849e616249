#pragma once

#include "ems/grid.hpp"
#include "ems/types.hpp"

#include <utility>
#include <vector>

namespace ems {

/// Index set B_m of the hierarchical basis: {0, 1} on level 0, the odd
/// indices in [1, 2^m - 1] on levels m >= 1.
bool in_index_set(int m, Index j);

/// dim V_l = 2^l + 1 on [0,1].
Index hierarchical_dim(int level);

/// All (level, index) pairs of the hierarchical basis up to `level`,
/// ordered by level then index.
std::vector<std::pair<int, Index>> hierarchical_members(int level);

/// Hat psi_{m,j}(x) = max(0, 1 - |x 2^m - j|) on [0,1]; zero outside.
/// Throws std::invalid_argument when j is not in B_m.
Real basis_1d_eval(int m, Index j, Real x);

/// Level-l edge space on d(omega_i)\dD: per segment the nodal P1 functions
/// on the dyadic 2^l grid, merged at shared segment corners and with dofs on
/// dD dropped. Functions are sampled at the fine trace nodes.
struct EdgeSpace {
  Index coarse_node = -1;
  int level = 0;
  Matrix nodal;  ///< (#trace nodes) x dim, column per dof

  struct Dof {
    Index fine_node;  ///< nodal point (coincides with a fine node)
    int segment;      ///< first segment carrying the dof
    Index level_index;///< j in 0..2^l along that segment
  };
  std::vector<Dof> dofs;

  Index dim() const { return nodal.cols(); }
};

/// Throws std::invalid_argument when 2^level does not divide the segment
/// interval counts (level exceeds log2(ratio)).
EdgeSpace build_edge_space(const CoarseDecomposition& decomp, Index coarse_node, int level);

/// P1 mass matrix of the fine trace of d(omega_i)\dD (arclength measure);
/// rows/cols follow Neighborhood::trace_nodes.
SparseMatrix edge_trace_mass(const CoarseDecomposition& decomp, const Neighborhood& nb);

/// L2(d(omega_i)) norm of a fine-trace function.
Real edge_trace_norm(const CoarseDecomposition& decomp, const Neighborhood& nb, const Vector& v);

/// Coefficients of the L2(d(omega_i))-projection of a fine-trace function
/// onto the edge space.
Vector l2_project_edge(const CoarseDecomposition& decomp, const EdgeSpace& space,
                       const Vector& trace_values);

}  // namespace ems
