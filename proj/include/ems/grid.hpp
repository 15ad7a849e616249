#pragma once

#include "ems/types.hpp"

#include <array>
#include <unordered_map>
#include <vector>

namespace ems {

/// Axis-aligned rectangle in physical coordinates.
struct Rect {
  Real xmin = 0.0;
  Real xmax = 1.0;
  Real ymin = 0.0;
  Real ymax = 1.0;

  Real width() const { return xmax - xmin; }
  Real height() const { return ymax - ymin; }
};

/// Uniform quadrilateral mesh on a rectangle.
///
/// Nodes and elements are indexed lexicographically with x running fastest:
/// node (i, j) has id j*(nx+1) + i, element (i, j) has id j*nx + i. Element
/// corner nodes follow the counterclockwise order SW, SE, NE, NW.
struct StructuredGrid2D {
  Rect bounds;
  Index nx = 0;  ///< cells along x
  Index ny = 0;  ///< cells along y

  Index num_nodes() const { return (nx + 1) * (ny + 1); }
  Index num_elements() const { return nx * ny; }

  Real hx() const { return bounds.width() / static_cast<Real>(nx); }
  Real hy() const { return bounds.height() / static_cast<Real>(ny); }

  Index node_id(Index i, Index j) const { return j * (nx + 1) + i; }
  std::pair<Index, Index> node_ij(Index n) const {
    return {n % (nx + 1), n / (nx + 1)};
  }

  /// Node coordinates. Endpoint values are exact: the convex combination
  /// reproduces the rectangle corners bit-for-bit at i = 0 and i = nx.
  std::array<Real, 2> node_xy(Index n) const {
    auto [i, j] = node_ij(n);
    Real tx = static_cast<Real>(i) / static_cast<Real>(nx);
    Real ty = static_cast<Real>(j) / static_cast<Real>(ny);
    return {bounds.xmin + bounds.width() * tx, bounds.ymin + bounds.height() * ty};
  }

  Index element_id(Index i, Index j) const { return j * nx + i; }
  std::pair<Index, Index> element_ij(Index e) const { return {e % nx, e / nx}; }

  /// Corner node ids in the order SW, SE, NE, NW.
  std::array<Index, 4> element_nodes(Index e) const {
    auto [i, j] = element_ij(e);
    return {node_id(i, j), node_id(i + 1, j), node_id(i + 1, j + 1), node_id(i, j + 1)};
  }

  std::array<Real, 2> element_centroid(Index e) const {
    auto [i, j] = element_ij(e);
    return {bounds.xmin + bounds.width() * ((static_cast<Real>(i) + 0.5) / static_cast<Real>(nx)),
            bounds.ymin + bounds.height() * ((static_cast<Real>(j) + 0.5) / static_cast<Real>(ny))};
  }

  bool is_boundary_node(Index n) const {
    auto [i, j] = node_ij(n);
    return i == 0 || i == nx || j == 0 || j == ny;
  }

  std::vector<Index> boundary_nodes() const;
};

/// Build a uniform grid; throws std::invalid_argument on non-positive cell
/// counts or a degenerate rectangle.
StructuredGrid2D build_grid(const Rect& bounds, Index nx, Index ny);

/// One segment of the neighborhood boundary d(omega_i) \ dD.
///
/// Nodes are ordered by increasing physical coordinate along the segment, so
/// the affine reference map t_k = k/(n-1) is orientation-consistent. Ownership
/// implements the half-open counterclockwise rule: a segment owns its ccw-first
/// endpoint and not its ccw-last one, which makes the owned sets a partition
/// of the fine trace nodes. Nodes on dD are flagged and never owned.
struct EdgeSegment {
  int axis = 0;  ///< 0: varies in x (horizontal), 1: varies in y (vertical)
  std::vector<Index> nodes;      ///< fine node ids along the closed segment
  std::vector<char> owned;       ///< half-open ownership flags
  std::vector<char> on_dirichlet;///< node lies on dD (endpoints only)

  Index num_intervals() const { return static_cast<Index>(nodes.size()) - 1; }
  Real ref(Index k) const {
    return static_cast<Real>(k) / static_cast<Real>(num_intervals());
  }
};

/// Coarse neighborhood omega_i: the coarse elements sharing node x_i, the
/// covered fine-node box, and the boundary segments with their fine traces.
struct Neighborhood {
  Index coarse_node = -1;
  std::vector<Index> coarse_elements;
  /// Fine-node box, inclusive ranges.
  Index fi0 = 0, fi1 = 0, fj0 = 0, fj1 = 0;
  bool fully_interior = false;  ///< closure of omega_i does not touch dD
  std::vector<EdgeSegment> segments;  ///< ccw order: bottom, right, top, left
  /// Fine nodes of d(omega_i)\dD, each exactly once, in ccw ownership order.
  std::vector<Index> trace_nodes;
  std::unordered_map<Index, Index> trace_index;  ///< fine node id -> position

  Index box_nx() const { return fi1 - fi0; }
  Index box_ny() const { return fj1 - fj0; }
  Index box_nodes() const { return (box_nx() + 1) * (box_ny() + 1); }
  Index box_local(Index fi, Index fj) const {
    return (fj - fj0) * (box_nx() + 1) + (fi - fi0);
  }
};

/// Coarse/fine mesh pair with per-node neighborhoods and index maps.
struct CoarseDecomposition {
  StructuredGrid2D coarse;
  StructuredGrid2D fine;
  Index ratio = 0;  ///< H/h, power of two
  std::vector<Neighborhood> neighborhoods;  ///< one per coarse node
  Index overlap_constant = 0;  ///< C_ov

  Index fine_node_of_coarse(Index cn) const {
    auto [ci, cj] = coarse.node_ij(cn);
    return fine.node_id(ci * ratio, cj * ratio);
  }
  int max_level() const;  ///< log2(ratio): largest valid hierarchical level
};

/// Refine a coarse grid by an integer power-of-two ratio and derive the
/// neighborhoods and their boundary segments. Throws std::invalid_argument
/// when the ratio is not a power of two >= 2.
CoarseDecomposition build_decomposition(const StructuredGrid2D& coarse, Index ratio);

}  // namespace ems
