#include "ems/grid.hpp"

#include <bit>
#include <stdexcept>

namespace ems {

std::vector<Index> StructuredGrid2D::boundary_nodes() const {
  std::vector<Index> out;
  out.reserve(2 * (nx + ny));
  for (Index n = 0; n < num_nodes(); ++n) {
    if (is_boundary_node(n)) out.push_back(n);
  }
  return out;
}

StructuredGrid2D build_grid(const Rect& bounds, Index nx, Index ny) {
  if (nx < 1 || ny < 1) {
    throw std::invalid_argument("build_grid: cell counts must be positive");
  }
  if (!(bounds.xmax > bounds.xmin) || !(bounds.ymax > bounds.ymin)) {
    throw std::invalid_argument("build_grid: degenerate rectangle");
  }
  StructuredGrid2D g;
  g.bounds = bounds;
  g.nx = nx;
  g.ny = ny;
  return g;
}

int CoarseDecomposition::max_level() const {
  int lvl = 0;
  for (Index r = ratio; r > 1; r >>= 1) ++lvl;
  return lvl;
}

namespace {

// Sides of the neighborhood box in ccw order starting at the bottom.
enum Side { kBottom = 0, kRight = 1, kTop = 2, kLeft = 3 };

EdgeSegment make_segment(const StructuredGrid2D& fine, Side side, Index fi0, Index fi1,
                         Index fj0, Index fj1) {
  EdgeSegment seg;
  const bool horizontal = (side == kBottom || side == kTop);
  seg.axis = horizontal ? 0 : 1;
  const Index n = horizontal ? (fi1 - fi0) : (fj1 - fj0);
  seg.nodes.resize(n + 1);
  for (Index k = 0; k <= n; ++k) {
    switch (side) {
      case kBottom: seg.nodes[k] = fine.node_id(fi0 + k, fj0); break;
      case kTop:    seg.nodes[k] = fine.node_id(fi0 + k, fj1); break;
      case kRight:  seg.nodes[k] = fine.node_id(fi1, fj0 + k); break;
      case kLeft:   seg.nodes[k] = fine.node_id(fi0, fj0 + k); break;
    }
  }
  seg.on_dirichlet.assign(n + 1, 0);
  for (Index k = 0; k <= n; ++k) {
    if (fine.is_boundary_node(seg.nodes[k])) seg.on_dirichlet[k] = 1;
  }
  // Half-open ccw ownership: bottom/right run ccw in storage order, top/left
  // run ccw against it, so their ccw-first endpoint is the stored last one.
  seg.owned.assign(n + 1, 1);
  if (side == kBottom || side == kRight) {
    seg.owned[n] = 0;
  } else {
    seg.owned[0] = 0;
  }
  for (Index k = 0; k <= n; ++k) {
    if (seg.on_dirichlet[k]) seg.owned[k] = 0;
  }
  return seg;
}

}  // namespace

CoarseDecomposition build_decomposition(const StructuredGrid2D& coarse, Index ratio) {
  if (ratio < 2 || !std::has_single_bit(static_cast<std::uint64_t>(ratio))) {
    throw std::invalid_argument("build_decomposition: ratio must be a power of two >= 2");
  }
  CoarseDecomposition d;
  d.coarse = coarse;
  d.ratio = ratio;
  d.fine = build_grid(coarse.bounds, coarse.nx * ratio, coarse.ny * ratio);

  const Index cnx = coarse.nx, cny = coarse.ny;
  d.neighborhoods.resize(coarse.num_nodes());
  std::vector<Index> patch_count(coarse.num_elements(), 0);

  for (Index cn = 0; cn < coarse.num_nodes(); ++cn) {
    Neighborhood& nb = d.neighborhoods[cn];
    nb.coarse_node = cn;
    auto [ci, cj] = coarse.node_ij(cn);

    const Index ei0 = std::max<Index>(0, ci - 1);
    const Index ei1 = std::min<Index>(cnx - 1, ci);
    const Index ej0 = std::max<Index>(0, cj - 1);
    const Index ej1 = std::min<Index>(cny - 1, cj);
    for (Index ej = ej0; ej <= ej1; ++ej) {
      for (Index ei = ei0; ei <= ei1; ++ei) {
        Index e = coarse.element_id(ei, ej);
        nb.coarse_elements.push_back(e);
        ++patch_count[e];
      }
    }

    nb.fi0 = ei0 * ratio;
    nb.fi1 = (ei1 + 1) * ratio;
    nb.fj0 = ej0 * ratio;
    nb.fj1 = (ej1 + 1) * ratio;
    nb.fully_interior = nb.fi0 > 0 && nb.fj0 > 0 && nb.fi1 < d.fine.nx && nb.fj1 < d.fine.ny;

    // Box sides lying on dD are dropped (homogeneous Dirichlet).
    const bool keep[4] = {nb.fj0 > 0, nb.fi1 < d.fine.nx, nb.fj1 < d.fine.ny, nb.fi0 > 0};
    for (int s = 0; s < 4; ++s) {
      if (!keep[s]) continue;
      nb.segments.push_back(
          make_segment(d.fine, static_cast<Side>(s), nb.fi0, nb.fi1, nb.fj0, nb.fj1));
    }

    for (const EdgeSegment& seg : nb.segments) {
      for (std::size_t k = 0; k < seg.nodes.size(); ++k) {
        if (seg.owned[k]) {
          nb.trace_index.emplace(seg.nodes[k], static_cast<Index>(nb.trace_nodes.size()));
          nb.trace_nodes.push_back(seg.nodes[k]);
        }
      }
    }
  }

  d.overlap_constant = 0;
  for (Index e = 0; e < coarse.num_elements(); ++e) {
    d.overlap_constant = std::max(d.overlap_constant, patch_count[e]);
  }
  return d;
}

}  // namespace ems
